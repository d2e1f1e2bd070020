use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    Simulated,
    Real,
}

/// Milliseconds since the epoch. Simulated clocks move only through
/// [`VirtualClock::advance_to`]; real clocks follow the wall clock.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    mode: ClockMode,
    now: u64,
}

impl VirtualClock {
    pub fn simulated(start: u64) -> Self {
        VirtualClock {
            mode: ClockMode::Simulated,
            now: start,
        }
    }

    pub fn real() -> Self {
        VirtualClock {
            mode: ClockMode::Real,
            now: wall_ms(),
        }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn is_simulated(&self) -> bool {
        self.mode == ClockMode::Simulated
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Never moves backwards.
    pub fn advance_to(&mut self, t: u64) {
        self.now = self.now.max(t);
    }

    /// Catches a real clock up with the wall clock; no-op when simulated.
    pub fn sync(&mut self) -> u64 {
        if self.mode == ClockMode::Real {
            self.advance_to(wall_ms());
        }
        self.now
    }
}

fn wall_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
