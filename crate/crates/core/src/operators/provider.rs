//! Provider operators (push, pull), the inject trigger and the driver
//! interface they read from.

use thiserror::Error;

use super::config::ProviderConfig;
use super::OpContext;
use crate::data::{
    make_raw_item, ContentLabel, DataItem, DataKind, DeviceDescriptor, Message, Payload,
    ProvenanceTrail, TriggerMeta,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("driver {0} is unavailable")]
    Unavailable(String),
    #[error("driver {driver} produced {got} data for a {expected} node")]
    WrongKind {
        driver: String,
        expected: DataKind,
        got: DataKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverMode {
    Push,
    Pull,
    Both,
}

impl DriverMode {
    pub fn can_push(self) -> bool {
        self != DriverMode::Pull
    }

    pub fn can_pull(self) -> bool {
        self != DriverMode::Push
    }
}

/// A source of raw sensor data. Implementations must be deterministic given
/// their fixtures, seed and the virtual timestamps they are asked about.
pub trait DeviceDriver: Send {
    fn name(&self) -> &str;

    fn kind(&self) -> DataKind;

    fn mode(&self) -> DriverMode;

    /// Event names a push driver can raise.
    fn events(&self) -> Vec<String> {
        Vec::new()
    }

    /// The next push event strictly after `after`, as (ts, event name).
    fn next_event(&mut self, _after: u64) -> Option<(u64, String)> {
        None
    }

    /// Payloads available at `ts`, for a pull or for the push event at `ts`.
    fn read(&mut self, ts: u64) -> Result<Vec<Payload>, DriverError>;

    fn descriptor(&self) -> DeviceDescriptor {
        DeviceDescriptor {
            id: self.name().to_string(),
            driver: self.name().to_string(),
            kind: self.kind(),
        }
    }
}

pub fn provider_emit(
    cfg: &ProviderConfig,
    driver: &mut dyn DeviceDriver,
    trigger: TriggerMeta,
    ctx: &OpContext<'_>,
) -> Result<Message, DriverError> {
    let op = if trigger.event.is_some() { "push" } else { "pull" };
    let mut device = driver.descriptor();
    device.id = cfg.device.clone();
    let mut items = Vec::new();
    for payload in driver.read(ctx.ts)? {
        let mut item = make_raw_item(cfg.datatype, payload, device.clone()).map_err(|_| DriverError::WrongKind {
            driver: driver.name().to_string(),
            expected: cfg.datatype,
            got: driver.kind(),
        })?;
        item.process.record(ctx.node, op, ctx.ts);
        items.push(item);
    }
    Ok(Message {
        items,
        trigger_meta: Some(trigger),
    })
}

/// First interval boundary strictly after `after`.
pub fn next_tick(interval_ms: u64, after: u64) -> u64 {
    let i = interval_ms.max(1);
    (after / i + 1) * i
}

/// Trigger message: one scalar item holding the virtual time.
pub fn inject_tick(ctx: &OpContext<'_>) -> Message {
    let mut process = ProvenanceTrail {
        device: DeviceDescriptor {
            id: ctx.node.to_string(),
            driver: "inject".to_string(),
            kind: DataKind::Scalar,
        },
        ops: Vec::new(),
    };
    process.record(ctx.node, "inject", ctx.ts);
    Message {
        items: vec![DataItem {
            datatype: DataKind::Scalar,
            contenttype: trigger_label(),
            inference: Vec::new(),
            data: Payload::scalar(ctx.ts as f64, "ms"),
            process,
        }],
        trigger_meta: Some(TriggerMeta {
            source: ctx.node.to_string(),
            ts: ctx.ts,
            event: None,
        }),
    }
}

pub fn trigger_label() -> ContentLabel {
    ContentLabel::new("trigger").expect("valid label")
}
