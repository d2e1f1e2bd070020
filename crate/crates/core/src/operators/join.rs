//! Join: the only stateful operator.
//!
//! Nonblocking mode forwards every arrival (OR). Blocking mode keeps the
//! newest message per port and emits the port-ordered concatenation once
//! every port holds a message no older than `window_ms` (AND).

use super::config::{JoinConfig, JoinMode};
use super::OpContext;
use crate::data::Message;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JoinState {
    slots: Vec<Option<(u64, Message)>>,
}

impl JoinState {
    pub fn new(ports: usize) -> Self {
        JoinState {
            slots: vec![None; ports],
        }
    }

    /// Ports currently holding a buffered message.
    pub fn filled(&self) -> Vec<usize> {
        (0..self.slots.len()).filter(|p| self.slots[*p].is_some()).collect()
    }
}

pub fn join_step(
    cfg: &JoinConfig,
    state: &mut JoinState,
    port: usize,
    m: Message,
    ctx: &OpContext<'_>,
) -> Option<Message> {
    let t = ctx.ts;
    let mut out = match cfg.mode {
        JoinMode::NonBlocking => m,
        JoinMode::Blocking => {
            if state.slots.len() < cfg.inputs_expected {
                state.slots.resize(cfg.inputs_expected, None);
            }
            if port >= state.slots.len() {
                return None;
            }
            state.slots[port] = Some((t, m));
            for slot in &mut state.slots {
                if slot.as_ref().is_some_and(|(ts, _)| t.saturating_sub(*ts) > cfg.window_ms) {
                    *slot = None;
                }
            }
            if state.slots.iter().any(Option::is_none) {
                return None;
            }
            let mut merged = Message::empty();
            for (_, part) in state.slots.iter_mut().filter_map(Option::take) {
                merged.items.extend(part.items);
                if merged.trigger_meta.is_none() {
                    merged.trigger_meta = part.trigger_meta;
                }
            }
            merged
        }
    };
    for item in &mut out.items {
        item.process.record(ctx.node, "join", t);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_raw_item, DataKind, DeviceDescriptor, Payload};

    fn msg(v: f64) -> Message {
        let dev = DeviceDescriptor { id: "d".into(), driver: "t".into(), kind: DataKind::Scalar };
        Message::new(vec![make_raw_item(DataKind::Scalar, Payload::scalar(v, ""), dev).unwrap()])
    }

    fn blocking(window_ms: u64) -> JoinConfig {
        JoinConfig { mode: JoinMode::Blocking, window_ms, inputs_expected: 2 }
    }

    fn at(ts: u64) -> OpContext<'static> {
        OpContext { node: "j", ts }
    }

    #[test]
    fn within_window() {
        let cfg = blocking(100);
        let mut s = JoinState::new(2);
        assert!(join_step(&cfg, &mut s, 0, msg(0.0), &at(0)).is_none());
        let out = join_step(&cfg, &mut s, 1, msg(1.0), &at(50)).unwrap();
        let values: Vec<_> = out.items.iter().map(|i| i.data.scalar_value().unwrap()).collect();
        assert_eq!(values, [0.0, 1.0]);
        assert!(s.filled().is_empty());
    }

    #[test]
    fn outside_window_evicts() {
        let cfg = blocking(100);
        let mut s = JoinState::new(2);
        join_step(&cfg, &mut s, 0, msg(0.0), &at(0));
        assert!(join_step(&cfg, &mut s, 1, msg(1.0), &at(500)).is_none());
        assert_eq!(s.filled(), [1]);
    }

    #[test]
    fn port_order_not_arrival_order() {
        let cfg = blocking(100);
        let mut s = JoinState::new(2);
        join_step(&cfg, &mut s, 1, msg(1.0), &at(0));
        let out = join_step(&cfg, &mut s, 0, msg(0.0), &at(10)).unwrap();
        assert_eq!(out.items[0].data.scalar_value(), Some(0.0));
    }

    #[test]
    fn nonblocking_forwards() {
        let cfg = JoinConfig { mode: JoinMode::NonBlocking, window_ms: 0, inputs_expected: 2 };
        let mut s = JoinState::new(2);
        assert_eq!(join_step(&cfg, &mut s, 1, msg(3.0), &at(0)).unwrap().len(), 1);
        assert!(s.filled().is_empty());
    }
}
