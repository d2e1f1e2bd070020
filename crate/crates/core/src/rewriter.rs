//! Manifest-to-manifest rewrites: rate limiting, time-of-day scheduling and
//! content-filter insertion.
//!
//! Every rewrite is first built as a [`RewritePlan`] and then applied with
//! [`apply_plan`], which revalidates the result, so a plan can be previewed
//! as a diff before it is committed.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analyzer::{infer_edge_types, ContentType};
use crate::manifest::{parse_windows, serialize_manifest, validate_manifest, Manifest, NodeSpec, ValidationReport};
use crate::operators::{InjectMode, OperatorConfig, OperatorKind};
use crate::runtime::DAY_MS;

/// Interval of the clock branch inserted by [`insert_time_schedule`].
pub const SCHEDULE_TICK_MS: u64 = 60_000;
/// One millisecond short of a tick, so the join never pairs a message with a
/// clock reading taken a full minute earlier.
pub const SCHEDULE_JOIN_WINDOW_MS: u64 = SCHEDULE_TICK_MS - 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewriteError {
    #[error("no node {0:?}")]
    UnknownNode(String),
    #[error("{0} is not an interval inject node")]
    NotAnInjectNode(String),
    #[error("{node}: {requested} ms is faster than the current {current} ms")]
    WouldIncreaseRate { node: String, current: u64, requested: u64 },
    #[error("{0} is not a network node")]
    NotANetworkNode(String),
    #[error("{0} has no incoming wire to splice")]
    NoIncomingWire(String),
    #[error("{0} has no outgoing wire to splice")]
    NoOutgoingWire(String),
    #[error("window [{start}, {end}) is not a time-of-day range")]
    BadWindow { start: u64, end: u64 },
    #[error("only spoof, noisify, select and retrieve can be inserted, not {0}")]
    UnsupportedFilterKind(OperatorKind),
    #[error("{node} outputs {psi:?}, which has no {datatype} for the filter")]
    TypeMismatchAtSplice {
        node: String,
        datatype: String,
        psi: Vec<String>,
    },
    #[error("no wire {from} -> {to}")]
    MissingWire { from: String, to: String },
    #[error("node id {0:?} already exists")]
    DuplicateNode(String),
    #[error("after the rewrite no {kind} reaches {node}")]
    FlowKilled { node: String, kind: String },
    #[error("rewritten manifest is invalid ({} error(s))", .0.errors.len())]
    Invalid(ValidationReport),
}

/// Where a subgraph goes in: the wires `from -> to[i]` are replaced by
/// `from -> entry`. The new nodes must wire themselves onward to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splice {
    pub from: String,
    pub to: Vec<String>,
    pub entry: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum RewriteStep {
    SetProperty { node: String, key: String, value: Value },
    InsertSubgraph { nodes: Vec<NodeSpec>, splice: Splice },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewritePlan {
    /// App instance id when applied through the hub; empty otherwise.
    #[serde(default)]
    pub app: String,
    pub steps: Vec<RewriteStep>,
    pub note: String,
}

impl RewritePlan {
    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }
}

fn node<'m>(m: &'m Manifest, id: &str) -> Result<&'m NodeSpec, RewriteError> {
    m.node(id).ok_or_else(|| RewriteError::UnknownNode(id.to_string()))
}

fn apply_step(m: &mut Manifest, step: &RewriteStep) -> Result<(), RewriteError> {
    match step {
        RewriteStep::SetProperty { node, key, value } => {
            let n = m.node_mut(node).ok_or_else(|| RewriteError::UnknownNode(node.clone()))?;
            n.properties.insert(key.clone(), value.clone());
        }
        RewriteStep::InsertSubgraph { nodes, splice } => {
            for n in nodes {
                if m.node(&n.id).is_some() {
                    return Err(RewriteError::DuplicateNode(n.id.clone()));
                }
            }
            if !nodes.iter().any(|n| n.id == splice.entry) {
                return Err(RewriteError::UnknownNode(splice.entry.clone()));
            }
            let from = m
                .node_mut(&splice.from)
                .ok_or_else(|| RewriteError::UnknownNode(splice.from.clone()))?;
            for to in &splice.to {
                let pos = from.wires.iter().position(|w| w == to).ok_or_else(|| RewriteError::MissingWire {
                    from: splice.from.clone(),
                    to: to.clone(),
                })?;
                from.wires.remove(pos);
            }
            from.wires.push(splice.entry.clone());
            m.graph.extend(nodes.iter().cloned());
        }
    }
    Ok(())
}

/// Network nodes that receive their datatype before but not after.
fn killed_flows(before: &Manifest, after: &Manifest) -> Option<(String, String)> {
    let (tb, ta) = (infer_edge_types(before), infer_edge_types(after));
    before.network_nodes().find_map(|n| {
        let dt = n.datatype()?;
        let had = tb.input(&n.id).iter().any(|t| t.kind == dt);
        let has = ta.input(&n.id).iter().any(|t| t.kind == dt);
        (had && !has).then(|| (n.id.clone(), dt.to_string()))
    })
}

/// Applies every step to a copy of `m`, then revalidates.
pub fn apply_plan(m: &Manifest, plan: &RewritePlan) -> Result<Manifest, RewriteError> {
    let mut out = m.clone();
    for step in &plan.steps {
        apply_step(&mut out, step)?;
    }
    let report = validate_manifest(&out);
    if !report.is_installable() {
        return Err(RewriteError::Invalid(report));
    }
    if let Some((node, kind)) = killed_flows(m, &out) {
        return Err(RewriteError::FlowKilled { node, kind });
    }
    Ok(out)
}

/// Unified diff of the canonical serializations.
pub fn canonical_diff(before: &Manifest, after: &Manifest) -> String {
    let (a, b) = (serialize_manifest(before), serialize_manifest(after));
    similar::TextDiff::from_lines(&a, &b)
        .unified_diff()
        .context_radius(3)
        .header("before", "after")
        .to_string()
}

pub fn plan_rate_limit(m: &Manifest, node_id: &str, new_interval_ms: u64) -> Result<RewritePlan, RewriteError> {
    let n = node(m, node_id)?;
    let current = match OperatorConfig::from_node(n) {
        Ok(OperatorConfig::Inject(c)) if c.mode == InjectMode::Interval => c.interval_ms.unwrap_or(1),
        _ => return Err(RewriteError::NotAnInjectNode(node_id.to_string())),
    };
    if new_interval_ms < current {
        return Err(RewriteError::WouldIncreaseRate {
            node: node_id.to_string(),
            current,
            requested: new_interval_ms,
        });
    }
    Ok(RewritePlan {
        app: String::new(),
        steps: vec![RewriteStep::SetProperty {
            node: node_id.to_string(),
            key: "interval_ms".into(),
            value: json!(new_interval_ms),
        }],
        note: format!("rate limit {node_id}: {current} ms -> {new_interval_ms} ms"),
    })
}

pub fn apply_rate_limit(m: &Manifest, node_id: &str, new_interval_ms: u64) -> Result<Manifest, RewriteError> {
    apply_plan(m, &plan_rate_limit(m, node_id, new_interval_ms)?)
}

/// Sorts and merges time-of-day windows. A window whose start is after its
/// end wraps past midnight and is split in two.
pub fn normalize_windows(windows: &[(u64, u64)]) -> Result<Vec<(u64, u64)>, RewriteError> {
    let mut parts = Vec::new();
    for &(start, end) in windows {
        if start == end || start >= DAY_MS || end > DAY_MS {
            return Err(RewriteError::BadWindow { start, end });
        }
        if start < end {
            parts.push((start, end));
        } else {
            parts.push((start, DAY_MS));
            if end > 0 {
                parts.push((0, end));
            }
        }
    }
    parts.sort_unstable();
    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (s, e) in parts {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    Ok(merged)
}

/// Puts a blocking join in front of `network_node` whose second input is a
/// clock branch that only fires outside `blocked_windows`.
pub fn plan_time_schedule(
    m: &Manifest,
    network_node: &str,
    blocked_windows: &[(u64, u64)],
) -> Result<RewritePlan, RewriteError> {
    let net = node(m, network_node)?;
    if !net.kind.is_network() {
        return Err(RewriteError::NotANetworkNode(network_node.to_string()));
    }
    let windows = normalize_windows(blocked_windows)?;
    if windows.is_empty() {
        return Ok(RewritePlan {
            app: String::new(),
            steps: Vec::new(),
            note: format!("schedule {network_node}: no blocked windows"),
        });
    }
    let upstream = m
        .graph
        .iter()
        .find(|n| n.wires.iter().any(|w| w == network_node))
        .ok_or_else(|| RewriteError::NoIncomingWire(network_node.to_string()))?;
    let mut ids: Vec<String> = Vec::new();
    for base in ["tick", "clock", "window", "allowed", "gate"] {
        let mut id = m.fresh_id(&format!("schedule-{base}"));
        let mut k = 2;
        while ids.contains(&id) {
            id = m.fresh_id(&format!("schedule-{base}-{k}"));
            k += 1;
        }
        ids.push(id);
    }
    let [tick, clock, window, allowed, gate] = [0, 1, 2, 3, 4].map(|i| ids[i].clone());
    let windows_json: Vec<Value> = windows.iter().map(|(s, e)| json!([s, e])).collect();
    let nodes = vec![
        NodeSpec::new(&gate, OperatorKind::Join)
            .prop("mode", "blocking")
            .prop("window_ms", SCHEDULE_JOIN_WINDOW_MS)
            .prop("inputs_expected", 2)
            .wire(network_node),
        NodeSpec::new(&tick, OperatorKind::Inject)
            .prop("mode", "interval")
            .prop("interval_ms", SCHEDULE_TICK_MS)
            .wire(&clock),
        NodeSpec::new(&clock, OperatorKind::Pull)
            .prop("device", "clock")
            .prop("datatype", "scalar")
            .wire(&window),
        NodeSpec::new(&window, OperatorKind::Classify)
            .prop("datatype", "scalar")
            .prop("target", "time")
            .prop("provider", "time-window")
            .prop("blocked_windows", Value::Array(windows_json))
            .wire(&allowed),
        NodeSpec::new(&allowed, OperatorKind::Retrieve)
            .prop("datatype", "scalar")
            .prop("target", "time")
            .prop("category", "allowed")
            .wire(&gate),
    ];
    debug_assert!(parse_windows(&nodes[3].properties["blocked_windows"]).is_ok());
    let spans: Vec<String> = windows.iter().map(|(s, e)| format!("{}-{}", hhmm(*s), hhmm(*e))).collect();
    Ok(RewritePlan {
        app: String::new(),
        steps: vec![RewriteStep::InsertSubgraph {
            nodes,
            splice: Splice {
                from: upstream.id.clone(),
                to: vec![network_node.to_string()],
                entry: gate,
            },
        }],
        note: format!("schedule {network_node}: blocked {}", spans.join(", ")),
    })
}

fn hhmm(ms: u64) -> String {
    format!("{:02}:{:02}", ms / 3_600_000, ms % 3_600_000 / 60_000)
}

pub fn insert_time_schedule(
    m: &Manifest,
    network_node: &str,
    blocked_windows: &[(u64, u64)],
) -> Result<Manifest, RewriteError> {
    apply_plan(m, &plan_time_schedule(m, network_node, blocked_windows)?)
}

/// Splices `filter` between `after` and all of its successors. The filter's
/// datatype must be one of the kinds leaving `after`. An empty filter id
/// gets a fresh one.
pub fn plan_content_filter(m: &Manifest, after: &str, mut filter: NodeSpec) -> Result<RewritePlan, RewriteError> {
    let n = node(m, after)?;
    if !matches!(
        filter.kind,
        OperatorKind::Spoof | OperatorKind::Noisify | OperatorKind::Select | OperatorKind::Retrieve
    ) {
        return Err(RewriteError::UnsupportedFilterKind(filter.kind));
    }
    if n.wires.is_empty() {
        return Err(RewriteError::NoOutgoingWire(after.to_string()));
    }
    let types = infer_edge_types(m);
    let psi = types.output(after);
    let dt = filter.datatype();
    if !dt.is_some_and(|dt| psi.iter().any(|t| t.kind == dt)) {
        return Err(RewriteError::TypeMismatchAtSplice {
            node: after.to_string(),
            datatype: dt.map(|d| d.to_string()).unwrap_or_else(|| "(none)".into()),
            psi: psi.iter().map(ContentType::display).collect(),
        });
    }
    if filter.id.is_empty() {
        let base = match filter.target() {
            Some(t) => format!("{}-{}", filter.kind.as_str(), t.label()),
            None => filter.kind.as_str().to_string(),
        };
        filter.id = m.fresh_id(&base);
    }
    filter.wires = n.wires.clone();
    let note = format!("insert {} {} after {after}", filter.kind.as_str(), filter.id);
    Ok(RewritePlan {
        app: String::new(),
        steps: vec![RewriteStep::InsertSubgraph {
            splice: Splice {
                from: after.to_string(),
                to: n.wires.clone(),
                entry: filter.id.clone(),
            },
            nodes: vec![filter],
        }],
        note,
    })
}

pub fn insert_content_filter(m: &Manifest, after: &str, filter: NodeSpec) -> Result<Manifest, RewriteError> {
    apply_plan(m, &plan_content_filter(m, after, filter)?)
}
