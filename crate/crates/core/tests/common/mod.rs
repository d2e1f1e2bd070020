//! Shared helpers for the integration tests: fixture access, a seeded
//! random manifest generator and trace checks.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use privhub::analyzer::{analyze, ContentType};
use privhub::fixtures;
use privhub::manifest::{Manifest, Meta, NodeSpec, Security};
use privhub::operators::{OperatorKind, RecordingTransport};
use privhub::runtime::{DriverCatalog, ExecutionTrace, Runtime};

pub const SINK: &str = "http://sink.test";

pub fn fixture(name: &str) -> Manifest {
    fixtures::manifest(name).unwrap()
}

/// A fixture runtime with a fresh recording transport. The catalog and
/// annotator are loaded once per process.
pub fn runtime() -> (Runtime, Arc<RecordingTransport>) {
    let net = Arc::new(RecordingTransport::new());
    let rt = Runtime::new(shared().0.clone(), shared().1.clone(), net.clone());
    (rt, net)
}

/// The fixture provider registry: reference providers plus the annotator.
pub fn registry() -> Arc<privhub::operators::ProviderRegistry> {
    shared().1.clone()
}

fn shared() -> &'static (Arc<DriverCatalog>, Arc<privhub::operators::ProviderRegistry>) {
    static CELL: std::sync::OnceLock<(Arc<DriverCatalog>, Arc<privhub::operators::ProviderRegistry>)> =
        std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let cat = fixtures::catalog();
        let reg = cat.registry().unwrap();
        (Arc::new(cat), Arc::new(reg))
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum K {
    Video,
    Image,
    Audio,
    Tabular,
    Scalar,
}

impl K {
    fn as_str(self) -> &'static str {
        match self {
            K::Video => "video",
            K::Image => "image",
            K::Audio => "audio",
            K::Tabular => "tabular",
            K::Scalar => "scalar",
        }
    }
}

struct Source {
    device: &'static str,
    kind: K,
    event: Option<&'static str>,
}

const SOURCES: &[Source] = &[
    Source { device: "doorbell-camera", kind: K::Image, event: Some("motion") },
    Source { device: "office-camera", kind: K::Image, event: None },
    Source { device: "nursery-mic", kind: K::Audio, event: Some("sound") },
    Source { device: "voice-mic", kind: K::Audio, event: Some("trigger phrase") },
    Source { device: "doorbell-video", kind: K::Video, event: Some("motion") },
    Source { device: "tv-log", kind: K::Tabular, event: None },
    Source { device: "humidity", kind: K::Scalar, event: None },
    Source { device: "clock", kind: K::Scalar, event: None },
];

/// Inference steps a provider can answer, by input kind: (kind, props).
fn inference_options(k: K) -> Vec<(OperatorKind, Value)> {
    match k {
        K::Image => vec![
            (OperatorKind::Detect, json!({"datatype": "image", "target": "face"})),
            (OperatorKind::Detect, json!({"datatype": "image", "target": "person"})),
            (OperatorKind::Extract, json!({"datatype": "image", "target": "pose"})),
            (OperatorKind::Extract, json!({"datatype": "image", "target": "brightness"})),
        ],
        K::Video => vec![(OperatorKind::Extract, json!({"datatype": "video", "target": "brightness"}))],
        K::Audio => vec![
            (OperatorKind::Detect, json!({"datatype": "audio", "target": "crying"})),
            (OperatorKind::Detect, json!({"datatype": "audio", "target": "speech", "energy_threshold": 300.0})),
        ],
        K::Tabular => vec![(
            OperatorKind::Detect,
            json!({"datatype": "tabular", "target": "news", "field": "category", "value": "news"}),
        )],
        K::Scalar => vec![
            (OperatorKind::Classify, json!({"datatype": "scalar", "target": "wet", "threshold": 55.0})),
            (
                OperatorKind::Classify,
                json!({"datatype": "scalar", "target": "time-window", "blocked_windows": [[61_200_000u64, 68_400_000u64]]}),
            ),
        ],
    }
}

const ALL_KINDS: [K; 5] = [K::Video, K::Image, K::Audio, K::Tabular, K::Scalar];

/// Per-node generation state: the kind most items have and the targets
/// annotated upstream.
#[derive(Clone)]
struct Slot {
    id: String,
    kind: K,
    targets: Vec<String>,
}

struct Gen {
    rng: ChaCha8Rng,
    nodes: Vec<NodeSpec>,
    open: Vec<Slot>,
}

impl Gen {
    fn id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", self.nodes.len())
    }

    fn push(&mut self, node: NodeSpec) {
        self.nodes.push(node);
    }

    fn wire(&mut self, from: &str, to: &str) {
        let n = self.nodes.iter_mut().find(|n| n.id == from).unwrap();
        n.wires.push(to.to_string());
    }

    /// Mostly the current kind, sometimes any kind the operator accepts.
    fn datatype(&mut self, op: OperatorKind, k: K) -> K {
        let allowed: Vec<K> = ALL_KINDS
            .into_iter()
            .filter(|x| privhub::manifest::SchemaSet::builtin().allowed_datatypes(op).iter().any(|d| d.to_string() == x.as_str()))
            .collect();
        if allowed.contains(&k) && self.rng.random_bool(0.8) {
            k
        } else {
            *allowed.choose(&mut self.rng).unwrap()
        }
    }

    fn target(&mut self, slot: &Slot) -> String {
        if !slot.targets.is_empty() && self.rng.random_bool(0.85) {
            slot.targets.choose(&mut self.rng).unwrap().clone()
        } else {
            ["face", "person", "pose", "crying", "news", "wet"].choose(&mut self.rng).unwrap().to_string()
        }
    }

    fn source(&mut self) -> Slot {
        let s = SOURCES.choose(&mut self.rng).unwrap();
        let id = self.id("src");
        let mut node = NodeSpec::new(&id, if s.event.is_some() { OperatorKind::Push } else { OperatorKind::Pull })
            .prop("device", s.device)
            .prop("datatype", s.kind.as_str());
        if let Some(e) = s.event {
            node = node.prop("event", e);
            self.push(node);
        } else {
            let tick = self.id("tick");
            let minutes = *[15u64, 30, 45, 60].choose(&mut self.rng).unwrap();
            self.push(
                NodeSpec::new(&tick, OperatorKind::Inject)
                    .prop("mode", "interval")
                    .prop("interval_ms", minutes * 60_000)
                    .wire(&id),
            );
            self.push(node);
        }
        Slot { id, kind: s.kind, targets: Vec::new() }
    }

    /// Appends one operator after `slot`.
    fn step(&mut self, slot: Slot) -> Slot {
        let choice = self.rng.random_range(0..10);
        let (kind, props, next_kind, new_target) = match choice {
            0..=2 => {
                let opts = inference_options(slot.kind);
                let (k, p) = opts.choose(&mut self.rng).unwrap().clone();
                let t = p["target"].as_str().unwrap().to_string();
                (k, p, slot.kind, Some(t))
            }
            3 => {
                let dt = self.datatype(OperatorKind::Select, slot.kind);
                let t = self.target(&slot);
                (OperatorKind::Select, json!({"datatype": dt.as_str(), "target": t}), slot.kind, None)
            }
            4 => {
                let dt = self.datatype(OperatorKind::Retrieve, slot.kind);
                let t = self.target(&slot);
                let mut p = json!({"datatype": dt.as_str(), "target": t});
                if self.rng.random_bool(0.3) {
                    p["absent"] = json!(true);
                }
                let nk = if dt == slot.kind { K::Tabular } else { slot.kind };
                (OperatorKind::Retrieve, p, nk, None)
            }
            5 => {
                let dt = self.datatype(OperatorKind::Aggregate, slot.kind);
                let p = if dt == K::Tabular {
                    json!({"datatype": "tabular", "function": "sum", "group_by": "category", "value_field": "duration"})
                } else {
                    json!({"datatype": dt.as_str(), "function": *["sum", "count", "average"].choose(&mut self.rng).unwrap()})
                };
                (OperatorKind::Aggregate, p, slot.kind, None)
            }
            6 => {
                let dt = self.datatype(OperatorKind::Noisify, slot.kind);
                let seed = self.rng.random_range(0..1000u64);
                (
                    OperatorKind::Noisify,
                    json!({"datatype": dt.as_str(), "magnitude_percent": 10.0, "seed": seed}),
                    slot.kind,
                    None,
                )
            }
            7 => {
                let dt = self.datatype(OperatorKind::Spoof, slot.kind);
                let t = self.target(&slot);
                (OperatorKind::Spoof, json!({"datatype": dt.as_str(), "target": t}), slot.kind, None)
            }
            _ => (OperatorKind::Debug, json!({}), slot.kind, None),
        };
        let id = self.id(kind.as_str());
        let mut node = NodeSpec::new(&id, kind);
        node.properties = props.as_object().unwrap().clone();
        self.push(node);
        self.wire(&slot.id, &id);
        let mut targets = slot.targets.clone();
        targets.extend(new_target);
        Slot { id, kind: next_kind, targets }
    }

    fn join(&mut self, a: Slot, mut b: Slot) -> Slot {
        if a.id == b.id {
            b = self.step(b);
        }
        let id = self.id("join");
        let blocking = self.rng.random_bool(0.5);
        let window = *[0u64, 1_000, 60_000, 600_000].choose(&mut self.rng).unwrap();
        self.push(
            NodeSpec::new(&id, OperatorKind::Join)
                .prop("mode", if blocking { "blocking" } else { "nonblocking" })
                .prop("inputs_expected", 2)
                .prop("window_ms", window),
        );
        self.wire(&a.id, &id);
        self.wire(&b.id, &id);
        let mut targets = a.targets.clone();
        targets.extend(b.targets);
        Slot { id, kind: a.kind, targets }
    }

    fn sink(&mut self, slot: &Slot) {
        let proto = *[OperatorKind::Post, OperatorKind::Post, OperatorKind::Publish, OperatorKind::Stream]
            .choose(&mut self.rng)
            .unwrap();
        let dt = self.datatype(proto, slot.kind);
        let id = self.id(proto.as_str());
        let mut node = NodeSpec::new(&id, proto).prop("datatype", dt.as_str());
        node = match proto {
            OperatorKind::Post => node.prop("destination", format!("{SINK}/in")),
            OperatorKind::Publish => node.prop("destination", "mqtt://broker.test:1883").prop("topic", "home/x"),
            _ => node.prop("destination", "rtsp://cam.test/live"),
        };
        self.push(node);
        self.wire(&slot.id, &id);
    }
}

/// A valid manifest of at most `max_nodes` nodes built from `seed`.
pub fn random_manifest(seed: u64, max_nodes: usize) -> Manifest {
    assert!(max_nodes >= 6);
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
        open: Vec::new(),
    };
    let first = g.source();
    g.open.push(first);
    // Leave room for a join, a second source and one sink per open branch.
    while g.nodes.len() + g.open.len() + 4 <= max_nodes {
        match g.rng.random_range(0..10) {
            0 if g.open.len() < 2 => {
                // fan-out
                let s = g.open.choose(&mut g.rng).unwrap().clone();
                g.open.push(s);
            }
            1 if g.open.len() >= 2 => {
                let a = g.open.remove(0);
                let b = g.open.remove(0);
                let j = g.join(a, b);
                g.open.push(j);
            }
            2 if g.open.len() < 2 && g.nodes.len() + 5 <= max_nodes => {
                let s = g.source();
                g.open.push(s);
            }
            _ => {
                let i = g.rng.random_range(0..g.open.len());
                let s = g.open.remove(i);
                let next = g.step(s);
                g.open.insert(i, next);
            }
        }
        if g.rng.random_bool(0.15) {
            break;
        }
    }
    let open = std::mem::take(&mut g.open);
    for s in &open {
        g.sink(s);
    }
    let mut allowed: Vec<String> = vec![SINK.into(), "mqtt://broker.test:1883".into(), "rtsp://cam.test".into()];
    allowed.sort();
    Manifest {
        meta: Meta {
            name: format!("Random{seed}"),
            version: "1.0.0".into(),
            author: "tests".into(),
            purpose: "random".into(),
            min_runtime_version: "0.1.0".into(),
        },
        security: Security {
            allowed_endpoints: allowed,
            require_tls: false,
        },
        graph: g.nodes,
    }
}

/// Observed (content, kind) pairs on an edge that the static ψ of that
/// edge does not contain.
pub fn uncontained(m: &Manifest, trace: &ExecutionTrace) -> Vec<(String, String, ContentType)> {
    let a = analyze(m);
    let mut bad = Vec::new();
    for e in &trace.edges {
        let psi = a.types.edges.iter().find(|x| x.from == e.from && x.to == e.to);
        for item in &e.items {
            if !psi.is_some_and(|p| p.psi.contains(item)) {
                bad.push((e.from.clone(), e.to.clone(), item.clone()));
            }
        }
    }
    bad
}

/// Installs and runs `m` for `ms` simulated milliseconds.
pub fn run(m: &Manifest, ms: u64) -> (ExecutionTrace, Runtime, Arc<RecordingTransport>) {
    let (mut rt, net) = runtime();
    rt.install_app(m.clone(), BTreeMap::new()).unwrap();
    let trace = rt.run_until(ms);
    (trace, rt, net)
}

/// One join scenario: arrivals as (port, timestamp), in delivery order.
#[derive(Debug, Clone)]
pub struct JoinCase {
    pub mode: privhub::operators::JoinMode,
    pub window_ms: u64,
    pub arrivals: Vec<(usize, u64)>,
}

/// Every sequence of 1 to 3 arrivals on a 2-port join, with gaps from
/// {0, 30, 60, 120} ms, for both modes and windows {50, 100}.
pub fn join_cases() -> Vec<JoinCase> {
    use privhub::operators::JoinMode;
    const GAPS: [u64; 4] = [0, 30, 60, 120];
    let mut out = Vec::new();
    for n in 1..=3usize {
        for ports in 0..(1usize << n) {
            for g in 0..GAPS.len().pow(n as u32 - 1) {
                let mut t = 0;
                let mut arrivals = Vec::new();
                let mut code = g;
                for i in 0..n {
                    if i > 0 {
                        t += GAPS[code % GAPS.len()];
                        code /= GAPS.len();
                    }
                    arrivals.push(((ports >> i) & 1, t));
                }
                for mode in [JoinMode::Blocking, JoinMode::NonBlocking] {
                    for window_ms in [50, 100] {
                        out.push(JoinCase { mode, window_ms, arrivals: arrivals.clone() });
                    }
                }
            }
        }
    }
    out
}

/// Expected output after each arrival, as the arrival indices carried by
/// the emitted message. Blocking: at arrival i, take for every port its
/// latest arrival since the previous emission; emit in port order iff all
/// ports have one and each is at most `window_ms` older than arrival i.
pub fn join_oracle(case: &JoinCase) -> Vec<Option<Vec<usize>>> {
    use privhub::operators::JoinMode;
    let mut last_emit: Option<usize> = None;
    let mut out = Vec::new();
    for (i, &(_, t)) in case.arrivals.iter().enumerate() {
        if case.mode == JoinMode::NonBlocking {
            out.push(Some(vec![i]));
            continue;
        }
        let latest: Vec<Option<usize>> = (0..2)
            .map(|p| {
                (0..=i)
                    .rev()
                    .take_while(|j| last_emit.is_none_or(|e| *j > e))
                    .find(|j| case.arrivals[*j].0 == p)
            })
            .collect();
        let fires = latest.iter().all(|j| j.is_some_and(|j| t - case.arrivals[j].1 <= case.window_ms));
        if fires {
            last_emit = Some(i);
            out.push(Some(latest.into_iter().flatten().collect()));
        } else {
            out.push(None);
        }
    }
    out
}

/// Runs the join operator over a case, tagging each message with its index.
pub fn join_actual(case: &JoinCase) -> Vec<Option<Vec<usize>>> {
    use privhub::data::{make_raw_item, DataKind, DeviceDescriptor, Message, Payload};
    use privhub::operators::{join_step, JoinConfig, JoinState, OpContext};
    let cfg = JoinConfig { mode: case.mode, window_ms: case.window_ms, inputs_expected: 2 };
    let mut state = JoinState::new(2);
    let dev = DeviceDescriptor { id: "d".into(), driver: "test".into(), kind: DataKind::Scalar };
    case.arrivals
        .iter()
        .enumerate()
        .map(|(i, &(port, ts))| {
            let m = Message::new(vec![make_raw_item(DataKind::Scalar, Payload::scalar(i as f64, ""), dev.clone()).unwrap()]);
            join_step(&cfg, &mut state, port, m, &OpContext { node: "j", ts })
                .map(|m| m.items.iter().map(|it| it.data.scalar_value().unwrap() as usize).collect())
        })
        .collect()
}

/// Lets images and audio out, holds back tabular and scalar data.
pub struct MediaOnly;

impl privhub::operators::EgressGuard for MediaOnly {
    fn allows(&self, q: &privhub::operators::EgressQuery<'_>) -> bool {
        matches!(q.kind, privhub::data::DataKind::Image | privhub::data::DataKind::Audio | privhub::data::DataKind::Video)
    }
}

/// Totals as (sent items, sent bytes, blocked items, records).
pub type Totals = (u64, u64, u64, u64);

/// Runs two random apps (one fully open, one partly guarded) against a
/// file-backed ledger and returns the totals from the ledger query, from
/// the trace and from a plain line-by-line parse of the file.
pub fn ledger_totals(seed: u64, ms: u64) -> (Totals, Totals, Totals) {
    use privhub::runtime::{EgressFilter, EgressLedger};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("egress.ndjson");
    let net = Arc::new(RecordingTransport::new());
    let mut rt = Runtime::new(shared().0.clone(), shared().1.clone(), net)
        .with_ledger(EgressLedger::open(&path).unwrap());
    rt.install_app(random_manifest(seed, 10), BTreeMap::new()).unwrap();
    let guarded = rt.install_app(random_manifest(seed ^ 0x9e37_79b9, 10), BTreeMap::new()).unwrap();
    rt.set_guard(&guarded, Arc::new(MediaOnly)).unwrap();
    let trace = rt.run_until(ms);

    let rows = rt.ledger().query(&EgressFilter::default());
    let query = rows.iter().fold((0, 0, 0, 0), |t, r| (t.0 + r.items, t.1 + r.bytes, t.2 + r.blocked_items, t.3 + r.records));
    let from_trace = (
        trace.sent_items() as u64,
        trace.sent_bytes() as u64,
        trace.blocked_items() as u64,
        trace.egress.iter().map(|e| e.outcome.records.len() as u64).sum(),
    );
    let mut file = (0, 0, 0, 0);
    for line in std::fs::read_to_string(&path).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let items = v["items"].as_u64().unwrap();
        if v["blocked"].as_bool().unwrap() {
            file.2 += items;
        } else {
            file.0 += items;
            file.1 += v["bytes"].as_u64().unwrap();
        }
        file.3 += 1;
    }
    (query, from_trace, file)
}
