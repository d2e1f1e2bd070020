//! The hub program executor.
//!
//! Every node has a FIFO mailbox. A single scheduler pops events in
//! (timestamp, app, node, sequence) order, so a simulated run is a pure
//! function of its inputs. Processing is instantaneous in virtual time: a
//! message delivered at `t` is handled at `t` and its outputs are delivered
//! at `t` too.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::clock::VirtualClock;
use super::drivers::DriverCatalog;
use super::ledger::{EgressLedger, LedgerError};
use crate::analyzer::ContentType;
use crate::data::{Message, TriggerMeta};
use crate::diag::{Diagnostic, DiagnosticLog, Level};
use crate::manifest::{validate_manifest, Graph, Manifest, ValidationReport};
use crate::operators::{
    debug_tap, filter_apply, inference_apply, inject_tick, join_step, network_egress, next_tick,
    provider_emit, AllowAll, ConfigError, DeviceDriver, EgressEnv, EgressGuard, EgressOutcome,
    FilterConfig, InferenceConfig, InferenceError, InferenceProvider, InjectConfig, InjectMode,
    InterceptRule, JoinConfig, JoinState, NetworkConfig, OpContext, OperatorConfig,
    ProviderConfig, ProviderRegistry, RetryPolicy, Transport,
};

pub const DEFAULT_MAILBOX: usize = 64;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("manifest has {} validation error(s)", .0.errors.len())]
    Invalid(ValidationReport),
    #[error("node {node}: no driver named {driver:?}")]
    MissingBinding { node: String, driver: String },
    #[error("node {node}: driver {driver} is incompatible: {reason}")]
    IncompatibleBinding {
        node: String,
        driver: String,
        reason: String,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("node {node}: {source}")]
    Inference { node: String, source: InferenceError },
    #[error("no app {0:?}")]
    UnknownApp(String),
    #[error("app {app} has no node {node:?}")]
    UnknownNode { app: String, node: String },
    #[error("node {0} is not a manual inject node")]
    NotManualInject(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// One message crossing one edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub ts: u64,
    pub app: String,
    pub from: String,
    pub to: String,
    /// (content, kind) of each item, in message order.
    pub items: Vec<ContentType>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EgressEvent {
    pub ts: u64,
    pub app: String,
    pub node: String,
    pub outcome: EgressOutcome,
}

/// A provider node reading its driver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmitEvent {
    pub ts: u64,
    pub app: String,
    pub node: String,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExecutionTrace {
    pub from: u64,
    pub to: u64,
    pub edges: Vec<TraceEntry>,
    pub emits: Vec<EmitEvent>,
    pub egress: Vec<EgressEvent>,
}

impl ExecutionTrace {
    pub fn emits_of(&self, app: &str) -> usize {
        self.emits.iter().filter(|e| e.app == app).count()
    }

    pub fn egress_of<'a>(&'a self, app: &'a str) -> impl Iterator<Item = &'a EgressEvent> + 'a {
        self.egress.iter().filter(move |e| e.app == app)
    }

    pub fn sent_items(&self) -> usize {
        self.egress.iter().map(|e| e.outcome.sent_items).sum()
    }

    pub fn sent_bytes(&self) -> usize {
        self.egress.iter().map(|e| e.outcome.sent_bytes).sum()
    }

    pub fn blocked_items(&self) -> usize {
        self.egress.iter().map(|e| e.outcome.blocked_items).sum()
    }

    pub fn append(&mut self, other: ExecutionTrace) {
        if self.edges.is_empty() && self.emits.is_empty() && self.egress.is_empty() && self.from == self.to {
            self.from = other.from;
        }
        self.to = other.to;
        self.edges.extend(other.edges);
        self.emits.extend(other.emits);
        self.egress.extend(other.egress);
    }
}

enum Compiled {
    Push(ProviderConfig),
    Pull(ProviderConfig),
    Inference(InferenceConfig, Arc<dyn InferenceProvider>),
    Filter(FilterConfig),
    Network(NetworkConfig),
    Inject(InjectConfig),
    Join(JoinConfig),
    Debug,
}

struct AppInstance {
    manifest: Manifest,
    generation: u64,
    bindings: BTreeMap<String, String>,
    nodes: BTreeMap<String, Compiled>,
    outputs: BTreeMap<String, Vec<(String, usize)>>,
    drivers: BTreeMap<String, (String, Box<dyn DeviceDriver>)>,
    joins: BTreeMap<String, JoinState>,
    mailboxes: BTreeMap<String, VecDeque<(usize, Message)>>,
    guard: Arc<dyn EgressGuard>,
    intercepts: Vec<InterceptRule>,
    paused: bool,
    installed_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Tick,
    Manual,
    Push(String),
    Deliver,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    ts: u64,
    app: String,
    node: String,
    seq: u64,
    generation: u64,
    kind: EventKind,
}

/// Summary of an installed app.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppStatus {
    pub id: String,
    pub name: String,
    pub installed_at: u64,
    pub paused: bool,
    pub bindings: BTreeMap<String, String>,
}

pub struct Runtime {
    clock: VirtualClock,
    catalog: Arc<DriverCatalog>,
    registry: Arc<ProviderRegistry>,
    transport: Arc<dyn Transport>,
    ledger: EgressLedger,
    diagnostics: DiagnosticLog,
    apps: BTreeMap<String, AppInstance>,
    counters: BTreeMap<String, u64>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    mailbox_capacity: usize,
    retry: RetryPolicy,
    trace: ExecutionTrace,
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let s = s.trim_matches('-').to_string();
    if s.is_empty() {
        "app".to_string()
    } else {
        s
    }
}

impl Runtime {
    /// Simulated clock at 0, in-memory ledger.
    pub fn new(catalog: Arc<DriverCatalog>, registry: Arc<ProviderRegistry>, transport: Arc<dyn Transport>) -> Self {
        Runtime {
            clock: VirtualClock::simulated(0),
            catalog,
            registry,
            transport,
            ledger: EgressLedger::in_memory(),
            diagnostics: DiagnosticLog::new(),
            apps: BTreeMap::new(),
            counters: BTreeMap::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            mailbox_capacity: DEFAULT_MAILBOX,
            retry: RetryPolicy::default(),
            trace: ExecutionTrace::default(),
        }
    }

    pub fn with_clock(mut self, clock: VirtualClock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_ledger(mut self, ledger: EgressLedger) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn with_diagnostics(mut self, log: DiagnosticLog) -> Self {
        self.diagnostics = log;
        self
    }

    pub fn with_mailbox_capacity(mut self, n: usize) -> Self {
        self.mailbox_capacity = n.max(1);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    pub fn catalog(&self) -> &DriverCatalog {
        &self.catalog
    }

    pub fn ledger(&self) -> &EgressLedger {
        &self.ledger
    }

    pub fn diagnostics(&self) -> &DiagnosticLog {
        &self.diagnostics
    }

    pub fn app_ids(&self) -> Vec<String> {
        self.apps.keys().cloned().collect()
    }

    pub fn manifest(&self, app: &str) -> Option<&Manifest> {
        self.apps.get(app).map(|a| &a.manifest)
    }

    pub fn status(&self, app: &str) -> Option<AppStatus> {
        self.apps.get(app).map(|a| AppStatus {
            id: app.to_string(),
            name: a.manifest.meta.name.clone(),
            installed_at: a.installed_at,
            paused: a.paused,
            bindings: a.bindings.clone(),
        })
    }

    fn diag(&mut self, app: &str, ts: u64, node: &str, level: Level, code: &str, msg: String) {
        self.diagnostics.extend(app, [Diagnostic::new(ts, node, level, code, msg)]);
    }

    fn schedule(&mut self, ts: u64, app: &str, node: &str, generation: u64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(Event {
            ts,
            app: app.to_string(),
            node: node.to_string(),
            seq: self.seq,
            generation,
            kind,
        }));
    }

    /// Validates, binds and starts an app. Provider nodes without an entry
    /// in `bindings` bind to the driver named by their `device` property.
    pub fn install_app(&mut self, manifest: Manifest, bindings: BTreeMap<String, String>) -> Result<String, RuntimeError> {
        let inst = self.compile(manifest, bindings, None)?;
        let base = slug(&inst.manifest.meta.name);
        let n = self.counters.entry(base.clone()).or_insert(0);
        *n += 1;
        let id = format!("{base}-{n}");
        self.apps.insert(id.clone(), inst);
        self.start(&id);
        Ok(id)
    }

    pub fn uninstall(&mut self, app: &str) -> Result<(), RuntimeError> {
        self.apps.remove(app).map(|_| ()).ok_or_else(|| RuntimeError::UnknownApp(app.into()))
    }

    /// Swaps in a new manifest between deliveries. Drivers and join buffers
    /// of nodes whose configuration is unchanged carry over; pending ticks
    /// and driver events are rescheduled from the current time.
    pub fn replace_manifest(&mut self, app: &str, manifest: Manifest) -> Result<(), RuntimeError> {
        let mut old = self.apps.remove(app).ok_or_else(|| RuntimeError::UnknownApp(app.into()))?;
        let bindings = old.bindings.clone();
        match self.compile(manifest, bindings, Some(&mut old)) {
            Ok(mut inst) => {
                inst.generation = old.generation + 1;
                inst.installed_at = old.installed_at;
                inst.guard = old.guard.clone();
                inst.intercepts = std::mem::take(&mut old.intercepts);
                inst.paused = old.paused;
                for (id, state) in std::mem::take(&mut old.joins) {
                    let same = matches!(
                        (old.nodes.get(&id), inst.nodes.get(&id)),
                        (Some(Compiled::Join(a)), Some(Compiled::Join(b))) if a == b
                    );
                    if same {
                        inst.joins.insert(id, state);
                    }
                }
                self.apps.insert(app.to_string(), inst);
                self.start(app);
                Ok(())
            }
            Err(e) => {
                self.apps.insert(app.to_string(), old);
                Err(e)
            }
        }
    }

    fn compile(
        &self,
        manifest: Manifest,
        bindings: BTreeMap<String, String>,
        mut old: Option<&mut AppInstance>,
    ) -> Result<AppInstance, RuntimeError> {
        let report = validate_manifest(&manifest);
        if !report.is_installable() {
            return Err(RuntimeError::Invalid(report));
        }
        let mut nodes = BTreeMap::new();
        let mut drivers = BTreeMap::new();
        let mut used = BTreeMap::new();
        for spec in &manifest.graph {
            let compiled = match OperatorConfig::from_node(spec)? {
                OperatorConfig::Push(c) => Compiled::Push(c),
                OperatorConfig::Pull(c) => Compiled::Pull(c),
                OperatorConfig::Inference(c) => {
                    let p = self.registry.resolve(&c).map_err(|source| RuntimeError::Inference {
                        node: spec.id.clone(),
                        source,
                    })?;
                    Compiled::Inference(c, p)
                }
                OperatorConfig::Filter(c) => Compiled::Filter(c),
                OperatorConfig::Network(c) => Compiled::Network(c),
                OperatorConfig::Inject(c) => Compiled::Inject(c),
                OperatorConfig::Join(c) => Compiled::Join(c),
                OperatorConfig::Debug => Compiled::Debug,
            };
            if let Compiled::Push(c) | Compiled::Pull(c) = &compiled {
                let name = bindings.get(&spec.id).cloned().unwrap_or_else(|| c.device.clone());
                let reused = old.as_deref_mut().and_then(|o| match o.drivers.get(&spec.id) {
                    Some((n, _)) if *n == name => o.drivers.remove(&spec.id),
                    _ => None,
                });
                let driver = match reused {
                    Some((_, d)) => d,
                    None => self.catalog.create(&name).ok_or_else(|| RuntimeError::MissingBinding {
                        node: spec.id.clone(),
                        driver: name.clone(),
                    })?,
                };
                let incompatible = |reason: String| RuntimeError::IncompatibleBinding {
                    node: spec.id.clone(),
                    driver: name.clone(),
                    reason,
                };
                if driver.kind() != c.datatype {
                    return Err(incompatible(format!("produces {} but the node expects {}", driver.kind(), c.datatype)));
                }
                let push = matches!(compiled, Compiled::Push(_));
                if push && !driver.mode().can_push() {
                    return Err(incompatible("the driver cannot push".into()));
                }
                if !push && !driver.mode().can_pull() {
                    return Err(incompatible("the driver cannot be pulled".into()));
                }
                if let (true, Some(e)) = (push, &c.event) {
                    if !driver.events().contains(e) {
                        return Err(incompatible(format!("the driver never emits {e:?}")));
                    }
                }
                used.insert(spec.id.clone(), name.clone());
                drivers.insert(spec.id.clone(), (name, driver));
            }
            nodes.insert(spec.id.clone(), compiled);
        }
        let graph = Graph::new(&manifest);
        let outputs = graph
            .ids()
            .map(|id| {
                let outs = graph
                    .outputs(id)
                    .iter()
                    .map(|to| (to.to_string(), graph.port_of(id, to).unwrap_or(0)))
                    .collect();
                (id.to_string(), outs)
            })
            .collect();
        Ok(AppInstance {
            manifest,
            generation: 0,
            bindings: used,
            nodes,
            outputs,
            drivers,
            joins: BTreeMap::new(),
            mailboxes: BTreeMap::new(),
            guard: Arc::new(AllowAll),
            intercepts: Vec::new(),
            paused: false,
            installed_at: self.clock.now(),
        })
    }

    /// Schedules the first tick of every interval inject and the first
    /// event of every push driver.
    fn start(&mut self, app: &str) {
        let now = self.clock.now();
        let Some(inst) = self.apps.get_mut(app) else { return };
        let generation = inst.generation;
        let mut first = Vec::new();
        for (id, node) in &inst.nodes {
            match node {
                Compiled::Inject(InjectConfig {
                    mode: InjectMode::Interval,
                    interval_ms: Some(i),
                }) => first.push((next_tick(*i, now), id.clone(), EventKind::Tick)),
                Compiled::Push(_) => {
                    if let Some((ts, e)) = inst.drivers.get_mut(id).and_then(|(_, d)| d.next_event(now)) {
                        first.push((ts, id.clone(), EventKind::Push(e)));
                    }
                }
                _ => {}
            }
        }
        for (ts, node, kind) in first {
            self.schedule(ts, app, &node, generation, kind);
        }
    }

    pub fn set_guard(&mut self, app: &str, guard: Arc<dyn EgressGuard>) -> Result<(), RuntimeError> {
        let inst = self.apps.get_mut(app).ok_or_else(|| RuntimeError::UnknownApp(app.into()))?;
        inst.guard = guard;
        Ok(())
    }

    pub fn add_intercept(&mut self, app: &str, rule: InterceptRule) -> Result<(), RuntimeError> {
        let inst = self.apps.get_mut(app).ok_or_else(|| RuntimeError::UnknownApp(app.into()))?;
        inst.intercepts.push(rule);
        Ok(())
    }

    pub fn clear_intercepts(&mut self, app: &str) -> Result<(), RuntimeError> {
        let inst = self.apps.get_mut(app).ok_or_else(|| RuntimeError::UnknownApp(app.into()))?;
        inst.intercepts.clear();
        Ok(())
    }

    /// Paused apps skip ticks and driver events; their schedule keeps going.
    pub fn set_paused(&mut self, app: &str, paused: bool) -> Result<(), RuntimeError> {
        let inst = self.apps.get_mut(app).ok_or_else(|| RuntimeError::UnknownApp(app.into()))?;
        inst.paused = paused;
        Ok(())
    }

    /// Fires a manual inject node now and drains the resulting deliveries.
    pub fn fire_manual_inject(&mut self, app: &str, node: &str) -> Result<ExecutionTrace, RuntimeError> {
        let inst = self.apps.get(app).ok_or_else(|| RuntimeError::UnknownApp(app.into()))?;
        match inst.nodes.get(node) {
            Some(Compiled::Inject(InjectConfig {
                mode: InjectMode::Manual, ..
            })) => {}
            Some(_) => return Err(RuntimeError::NotManualInject(node.into())),
            None => {
                return Err(RuntimeError::UnknownNode {
                    app: app.into(),
                    node: node.into(),
                })
            }
        }
        let generation = inst.generation;
        let now = self.clock.now();
        self.schedule(now, app, node, generation, EventKind::Manual);
        Ok(self.run_until(now))
    }

    pub fn advance(&mut self, delta_ms: u64) -> ExecutionTrace {
        let target = self.clock.now().saturating_add(delta_ms);
        self.run_until(target)
    }

    /// Real clocks only: runs everything due up to the wall-clock time.
    pub fn catch_up(&mut self) -> ExecutionTrace {
        let now = self.clock.sync();
        self.run_until(now)
    }

    /// Processes every event with a timestamp up to and including `target`.
    pub fn run_until(&mut self, target: u64) -> ExecutionTrace {
        self.trace = ExecutionTrace {
            from: self.clock.now(),
            to: target,
            ..Default::default()
        };
        while self.queue.peek().is_some_and(|Reverse(e)| e.ts <= target) {
            let Reverse(ev) = self.queue.pop().expect("peeked");
            self.clock.advance_to(ev.ts);
            self.handle(ev);
        }
        self.clock.advance_to(target);
        self.diagnostics.flush();
        std::mem::take(&mut self.trace)
    }

    fn handle(&mut self, ev: Event) {
        let Some(inst) = self.apps.get(&ev.app) else { return };
        if inst.generation != ev.generation {
            return;
        }
        let paused = inst.paused;
        let (ts, app, node) = (ev.ts, ev.app.as_str(), ev.node.as_str());
        match &ev.kind {
            EventKind::Tick => {
                let interval = match inst.nodes.get(node) {
                    Some(Compiled::Inject(InjectConfig {
                        interval_ms: Some(i), ..
                    })) => *i,
                    _ => return,
                };
                self.schedule(next_tick(interval, ts), app, node, ev.generation, EventKind::Tick);
                if !paused {
                    let m = inject_tick(&OpContext { node, ts });
                    self.forward(app, node, m, ts);
                }
            }
            EventKind::Manual => {
                let m = inject_tick(&OpContext { node, ts });
                self.forward(app, node, m, ts);
            }
            EventKind::Push(event) => self.on_push(app, node, event, ts, ev.generation, paused),
            EventKind::Deliver => {
                let inst = self.apps.get_mut(app).expect("checked above");
                let Some((port, m)) = inst.mailboxes.get_mut(node).and_then(VecDeque::pop_front) else {
                    return;
                };
                if let Some(out) = self.process(app, node, port, m, ts) {
                    self.forward(app, node, out, ts);
                }
            }
        }
    }

    fn on_push(&mut self, app: &str, node: &str, event: &str, ts: u64, generation: u64, paused: bool) {
        let inst = self.apps.get_mut(app).expect("caller checked");
        let Some(Compiled::Push(cfg)) = inst.nodes.get(node) else { return };
        let Some((_, driver)) = inst.drivers.get_mut(node) else { return };
        let next = driver.next_event(ts);
        let wanted = cfg.event.as_deref().is_none_or(|e| e == event);
        let result = (wanted && !paused).then(|| {
            let trigger = TriggerMeta {
                source: node.to_string(),
                ts,
                event: Some(event.to_string()),
            };
            provider_emit(cfg, driver.as_mut(), trigger, &OpContext { node, ts })
        });
        if let Some((t, e)) = next {
            self.schedule(t.max(ts + 1), app, node, generation, EventKind::Push(e));
        }
        match result {
            Some(Ok(m)) => {
                self.trace.emits.push(EmitEvent {
                    ts,
                    app: app.into(),
                    node: node.into(),
                    items: m.len(),
                });
                self.forward(app, node, m, ts);
            }
            Some(Err(e)) => self.diag(app, ts, node, Level::Warn, "driver_unavailable", e.to_string()),
            None => {}
        }
    }

    /// Runs one node on one message. `None` stops the flow.
    fn process(&mut self, app: &str, node: &str, port: usize, m: Message, ts: u64) -> Option<Message> {
        let ctx = OpContext { node, ts };
        let inst = self.apps.get_mut(app).expect("caller checked");
        let out = match inst.nodes.get(node)? {
            Compiled::Push(_) | Compiled::Inject(_) => Some(m),
            Compiled::Pull(cfg) => {
                let (_, driver) = inst.drivers.get_mut(node)?;
                let trigger = m.trigger_meta.clone().unwrap_or(TriggerMeta {
                    source: node.to_string(),
                    ts,
                    event: None,
                });
                match provider_emit(cfg, driver.as_mut(), trigger, &ctx) {
                    Ok(out) => {
                        self.trace.emits.push(EmitEvent {
                            ts,
                            app: app.into(),
                            node: node.into(),
                            items: out.len(),
                        });
                        Some(out)
                    }
                    Err(e) => {
                        self.diag(app, ts, node, Level::Warn, "driver_unavailable", e.to_string());
                        None
                    }
                }
            }
            Compiled::Inference(cfg, provider) => Some(inference_apply(cfg, m, provider.as_ref(), &ctx)),
            Compiled::Filter(cfg) => match filter_apply(cfg, m, &ctx) {
                Ok(out) => Some(out),
                Err(e) => {
                    self.diag(app, ts, node, Level::Error, "filter_failed", e.to_string());
                    None
                }
            },
            Compiled::Network(cfg) => {
                let env = EgressEnv {
                    app,
                    guard: inst.guard.as_ref(),
                    transport: self.transport.as_ref(),
                    intercepts: &inst.intercepts,
                    retry: self.retry,
                };
                let outcome = network_egress(cfg, m, &ctx, &env);
                for r in &outcome.records {
                    if let Err(e) = self.ledger.append(r.clone()) {
                        self.diagnostics
                            .extend(app, [Diagnostic::new(ts, node, Level::Error, "ledger_write", e.to_string())]);
                    }
                }
                self.trace.egress.push(EgressEvent {
                    ts,
                    app: app.into(),
                    node: node.into(),
                    outcome,
                });
                None
            }
            Compiled::Join(cfg) => {
                let state = inst
                    .joins
                    .entry(node.to_string())
                    .or_insert_with(|| JoinState::new(cfg.inputs_expected));
                join_step(cfg, state, port, m, &ctx)
            }
            Compiled::Debug => {
                let mut log = DiagnosticLog::new();
                let out = debug_tap(m, &mut log, &ctx);
                for line in log.lines() {
                    if let Ok(mut d) = serde_json::from_str::<Diagnostic>(line) {
                        d.app = Some(app.to_string());
                        self.diagnostics.push(&d);
                    }
                }
                out
            }
        };
        out.filter(|m| !m.is_empty())
    }

    /// Copies `m` onto every outgoing wire of `node`.
    fn forward(&mut self, app: &str, node: &str, m: Message, ts: u64) {
        if m.is_empty() {
            return;
        }
        let inst = self.apps.get_mut(app).expect("caller checked");
        let generation = inst.generation;
        let outs = inst.outputs.get(node).cloned().unwrap_or_default();
        let items: Vec<ContentType> = m
            .items
            .iter()
            .map(|i| ContentType::new(i.contenttype.clone(), i.datatype))
            .collect();
        let mut dropped = Vec::new();
        for (to, port) in &outs {
            self.trace.edges.push(TraceEntry {
                ts,
                app: app.into(),
                from: node.into(),
                to: to.clone(),
                items: items.clone(),
            });
            let inst = self.apps.get_mut(app).expect("caller checked");
            let mailbox = inst.mailboxes.entry(to.clone()).or_default();
            if mailbox.len() >= self.mailbox_capacity {
                mailbox.pop_front();
                dropped.push(to.clone());
            }
            mailbox.push_back((*port, m.clone()));
            self.schedule(ts, app, to, generation, EventKind::Deliver);
        }
        for to in dropped {
            let msg = format!("mailbox full ({}), dropped the oldest message", self.mailbox_capacity);
            self.diag(app, ts, &to, Level::Warn, "mailbox_overflow", msg);
        }
    }
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime")
            .field("now", &self.clock.now())
            .field("apps", &self.apps.keys().collect::<Vec<_>>())
            .field("pending", &self.queue.len())
            .finish()
    }
}
