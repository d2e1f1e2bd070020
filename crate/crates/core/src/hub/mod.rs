//! Control plane: installed apps, their permissions and analysis, rewrites,
//! and egress reports. [`Hub`] is the synchronous core; [`http`] serves it
//! over HTTP and [`client`] talks to that server.

pub mod client;
pub mod http;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::analyzer::{analyze, generate_label, Analysis, EgressPermission, NutritionLabel, PrivacyDescription};
use crate::data::ContentLabel;
use crate::manifest::{parse_manifest, serialize_manifest, Manifest, NodeSpec, ParseError, ValidationReport};
use crate::operators::media::sha256_hex;
use crate::operators::{EgressGuard, EgressQuery, EgressRecord, InterceptError, InterceptRule, OperatorConfig, OperatorKind};
use crate::rewriter::{self, canonical_diff, RewriteError, RewritePlan};
use crate::runtime::{ClockMode, EgressFilter, ExecutionTrace, ReportRow, Runtime, RuntimeError};

#[derive(Debug, Error)]
pub enum HubError {
    #[error("no app {0:?}")]
    UnknownApp(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("manifest has {} validation error(s)", .0.errors.len())]
    Invalid(ValidationReport),
    #[error(transparent)]
    Runtime(RuntimeError),
    #[error("app {app} has no permission {permission:?}")]
    UnknownPermission { app: String, permission: String },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Intercept(#[from] InterceptError),
    #[error("the clock is not simulated")]
    NotSimulated,
    #[error("{0}")]
    BadRequest(String),
}

impl From<RuntimeError> for HubError {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::Invalid(r) => HubError::Invalid(r),
            RuntimeError::UnknownApp(a) => HubError::UnknownApp(a),
            other => HubError::Runtime(other),
        }
    }
}

impl HubError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            HubError::UnknownApp(_) => "UnknownApp",
            HubError::Parse(_) => "ParseError",
            HubError::Invalid(_) => "ValidationFailed",
            HubError::Runtime(RuntimeError::MissingBinding { .. }) => "MissingBinding",
            HubError::Runtime(RuntimeError::IncompatibleBinding { .. }) => "IncompatibleBinding",
            HubError::Runtime(RuntimeError::UnknownNode { .. }) => "UnknownNode",
            HubError::Runtime(RuntimeError::NotManualInject(_)) => "NotManualInject",
            HubError::Runtime(RuntimeError::Inference { .. }) => "NoProviderRegistered",
            HubError::Runtime(_) => "RuntimeError",
            HubError::UnknownPermission { .. } => "UnknownPermission",
            HubError::Rewrite(RewriteError::TypeMismatchAtSplice { .. }) => "TypeMismatchAtSplice",
            HubError::Rewrite(RewriteError::WouldIncreaseRate { .. }) => "WouldIncreaseRate",
            HubError::Rewrite(RewriteError::NotAnInjectNode(_)) => "NotAnInjectNode",
            HubError::Rewrite(RewriteError::NotANetworkNode(_)) => "NotANetworkNode",
            HubError::Rewrite(_) => "RewriteRejected",
            HubError::Intercept(_) => "UnsupportedFilterKind",
            HubError::NotSimulated => "NotSimulated",
            HubError::BadRequest(_) => "BadRequest",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            HubError::UnknownApp(_) | HubError::UnknownPermission { .. } => 404,
            HubError::Runtime(RuntimeError::UnknownNode { .. }) => 404,
            HubError::NotSimulated => 409,
            HubError::BadRequest(_) => 400,
            _ => 422,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Allowed,
    Denied,
    /// Not decided yet; treated as denied.
    Pending,
}

/// Shared between the hub and the app's egress guard.
#[derive(Debug, Default)]
pub struct PermissionTable {
    entries: RwLock<Vec<(EgressPermission, Decision)>>,
}

impl PermissionTable {
    fn snapshot(&self) -> Vec<(EgressPermission, Decision)> {
        self.entries.read().expect("permission lock").clone()
    }

    /// Replaces the permission set, keeping decisions for permissions that
    /// survive. New ones start pending.
    fn reset(&self, derived: &[EgressPermission]) {
        let mut entries = self.entries.write().expect("permission lock");
        let next = derived
            .iter()
            .map(|p| {
                let d = entries.iter().find(|(q, _)| q == p).map(|(_, d)| *d).unwrap_or(Decision::Pending);
                (p.clone(), d)
            })
            .collect();
        *entries = next;
    }

    /// Sets every permission whose display ("face image") or summary
    /// ("face image → HelloVisitor.com") equals `name`. Returns how many
    /// matched.
    fn set(&self, name: &str, allowed: bool) -> usize {
        let mut entries = self.entries.write().expect("permission lock");
        let mut n = 0;
        for (p, d) in entries.iter_mut() {
            if p.display() == name || p.summary() == name {
                *d = if allowed { Decision::Allowed } else { Decision::Denied };
                n += 1;
            }
        }
        n
    }
}

/// Allows exactly the permissions decided as allowed. Content the analyzer
/// did not predict is denied.
pub struct PermissionGuard(pub Arc<PermissionTable>);

impl EgressGuard for PermissionGuard {
    fn allows(&self, q: &EgressQuery<'_>) -> bool {
        let dest = q.destination.authority();
        self.0.entries.read().expect("permission lock").iter().any(|(p, d)| {
            *d == Decision::Allowed
                && p.network_node == q.node
                && p.content == *q.content
                && p.kind == q.kind
                && p.destination == dest
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermissionView {
    pub permission: String,
    pub summary: String,
    pub content: String,
    pub kind: String,
    pub destination: String,
    pub network_node: String,
    pub state: Decision,
    pub allowed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppView {
    pub id: String,
    pub name: String,
    pub version: String,
    pub author: String,
    pub purpose: String,
    pub state: String,
    pub installed_at: u64,
    pub manifest_hash: String,
    pub bindings: BTreeMap<String, String>,
    pub descriptions: Vec<String>,
    pub permissions: Vec<PermissionView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptionView {
    pub app: String,
    pub manifest_hash: String,
    pub sentences: Vec<String>,
    pub details: Vec<PrivacyDescription>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: OperatorKind,
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub properties: Map<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum RewriteRequest {
    RateLimit { node: String, interval_ms: u64 },
    Schedule { node: String, windows: Vec<(u64, u64)> },
    Filter { after: String, filter: FilterSpec },
    Plan { plan: RewritePlan },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewriteBody {
    #[serde(flatten)]
    pub request: RewriteRequest,
    #[serde(default)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewriteResponse {
    pub plan: RewritePlan,
    pub diff: String,
    pub applied: bool,
    pub manifest_hash: String,
}

impl RewriteRequest {
    pub fn plan(&self, m: &Manifest) -> Result<RewritePlan, RewriteError> {
        match self {
            RewriteRequest::RateLimit { node, interval_ms } => rewriter::plan_rate_limit(m, node, *interval_ms),
            RewriteRequest::Schedule { node, windows } => rewriter::plan_time_schedule(m, node, windows),
            RewriteRequest::Filter { after, filter } => {
                let mut spec = NodeSpec::new(&filter.id, filter.kind);
                spec.properties = filter.properties.clone();
                rewriter::plan_content_filter(m, after, spec)
            }
            RewriteRequest::Plan { plan } => Ok(plan.clone()),
        }
    }
}

/// Totals of one run step, for API responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub from: u64,
    pub to: u64,
    pub emits: usize,
    pub egress_records: usize,
    pub sent_items: usize,
    pub sent_bytes: usize,
    pub blocked_items: usize,
    pub records: Vec<EgressRecord>,
}

impl From<&ExecutionTrace> for RunSummary {
    fn from(t: &ExecutionTrace) -> Self {
        let records: Vec<EgressRecord> = t.egress.iter().flat_map(|e| e.outcome.records.iter().cloned()).collect();
        RunSummary {
            from: t.from,
            to: t.to,
            emits: t.emits.len(),
            egress_records: records.len(),
            sent_items: t.sent_items(),
            sent_bytes: t.sent_bytes(),
            blocked_items: t.blocked_items(),
            records,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgressReport {
    pub rows: Vec<ReportRow>,
    pub total: ReportRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockView {
    pub now: u64,
    pub mode: ClockMode,
}

struct AppRecord {
    manifest_hash: String,
    analysis: Analysis,
    permissions: Arc<PermissionTable>,
}

fn manifest_hash(m: &Manifest) -> String {
    sha256_hex(serialize_manifest(m).as_bytes())
}

pub struct Hub {
    runtime: Runtime,
    apps: BTreeMap<String, AppRecord>,
}

impl Hub {
    pub fn new(runtime: Runtime) -> Self {
        Hub {
            runtime,
            apps: BTreeMap::new(),
        }
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    pub fn runtime_mut(&mut self) -> &mut Runtime {
        &mut self.runtime
    }

    fn record(&self, id: &str) -> Result<&AppRecord, HubError> {
        self.apps.get(id).ok_or_else(|| HubError::UnknownApp(id.to_string()))
    }

    fn manifest(&self, id: &str) -> Result<&Manifest, HubError> {
        self.runtime.manifest(id).ok_or_else(|| HubError::UnknownApp(id.to_string()))
    }

    /// Recomputes the cached analysis when the running manifest changed.
    fn refresh(&mut self, id: &str) -> Result<(), HubError> {
        let m = self.manifest(id)?.clone();
        let hash = manifest_hash(&m);
        let rec = self.apps.get_mut(id).ok_or_else(|| HubError::UnknownApp(id.to_string()))?;
        if rec.manifest_hash != hash {
            rec.analysis = analyze(&m);
            rec.manifest_hash = hash;
            rec.permissions.reset(&rec.analysis.permissions);
        }
        Ok(())
    }

    pub fn install_text(&mut self, text: &str, bindings: BTreeMap<String, String>) -> Result<AppView, HubError> {
        self.install(parse_manifest(text)?, bindings)
    }

    pub fn install(&mut self, manifest: Manifest, bindings: BTreeMap<String, String>) -> Result<AppView, HubError> {
        let hash = manifest_hash(&manifest);
        let id = self.runtime.install_app(manifest, bindings)?;
        let analysis = analyze(self.manifest(&id)?);
        let permissions = Arc::new(PermissionTable::default());
        permissions.reset(&analysis.permissions);
        self.runtime.set_guard(&id, Arc::new(PermissionGuard(permissions.clone())))?;
        self.apps.insert(
            id.clone(),
            AppRecord {
                manifest_hash: hash,
                analysis,
                permissions,
            },
        );
        self.app(&id)
    }

    pub fn uninstall(&mut self, id: &str) -> Result<(), HubError> {
        self.apps.remove(id).ok_or_else(|| HubError::UnknownApp(id.to_string()))?;
        self.runtime.uninstall(id)?;
        Ok(())
    }

    pub fn app_ids(&self) -> Vec<String> {
        self.apps.keys().cloned().collect()
    }

    pub fn apps(&self) -> Vec<AppView> {
        self.apps.keys().filter_map(|id| self.app(id).ok()).collect()
    }

    pub fn app(&self, id: &str) -> Result<AppView, HubError> {
        let rec = self.record(id)?;
        let m = self.manifest(id)?;
        let status = self.runtime.status(id).ok_or_else(|| HubError::UnknownApp(id.to_string()))?;
        Ok(AppView {
            id: id.to_string(),
            name: m.meta.name.clone(),
            version: m.meta.version.clone(),
            author: m.meta.author.clone(),
            purpose: m.meta.purpose.clone(),
            state: if status.paused { "paused" } else { "running" }.to_string(),
            installed_at: status.installed_at,
            manifest_hash: rec.manifest_hash.clone(),
            bindings: status.bindings,
            descriptions: rec.analysis.sentences().into_iter().map(str::to_string).collect(),
            permissions: self.permissions(id)?,
        })
    }

    pub fn canonical_manifest(&self, id: &str) -> Result<String, HubError> {
        Ok(serialize_manifest(self.manifest(id)?))
    }

    pub fn description(&mut self, id: &str) -> Result<DescriptionView, HubError> {
        self.refresh(id)?;
        let rec = self.record(id)?;
        Ok(DescriptionView {
            app: id.to_string(),
            manifest_hash: rec.manifest_hash.clone(),
            sentences: rec.analysis.sentences().into_iter().map(str::to_string).collect(),
            details: rec.analysis.descriptions.clone(),
            warnings: rec.analysis.warnings.clone(),
        })
    }

    /// The nutrition label with live counts from the ledger.
    pub fn label(&mut self, id: &str) -> Result<NutritionLabel, HubError> {
        self.refresh(id)?;
        let records = self.runtime.ledger().select(&EgressFilter {
            app: Some(id.to_string()),
            ..Default::default()
        });
        Ok(generate_label(self.manifest(id)?, &self.record(id)?.analysis, &records))
    }

    pub fn permissions(&self, id: &str) -> Result<Vec<PermissionView>, HubError> {
        let rec = self.record(id)?;
        Ok(rec
            .permissions
            .snapshot()
            .into_iter()
            .map(|(p, d)| PermissionView {
                permission: p.display(),
                summary: p.summary(),
                content: p.content.key(),
                kind: p.kind.to_string(),
                destination: p.destination.clone(),
                network_node: p.network_node.clone(),
                state: d,
                allowed: d == Decision::Allowed,
            })
            .collect())
    }

    pub fn set_permission(&mut self, id: &str, permission: &str, allowed: bool) -> Result<Vec<PermissionView>, HubError> {
        let rec = self.record(id)?;
        if rec.permissions.set(permission, allowed) == 0 {
            return Err(HubError::UnknownPermission {
                app: id.to_string(),
                permission: permission.to_string(),
            });
        }
        self.permissions(id)
    }

    /// Allows every derived permission of an app.
    pub fn allow_all(&mut self, id: &str) -> Result<(), HubError> {
        for p in self.permissions(id)? {
            self.set_permission(id, &p.summary, true)?;
        }
        Ok(())
    }

    pub fn rewrite(&mut self, id: &str, body: &RewriteBody) -> Result<RewriteResponse, HubError> {
        let before = self.manifest(id)?.clone();
        let mut plan = body.request.plan(&before)?;
        plan.app = id.to_string();
        let after = rewriter::apply_plan(&before, &plan)?;
        let diff = canonical_diff(&before, &after);
        if !body.dry_run {
            self.runtime.replace_manifest(id, after.clone())?;
            self.refresh(id)?;
        }
        Ok(RewriteResponse {
            plan,
            diff,
            applied: !body.dry_run,
            manifest_hash: manifest_hash(if body.dry_run { &before } else { &after }),
        })
    }

    pub fn intercept(&mut self, id: &str, content: ContentLabel, kind: crate::data::DataKind, filter: FilterSpec) -> Result<(), HubError> {
        let mut spec = NodeSpec::new("intercept", filter.kind);
        spec.properties = filter.properties;
        let cfg = match OperatorConfig::from_node(&spec) {
            Ok(OperatorConfig::Filter(f)) => f,
            Ok(_) => return Err(HubError::BadRequest(format!("{} is not a filter", filter.kind.as_str()))),
            Err(e) => return Err(HubError::BadRequest(e.to_string())),
        };
        let rule = InterceptRule::new(content, kind, cfg)?;
        self.runtime.add_intercept(id, rule)?;
        Ok(())
    }

    pub fn fire_inject(&mut self, id: &str, node: &str) -> Result<RunSummary, HubError> {
        self.record(id)?;
        let trace = self.runtime.fire_manual_inject(id, node)?;
        Ok(RunSummary::from(&trace))
    }

    pub fn egress(&self, filter: &EgressFilter) -> EgressReport {
        let rows = self.runtime.ledger().query(filter);
        let mut total = ReportRow {
            group: "total".into(),
            items: 0,
            bytes: 0,
            blocked_items: 0,
            records: 0,
        };
        for r in &rows {
            total.items += r.items;
            total.bytes += r.bytes;
            total.blocked_items += r.blocked_items;
            total.records += r.records;
        }
        EgressReport { rows, total }
    }

    pub fn advance(&mut self, ms: u64) -> Result<RunSummary, HubError> {
        if !self.runtime.clock().is_simulated() {
            return Err(HubError::NotSimulated);
        }
        Ok(RunSummary::from(&self.runtime.advance(ms)))
    }

    pub fn clock(&self) -> ClockView {
        ClockView {
            now: self.runtime.now(),
            mode: self.runtime.clock().mode(),
        }
    }
}
