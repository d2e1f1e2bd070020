//! Inference operators (detect, classify, extract) and the provider registry.
//!
//! Providers are deterministic: the same item always yields the same
//! annotations. The reference set covers every operator semantic without
//! shipping ML models; a real model plugs in through the same trait.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde_json::{Map, Value};
use thiserror::Error;

use super::config::InferenceConfig;
use super::media;
use super::OpContext;
use crate::data::{
    Cell, ContentLabel, DataItem, DataKind, InferenceAnnotation, Message, Payload, Table, Task,
};
use crate::manifest::schema::{parse_windows, DAY_MS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("no inference provider registered for {task} {target} on {kind}")]
    NoProviderRegistered {
        task: Task,
        target: String,
        kind: DataKind,
    },
    #[error("provider {0:?} is not registered or does not support this request")]
    UnknownProvider(String),
}

pub struct InferenceRequest<'a> {
    pub task: Task,
    pub target: &'a ContentLabel,
    pub datatype: DataKind,
    pub params: &'a Map<String, Value>,
}

impl<'a> InferenceRequest<'a> {
    pub fn from_config(cfg: &'a InferenceConfig) -> Self {
        InferenceRequest {
            task: cfg.task,
            target: &cfg.target,
            datatype: cfg.datatype,
            params: &cfg.params,
        }
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }
}

pub trait InferenceProvider: Send + Sync {
    fn name(&self) -> &str;

    fn supports(&self, req: &InferenceRequest<'_>) -> bool;

    /// Annotations for one item of the requested data type. The operator
    /// fills in `annotator`.
    fn annotate(&self, item: &DataItem, req: &InferenceRequest<'_>) -> Vec<InferenceAnnotation>;
}

#[derive(Clone, Default)]
pub struct ProviderRegistry {
    providers: Vec<Arc<dyn InferenceProvider>>,
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reference_providers() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(TimeWindowClassifier));
        r.register(Arc::new(ThresholdClassifier));
        r.register(Arc::new(BrightnessExtractor));
        r.register(Arc::new(PredicateDetector));
        r.register(Arc::new(EnergyWindowDetector));
        r
    }

    pub fn register(&mut self, provider: Arc<dyn InferenceProvider>) {
        self.providers.push(provider);
    }

    pub fn names(&self) -> Vec<&str> {
        self.providers.iter().map(|p| p.name()).collect()
    }

    pub fn resolve(&self, cfg: &InferenceConfig) -> Result<Arc<dyn InferenceProvider>, InferenceError> {
        let req = InferenceRequest::from_config(cfg);
        if let Some(name) = &cfg.provider {
            return self
                .providers
                .iter()
                .find(|p| p.name() == name && p.supports(&req))
                .cloned()
                .ok_or_else(|| InferenceError::UnknownProvider(name.clone()));
        }
        self.providers
            .iter()
            .find(|p| p.supports(&req))
            .cloned()
            .ok_or_else(|| InferenceError::NoProviderRegistered {
                task: cfg.task,
                target: cfg.target.label().to_string(),
                kind: cfg.datatype,
            })
    }
}

/// Appends annotations to items of the configured data type. Other items
/// pass through; the `data` field is never touched.
pub fn inference_apply(
    cfg: &InferenceConfig,
    mut m: Message,
    provider: &dyn InferenceProvider,
    ctx: &OpContext<'_>,
) -> Message {
    let req = InferenceRequest::from_config(cfg);
    for item in &mut m.items {
        if item.datatype == cfg.datatype {
            let mut found = provider.annotate(item, &req);
            for a in &mut found {
                a.annotator = ctx.node.to_string();
                a.task = cfg.task;
                a.target = cfg.target.clone();
            }
            item.inference.extend(found);
        }
        item.process.record(ctx.node, cfg.task.as_str(), ctx.ts);
    }
    m
}

fn annotation(task: Task, target: &ContentLabel, payload: Table, confidence: f64) -> InferenceAnnotation {
    InferenceAnnotation {
        annotator: String::new(),
        task,
        target: target.clone(),
        payload,
        confidence,
    }
}

fn compare(op: &str, lhs: f64, rhs: f64) -> bool {
    match op {
        "ge" => lhs >= rhs,
        "lt" => lhs < rhs,
        "le" => lhs <= rhs,
        "eq" => lhs == rhs,
        "ne" => lhs != rhs,
        _ => lhs > rhs,
    }
}

/// Compares a scalar with the `threshold` property: category "above" when
/// the comparison (`op`, default `gt`) holds, "below" otherwise.
pub struct ThresholdClassifier;

impl InferenceProvider for ThresholdClassifier {
    fn name(&self) -> &str {
        "threshold"
    }

    fn supports(&self, req: &InferenceRequest<'_>) -> bool {
        req.task == Task::Classify && req.datatype == DataKind::Scalar && req.f64("threshold").is_some()
    }

    fn annotate(&self, item: &DataItem, req: &InferenceRequest<'_>) -> Vec<InferenceAnnotation> {
        let Payload::Scalar(s) = &item.data else {
            return Vec::new();
        };
        let threshold = req.f64("threshold").unwrap_or(0.0);
        let above = compare(req.str("op").unwrap_or("gt"), s.value, threshold);
        let category = if above { "above" } else { "below" };
        let table = Table::new(["category", "confidence"]).with_row(vec![category.into(), 1.0.into()]);
        vec![annotation(Task::Classify, req.target, table, 1.0)]
    }
}

/// Classifies a timestamp scalar as "blocked" when its time of day falls in
/// one of `blocked_windows`, "allowed" otherwise.
pub struct TimeWindowClassifier;

impl InferenceProvider for TimeWindowClassifier {
    fn name(&self) -> &str {
        "time-window"
    }

    fn supports(&self, req: &InferenceRequest<'_>) -> bool {
        req.task == Task::Classify
            && req.datatype == DataKind::Scalar
            && req.params.get("blocked_windows").is_some_and(|w| parse_windows(w).is_ok())
    }

    fn annotate(&self, item: &DataItem, req: &InferenceRequest<'_>) -> Vec<InferenceAnnotation> {
        let Payload::Scalar(s) = &item.data else {
            return Vec::new();
        };
        let windows = req
            .params
            .get("blocked_windows")
            .and_then(|w| parse_windows(w).ok())
            .unwrap_or_default();
        let tod = (s.value.max(0.0) as u64) % DAY_MS;
        let blocked = windows.iter().any(|(a, b)| *a <= tod && tod < *b);
        let category = if blocked { "blocked" } else { "allowed" };
        let table = Table::new(["category", "confidence"]).with_row(vec![category.into(), 1.0.into()]);
        vec![annotation(Task::Classify, req.target, table, 1.0)]
    }
}

/// Mean luma of an image, or per frame of a video.
pub struct BrightnessExtractor;

impl InferenceProvider for BrightnessExtractor {
    fn name(&self) -> &str {
        "brightness"
    }

    fn supports(&self, req: &InferenceRequest<'_>) -> bool {
        req.task == Task::Extract
            && req.target.label() == "brightness"
            && matches!(req.datatype, DataKind::Image | DataKind::Video)
    }

    fn annotate(&self, item: &DataItem, req: &InferenceRequest<'_>) -> Vec<InferenceAnnotation> {
        let table = match &item.data {
            Payload::Image(b) => Table::new(["brightness"]).with_row(vec![media::mean_luma(b).into()]),
            Payload::Video(v) => {
                let mut t = Table::new(["frame", "brightness"]);
                for (i, f) in v.frames.iter().enumerate() {
                    t.rows.push(vec![(i as f64).into(), media::mean_luma(f).into()]);
                }
                t
            }
            _ => return Vec::new(),
        };
        vec![annotation(Task::Extract, req.target, table, 1.0)]
    }
}

/// Finds table rows where `field` compares to `value` (`op`, default `eq`).
/// The matching rows become the annotation payload.
pub struct PredicateDetector;

impl InferenceProvider for PredicateDetector {
    fn name(&self) -> &str {
        "predicate"
    }

    fn supports(&self, req: &InferenceRequest<'_>) -> bool {
        req.task == Task::Detect
            && req.datatype == DataKind::Tabular
            && req.str("field").is_some()
            && req.params.contains_key("value")
    }

    fn annotate(&self, item: &DataItem, req: &InferenceRequest<'_>) -> Vec<InferenceAnnotation> {
        let Payload::Tabular(t) = &item.data else {
            return Vec::new();
        };
        let Some(col) = req.str("field").and_then(|f| t.column(f)) else {
            return Vec::new();
        };
        let op = req.str("op").unwrap_or("eq");
        let wanted = &req.params["value"];
        let matches = |cell: &Cell| match (wanted.as_f64(), cell.as_f64()) {
            (Some(w), Some(c)) => compare(op, c, w),
            _ => {
                let text = wanted.as_str().map(str::to_string).unwrap_or_else(|| wanted.to_string());
                match op {
                    "ne" => cell.key() != text,
                    _ => cell.key() == text,
                }
            }
        };
        let mut hits = Table::new(t.columns.clone());
        hits.rows = t.rows.iter().filter(|r| r.get(col).is_some_and(matches)).cloned().collect();
        if hits.is_empty() {
            return Vec::new();
        }
        vec![annotation(Task::Detect, req.target, hits, 1.0)]
    }
}

/// Voice-activity stand-in: windows of `window_ms` (default 100) whose RMS
/// exceeds `energy_threshold` (default 500) are merged into segments, one
/// annotation per segment with a `{start_ms, end_ms}` row.
pub struct EnergyWindowDetector;

impl InferenceProvider for EnergyWindowDetector {
    fn name(&self) -> &str {
        "energy-window"
    }

    fn supports(&self, req: &InferenceRequest<'_>) -> bool {
        req.task == Task::Detect
            && req.datatype == DataKind::Audio
            && matches!(req.target.label(), "speech" | "voice" | "sound")
    }

    fn annotate(&self, item: &DataItem, req: &InferenceRequest<'_>) -> Vec<InferenceAnnotation> {
        let Payload::Audio(clip) = &item.data else {
            return Vec::new();
        };
        let window_ms = req.params.get("window_ms").and_then(Value::as_u64).unwrap_or(100).max(1);
        let threshold = req.f64("energy_threshold").unwrap_or(500.0);
        let per_window = ((clip.sample_rate as u64 * window_ms) / 1000).max(1) as usize;
        let mut segments: Vec<(u64, u64)> = Vec::new();
        for (i, chunk) in clip.samples.chunks(per_window).enumerate() {
            if media::rms(chunk) <= threshold {
                continue;
            }
            let start = i as u64 * window_ms;
            let end = start + chunk.len() as u64 * 1000 / clip.sample_rate.max(1) as u64;
            match segments.last_mut() {
                Some(last) if last.1 == start => last.1 = end,
                _ => segments.push((start, end)),
            }
        }
        segments
            .into_iter()
            .map(|(s, e)| {
                let t = Table::new(["start_ms", "end_ms"]).with_row(vec![(s as f64).into(), (e as f64).into()]);
                annotation(Task::Detect, req.target, t, 1.0)
            })
            .collect()
    }
}

/// Ground-truth annotations keyed by payload digest. Stands in for face,
/// person, pose and sound-event models on the shipped media fixtures.
pub struct FixtureAnnotator {
    name: String,
    by_digest: HashMap<String, Vec<InferenceAnnotation>>,
    supported: BTreeSet<(Task, String, DataKind)>,
}

impl FixtureAnnotator {
    pub fn new(name: &str) -> Self {
        FixtureAnnotator {
            name: name.to_string(),
            by_digest: HashMap::new(),
            supported: BTreeSet::new(),
        }
    }

    /// Registers ground truth for one payload. Every (task, target, kind)
    /// seen here becomes supported, even for payloads without annotations.
    pub fn add(&mut self, payload: &Payload, annotations: Vec<InferenceAnnotation>) {
        for a in &annotations {
            self.supported
                .insert((a.task, a.target.label().to_string(), payload.kind()));
        }
        self.by_digest
            .entry(media::payload_digest(payload))
            .or_default()
            .extend(annotations);
    }

    pub fn declare(&mut self, task: Task, target: &str, kind: DataKind) {
        self.supported.insert((task, target.to_string(), kind));
    }

    pub fn len(&self) -> usize {
        self.by_digest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_digest.is_empty()
    }
}

impl InferenceProvider for FixtureAnnotator {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports(&self, req: &InferenceRequest<'_>) -> bool {
        self.supported
            .contains(&(req.task, req.target.label().to_string(), req.datatype))
    }

    fn annotate(&self, item: &DataItem, req: &InferenceRequest<'_>) -> Vec<InferenceAnnotation> {
        self.by_digest
            .get(&media::payload_digest(&item.data))
            .map(|list| {
                list.iter()
                    .filter(|a| a.task == req.task && a.target.label() == req.target.label())
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }
}
