//! Network operators (post, publish, stream): the only way data leaves the
//! hub. Each call consults the egress guard, applies interception rules,
//! hands requests to a [`Transport`] and reports one [`EgressRecord`] per
//! (content, kind) group, delivered or not.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{FilterConfig, NetworkConfig, Protocol};
use super::filter::filter_apply;
use super::OpContext;
use crate::data::{ContentLabel, DataItem, DataKind, Message, Qualifier};
use crate::manifest::Endpoint;

pub const REASON_DENIED: &str = "permission_denied";
pub const REASON_UNREACHABLE: &str = "sink_unreachable";

/// One line of the egress ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgressRecord {
    pub ts: u64,
    pub app: String,
    pub node: String,
    pub dest: String,
    pub content: String,
    pub kind: DataKind,
    pub items: u64,
    pub bytes: u64,
    pub blocked: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EgressOutcome {
    pub arrived: usize,
    pub sent_items: usize,
    pub sent_bytes: usize,
    pub blocked_items: usize,
    pub type_filtered: usize,
    pub records: Vec<EgressRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutboundRequest {
    pub app: String,
    pub node: String,
    pub protocol: Protocol,
    pub destination: Endpoint,
    pub topic: Option<String>,
    pub content: ContentLabel,
    pub kind: DataKind,
    pub items: usize,
    pub body: Vec<u8>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("sink unreachable: {0}")]
    Unreachable(String),
}

pub trait Transport: Send + Sync {
    fn deliver(&self, req: &OutboundRequest) -> Result<(), TransportError>;
}

/// Test harness standing in for the network: records every request that
/// would have opened a connection.
#[derive(Debug, Default)]
pub struct RecordingTransport {
    requests: Mutex<Vec<OutboundRequest>>,
    fail: bool,
}

impl RecordingTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// A sink that refuses every connection (still recorded as attempts).
    pub fn unreachable() -> Self {
        RecordingTransport {
            requests: Mutex::default(),
            fail: true,
        }
    }

    pub fn requests(&self) -> Vec<OutboundRequest> {
        self.requests.lock().expect("recording lock").clone()
    }

    pub fn connections(&self) -> usize {
        self.requests.lock().expect("recording lock").len()
    }

    pub fn clear(&self) {
        self.requests.lock().expect("recording lock").clear();
    }
}

impl Transport for RecordingTransport {
    fn deliver(&self, req: &OutboundRequest) -> Result<(), TransportError> {
        self.requests.lock().expect("recording lock").push(req.clone());
        if self.fail {
            return Err(TransportError::Unreachable(req.destination.to_string()));
        }
        Ok(())
    }
}

/// What the guard is asked before anything leaves.
#[derive(Debug, Clone, Copy)]
pub struct EgressQuery<'a> {
    pub app: &'a str,
    pub node: &'a str,
    pub content: &'a ContentLabel,
    pub kind: DataKind,
    pub destination: &'a Endpoint,
}

pub trait EgressGuard: Send + Sync {
    fn allows(&self, q: &EgressQuery<'_>) -> bool;
}

pub struct AllowAll;

impl EgressGuard for AllowAll {
    fn allows(&self, _: &EgressQuery<'_>) -> bool {
        true
    }
}

pub struct DenyAll;

impl EgressGuard for DenyAll {
    fn allows(&self, _: &EgressQuery<'_>) -> bool {
        false
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterceptError {
    #[error("interception only supports spoof and noisify, not {0}")]
    UnsupportedFilterKind(&'static str),
    #[error("filter works on {filter} but the rule matches {rule}")]
    KindMismatch { rule: DataKind, filter: DataKind },
}

/// Rewrites matching in-flight items right before they reach a network
/// operator, without touching the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct InterceptRule {
    content: ContentLabel,
    kind: DataKind,
    filter: FilterConfig,
}

impl InterceptRule {
    pub fn new(content: ContentLabel, kind: DataKind, filter: FilterConfig) -> Result<Self, InterceptError> {
        if !matches!(filter, FilterConfig::Spoof(_) | FilterConfig::Noisify(_)) {
            return Err(InterceptError::UnsupportedFilterKind(filter.kind().as_str()));
        }
        if filter.datatype() != kind {
            return Err(InterceptError::KindMismatch {
                rule: kind,
                filter: filter.datatype(),
            });
        }
        Ok(InterceptRule { content, kind, filter })
    }

    /// A rule without a qualifier matches every qualifier of its label.
    pub fn matches(&self, item: &DataItem) -> bool {
        item.datatype == self.kind
            && item.contenttype.label() == self.content.label()
            && (self.content.qualifier() == Qualifier::None
                || self.content.qualifier() == item.contenttype.qualifier())
    }

    pub fn apply(&self, item: DataItem, ctx: &OpContext<'_>) -> DataItem {
        match filter_apply(&self.filter, Message::new(vec![item.clone()]), ctx) {
            Ok(mut m) if m.items.len() == 1 => m.items.remove(0),
            _ => item,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff: Duration,
    /// Sleep between attempts. Off under the simulated clock.
    pub sleep: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff: Duration::from_millis(200),
            sleep: false,
        }
    }
}

pub struct EgressEnv<'a> {
    pub app: &'a str,
    pub guard: &'a dyn EgressGuard,
    pub transport: &'a dyn Transport,
    pub intercepts: &'a [InterceptRule],
    pub retry: RetryPolicy,
}

fn group(items: Vec<DataItem>) -> Vec<(ContentLabel, Vec<DataItem>)> {
    let mut groups: Vec<(ContentLabel, Vec<DataItem>)> = Vec::new();
    for item in items {
        match groups.iter_mut().find(|(c, _)| *c == item.contenttype) {
            Some((_, g)) => g.push(item),
            None => groups.push((item.contenttype.clone(), vec![item])),
        }
    }
    groups
}

/// Request body: the message with provenance stripped from every item.
pub fn egress_body(items: &[DataItem]) -> Vec<u8> {
    let mut body = String::from("{\"items\":[");
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            body.push(',');
        }
        body.push_str(&item.to_egress_json());
    }
    body.push_str("]}");
    body.into_bytes()
}

fn deliver_with_retry(transport: &dyn Transport, req: &OutboundRequest, policy: RetryPolicy) -> Result<(), TransportError> {
    let mut last = None;
    for attempt in 0..policy.attempts.max(1) {
        if attempt > 0 && policy.sleep {
            std::thread::sleep(policy.backoff * (1 << (attempt - 1)));
        }
        match transport.deliver(req) {
            Ok(()) => return Ok(()),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub fn network_egress(cfg: &NetworkConfig, m: Message, ctx: &OpContext<'_>, env: &EgressEnv<'_>) -> EgressOutcome {
    let mut out = EgressOutcome {
        arrived: m.items.len(),
        ..Default::default()
    };
    let (matching, others): (Vec<DataItem>, Vec<DataItem>) =
        m.items.into_iter().partition(|i| i.datatype == cfg.datatype);
    out.type_filtered = others.len();
    let dest = cfg.destination.authority();
    let record = |content: &ContentLabel, items: usize, bytes: usize, reason: Option<&str>| EgressRecord {
        ts: ctx.ts,
        app: env.app.to_string(),
        node: ctx.node.to_string(),
        dest: dest.clone(),
        content: content.key(),
        kind: cfg.datatype,
        items: items as u64,
        bytes: bytes as u64,
        blocked: reason.is_some(),
        reason: reason.map(str::to_string),
    };
    for (content, items) in group(matching) {
        let allowed = env.guard.allows(&EgressQuery {
            app: env.app,
            node: ctx.node,
            content: &content,
            kind: cfg.datatype,
            destination: &cfg.destination,
        });
        let transformed: Vec<DataItem> = items
            .into_iter()
            .map(|item| match env.intercepts.iter().find(|r| r.matches(&item)) {
                Some(rule) => rule.apply(item, ctx),
                None => item,
            })
            .collect();
        for (post, part) in group(transformed) {
            let body = egress_body(&part);
            if !allowed {
                out.blocked_items += part.len();
                out.records.push(record(&post, part.len(), body.len(), Some(REASON_DENIED)));
                continue;
            }
            let req = OutboundRequest {
                app: env.app.to_string(),
                node: ctx.node.to_string(),
                protocol: cfg.protocol,
                destination: cfg.destination.clone(),
                topic: cfg.topic.clone(),
                content: post.clone(),
                kind: cfg.datatype,
                items: part.len(),
                body,
            };
            match deliver_with_retry(env.transport, &req, env.retry) {
                Ok(()) => {
                    out.sent_items += part.len();
                    out.sent_bytes += req.body.len();
                    out.records.push(record(&post, part.len(), req.body.len(), None));
                }
                Err(_) => {
                    out.blocked_items += part.len();
                    out.records.push(record(&post, part.len(), req.body.len(), Some(REASON_UNREACHABLE)));
                }
            }
        }
    }
    out
}
