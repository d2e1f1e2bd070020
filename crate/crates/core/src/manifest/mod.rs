//! App manifests: parsing, canonical serialization and validation.

mod endpoint;
mod graph;
pub mod schema;
mod validate;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::data::{ContentLabel, DataKind};
use crate::operators::OperatorKind;

pub use endpoint::{Endpoint, EndpointError};
pub use graph::Graph;
pub use schema::{parse_windows, SchemaSet};
pub use validate::{count_by_code, validate_manifest, Issue, IssueCode, ValidationReport};

/// Version of the operator runtime, compared against `min_runtime_version`.
pub const RUNTIME_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("node {node:?} has unknown operator kind {kind:?}")]
    UnknownOperatorKind { node: String, kind: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    pub version: String,
    pub author: String,
    pub purpose: String,
    pub min_runtime_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Security {
    pub allowed_endpoints: Vec<String>,
    #[serde(default)]
    pub require_tls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: OperatorKind,
    #[serde(default)]
    pub properties: Map<String, Value>,
    #[serde(default)]
    pub wires: Vec<String>,
}

impl NodeSpec {
    pub fn new(id: &str, kind: OperatorKind) -> Self {
        NodeSpec {
            id: id.to_string(),
            kind,
            properties: Map::new(),
            wires: Vec::new(),
        }
    }

    pub fn prop(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.properties.insert(key.to_string(), value.into());
        self
    }

    pub fn wire(mut self, to: &str) -> Self {
        self.wires.push(to.to_string());
        self
    }

    pub fn str_prop(&self, key: &str) -> Option<&str> {
        self.properties.get(key).and_then(Value::as_str)
    }

    pub fn u64_prop(&self, key: &str) -> Option<u64> {
        self.properties.get(key).and_then(Value::as_u64)
    }

    pub fn f64_prop(&self, key: &str) -> Option<f64> {
        self.properties.get(key).and_then(Value::as_f64)
    }

    pub fn bool_prop(&self, key: &str) -> Option<bool> {
        self.properties.get(key).and_then(Value::as_bool)
    }

    /// The `datatype` property: provider output kind, or the target data
    /// type of inference, filter and network operators.
    pub fn datatype(&self) -> Option<DataKind> {
        self.str_prop("datatype").and_then(|s| s.parse().ok())
    }

    pub fn target(&self) -> Option<ContentLabel> {
        self.str_prop("target").and_then(|s| ContentLabel::new(s).ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub meta: Meta,
    pub security: Security,
    pub graph: Vec<NodeSpec>,
}

// Kinds are parsed as plain strings first so that an unknown kind is
// reported as such rather than as a generic syntax error.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    meta: Meta,
    security: Security,
    graph: Vec<RawNode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    kind: String,
    #[serde(default)]
    properties: Map<String, Value>,
    #[serde(default)]
    wires: Vec<String>,
}

pub fn parse_manifest(text: &str) -> Result<Manifest, ParseError> {
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        reason: e.to_string(),
    })?;
    let graph = raw
        .graph
        .into_iter()
        .map(|n| {
            let kind = n
                .kind
                .parse()
                .map_err(|_| ParseError::UnknownOperatorKind {
                    node: n.id.clone(),
                    kind: n.kind.clone(),
                })?;
            Ok(NodeSpec {
                id: n.id,
                kind,
                properties: n.properties,
                wires: n.wires,
            })
        })
        .collect::<Result<_, ParseError>>()?;
    Ok(Manifest {
        meta: raw.meta,
        security: raw.security,
        graph,
    })
}

/// Canonical form: keys sorted, nodes ordered by id, two-space indentation,
/// trailing newline.
pub fn serialize_manifest(m: &Manifest) -> String {
    let mut sorted = m.clone();
    sorted.graph.sort_by(|a, b| a.id.cmp(&b.id));
    // serde_json maps are BTreeMaps, so objects come out key-sorted once the
    // typed structs are round-tripped through Value.
    let value = serde_json::to_value(&sorted).expect("manifests always serialize");
    let mut out = serde_json::to_string_pretty(&value).expect("values always serialize");
    out.push('\n');
    out
}

impl Manifest {
    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.graph.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut NodeSpec> {
        self.graph.iter_mut().find(|n| n.id == id)
    }

    pub fn network_nodes(&self) -> impl Iterator<Item = &NodeSpec> {
        self.graph.iter().filter(|n| n.kind.is_network())
    }

    /// A node id not yet used in the graph, derived from `base`.
    pub fn fresh_id(&self, base: &str) -> String {
        if self.node(base).is_none() {
            return base.to_string();
        }
        (2..)
            .map(|i| format!("{base}-{i}"))
            .find(|id| self.node(id).is_none())
            .expect("unbounded search")
    }
}
