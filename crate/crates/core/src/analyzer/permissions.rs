use serde::Serialize;

use super::types::{ContentType, TypeMap};
use crate::data::{ContentLabel, DataKind};
use crate::manifest::{Graph, Manifest};
use crate::operators::OperatorConfig;

/// A (content, kind, destination) triple a network node may send.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct EgressPermission {
    pub network_node: String,
    pub content: ContentLabel,
    pub kind: DataKind,
    pub destination: String,
}

impl EgressPermission {
    /// "face image"
    pub fn display(&self) -> String {
        ContentType::new(self.content.clone(), self.kind).display()
    }

    /// "face image → HelloVisitor.com"
    pub fn summary(&self) -> String {
        format!("{} → {}", self.display(), self.destination)
    }
}

/// The types entering each network node, restricted to the node's datatype.
pub fn derive_egress_permissions(types: &TypeMap, m: &Manifest) -> Vec<EgressPermission> {
    let g = Graph::new(m);
    let mut out: Vec<EgressPermission> = Vec::new();
    for node in g.nodes().filter(|n| n.kind.is_network()) {
        let Ok(OperatorConfig::Network(cfg)) = OperatorConfig::from_node(node) else {
            continue;
        };
        for t in types.input(&node.id).iter().filter(|t| t.kind == cfg.datatype) {
            let p = EgressPermission {
                network_node: node.id.clone(),
                content: t.content.clone(),
                kind: t.kind,
                destination: cfg.destination.authority(),
            };
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}
