//! Static analysis of manifests: edge types, egress permissions, privacy
//! descriptions and nutrition labels.

mod describe;
mod label;
mod permissions;
mod phrases;
mod types;

use std::fmt::Write;

use serde::Serialize;

pub use describe::{generate_description, interval_phrase, render, PrivacyDescription, AMBIGUOUS_TRIGGER};
pub use label::{generate_label, LabelMeta, LabelRow, NutritionLabel};
pub use permissions::{derive_egress_permissions, EgressPermission};
pub use phrases::Phrasebook;
pub use types::{infer_edge_types, transfer, ContentType, EdgeTypeAnnotation, NodeTypes, TypeMap};

use crate::manifest::Manifest;

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub types: TypeMap,
    pub permissions: Vec<EgressPermission>,
    pub descriptions: Vec<PrivacyDescription>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct EdgeView<'a> {
    from: &'a str,
    to: &'a str,
    psi: Vec<String>,
}

#[derive(Serialize)]
struct PermissionView<'a> {
    network_node: &'a str,
    permission: String,
    content: String,
    kind: crate::data::DataKind,
    destination: &'a str,
}

#[derive(Serialize)]
struct AnalysisView<'a> {
    edges: Vec<EdgeView<'a>>,
    permissions: Vec<PermissionView<'a>>,
    descriptions: &'a [PrivacyDescription],
    label: NutritionLabel,
    warnings: &'a [String],
}

pub fn analyze(m: &Manifest) -> Analysis {
    let types = infer_edge_types(m);
    let permissions = derive_egress_permissions(&types, m);
    let (descriptions, mut warnings) = generate_description(m, &types);
    for id in &types.unreachable {
        warnings.push(format!("{id}: no provider or inject node reaches this node"));
    }
    for e in &types.edges {
        if e.psi.is_empty() && !types.unreachable.contains(&e.from) {
            warnings.push(format!("{} -> {}: no data can flow on this edge", e.from, e.to));
        }
    }
    Analysis {
        types,
        permissions,
        descriptions,
        warnings,
    }
}

impl Analysis {
    pub fn permission_summaries(&self) -> Vec<String> {
        self.permissions.iter().map(EgressPermission::summary).collect()
    }

    pub fn sentences(&self) -> Vec<&str> {
        self.descriptions.iter().map(|d| d.rendered.as_str()).collect()
    }

    pub fn to_json(&self, m: &Manifest) -> serde_json::Value {
        let view = AnalysisView {
            edges: self
                .types
                .edges
                .iter()
                .map(|e| EdgeView {
                    from: &e.from,
                    to: &e.to,
                    psi: e.psi.iter().map(|t| format!("{}/{}", t.content.key(), t.kind)).collect(),
                })
                .collect(),
            permissions: self
                .permissions
                .iter()
                .map(|p| PermissionView {
                    network_node: &p.network_node,
                    permission: p.display(),
                    content: p.content.key(),
                    kind: p.kind,
                    destination: &p.destination,
                })
                .collect(),
            descriptions: &self.descriptions,
            label: generate_label(m, self, &[]),
            warnings: &self.warnings,
        };
        serde_json::to_value(view).expect("analysis serializes")
    }

    pub fn render_text(&self, m: &Manifest) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} by {}", m.meta.name, m.meta.version, m.meta.author);
        let _ = writeln!(s, "Purpose: {}", m.meta.purpose);
        let _ = writeln!(s, "\nDescriptions:");
        for d in &self.descriptions {
            let _ = writeln!(s, "  {}", d.rendered);
        }
        let _ = writeln!(s, "\nPermissions:");
        for p in &self.permissions {
            let _ = writeln!(s, "  {} ({})", p.summary(), p.network_node);
        }
        let _ = writeln!(s, "\nEdge types:");
        for e in &self.types.edges {
            let psi: Vec<String> = e.psi.iter().map(|t| format!("({}, {})", t.content.key(), t.kind)).collect();
            let _ = writeln!(s, "  {} -> {}: [{}]", e.from, e.to, psi.join(", "));
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(s, "\nWarnings:");
            for w in &self.warnings {
                let _ = writeln!(s, "  {w}");
            }
        }
        s
    }
}
