use serde::Serialize;

use super::Analysis;
use crate::manifest::Manifest;
use crate::operators::EgressRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelMeta {
    pub name: String,
    pub version: String,
    pub author: String,
    pub purpose: String,
}

/// One network node: what it may send, when, why, and how much it has.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelRow {
    pub network_node: String,
    pub destination: String,
    pub permissions: Vec<String>,
    pub triggers: Vec<String>,
    pub conditions: Vec<String>,
    pub purpose: String,
    pub sent_items: u64,
    pub sent_bytes: u64,
    pub blocked_items: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NutritionLabel {
    pub app: LabelMeta,
    pub rows: Vec<LabelRow>,
}

fn push_unique(list: &mut Vec<String>, s: String) {
    if !list.contains(&s) {
        list.push(s);
    }
}

/// `records` are this app's ledger entries; pass an empty slice before the
/// app has run.
pub fn generate_label(m: &Manifest, analysis: &Analysis, records: &[EgressRecord]) -> NutritionLabel {
    let mut nodes: Vec<_> = m.network_nodes().collect();
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    let rows = nodes
        .into_iter()
        .map(|node| {
            let mut row = LabelRow {
                network_node: node.id.clone(),
                destination: node
                    .str_prop("destination")
                    .and_then(|d| crate::manifest::Endpoint::parse(d).ok())
                    .map(|e| e.authority())
                    .unwrap_or_default(),
                permissions: Vec::new(),
                triggers: Vec::new(),
                conditions: Vec::new(),
                purpose: node.str_prop("purpose").unwrap_or(&m.meta.purpose).to_string(),
                sent_items: 0,
                sent_bytes: 0,
                blocked_items: 0,
            };
            for p in analysis.permissions.iter().filter(|p| p.network_node == node.id) {
                push_unique(&mut row.permissions, p.display());
            }
            for d in analysis.descriptions.iter().filter(|d| d.network_node == node.id) {
                push_unique(&mut row.triggers, d.trigger.clone());
                if let Some(c) = &d.condition {
                    push_unique(&mut row.conditions, c.clone());
                }
            }
            for r in records.iter().filter(|r| r.node == node.id) {
                if r.blocked {
                    row.blocked_items += r.items;
                } else {
                    row.sent_items += r.items;
                    row.sent_bytes += r.bytes;
                }
            }
            row
        })
        .collect();
    NutritionLabel {
        app: LabelMeta {
            name: m.meta.name.clone(),
            version: m.meta.version.clone(),
            author: m.meta.author.clone(),
            purpose: m.meta.purpose.clone(),
        },
        rows,
    }
}
