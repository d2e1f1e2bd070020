//! Natural-language privacy descriptions:
//! "[trigger], the app sends [content data] to [destination] if [condition]."

use serde::Serialize;

use super::phrases::Phrasebook;
use super::types::{inject_interval, is_blocking_join, ContentType, TypeMap};
use crate::data::DataKind;
use crate::manifest::{Graph, Manifest};
use crate::operators::{
    AggregateConfig, FilterConfig, InjectMode, OperatorConfig, OperatorKind, RetrieveConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyDescription {
    pub network_node: String,
    pub trigger: String,
    pub content_data: String,
    pub destination: String,
    pub condition: Option<String>,
    pub rendered: String,
}

pub fn render(trigger: &str, content: &str, destination: &str, condition: Option<&str>) -> String {
    match condition {
        Some(c) => format!("{trigger}, the app sends {content} to {destination} if {c}."),
        None => format!("{trigger}, the app sends {content} to {destination}."),
    }
}

pub const AMBIGUOUS_TRIGGER: &str = "When data arrives";

const UNITS: [(u64, &str); 6] = [
    (604_800_000, "week"),
    (86_400_000, "day"),
    (3_600_000, "hour"),
    (60_000, "minute"),
    (1_000, "second"),
    (1, "millisecond"),
];

/// "every week", "every 30 minutes": the largest unit dividing `ms` exactly.
pub fn interval_phrase(ms: u64) -> String {
    let (unit, name) = UNITS
        .iter()
        .find(|(u, _)| ms >= *u && ms % u == 0)
        .copied()
        .unwrap_or((1, "millisecond"));
    match ms / unit {
        1 => format!("every {name}"),
        n => format!("every {n} {name}s"),
    }
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// A route from a source node to a network node's input, plus the join
/// inputs that gate it.
#[derive(Debug, Clone)]
struct Path<'m> {
    nodes: Vec<&'m str>,
    conditions: Vec<&'m str>,
}

fn paths<'m>(g: &Graph<'m>, types: &TypeMap, id: &'m str, kind: Option<DataKind>, stack: &mut Vec<&'m str>) -> Vec<Path<'m>> {
    let Some(node) = g.node(id) else {
        return Vec::new();
    };
    // cyclic manifests are rejected by validation; just don't loop on them
    if stack.contains(&id) {
        return Vec::new();
    }
    stack.push(id);
    let inputs = g.inputs(id);
    let mut out = Vec::new();
    if node.kind == OperatorKind::Join {
        let carries = |i: &&str| kind.is_none_or(|k| types.output(i).iter().any(|t| t.kind == k));
        let mut content: Vec<&str> = inputs.iter().copied().filter(carries).collect();
        if content.is_empty() {
            content = inputs.to_vec();
        }
        let gates: Vec<&str> = if is_blocking_join(node) {
            inputs.iter().copied().filter(|i| !content.contains(i)).collect()
        } else {
            Vec::new()
        };
        for c in content {
            for mut p in paths(g, types, c, kind, stack) {
                p.conditions.extend(&gates);
                p.nodes.push(id);
                out.push(p);
            }
        }
    } else if let Some(first) = inputs.first() {
        for mut p in paths(g, types, first, kind, stack) {
            p.nodes.push(id);
            out.push(p);
        }
    } else {
        out.push(Path {
            nodes: vec![id],
            conditions: Vec::new(),
        });
    }
    stack.pop();
    out
}

struct Describer<'a, 'm> {
    g: &'a Graph<'m>,
    types: &'a TypeMap,
    book: &'static Phrasebook,
    warnings: Vec<String>,
}

impl<'m> Describer<'_, 'm> {
    fn trigger(&mut self, source: &str, network: &str) -> String {
        let node = self.g.node(source).expect("path nodes exist");
        match OperatorConfig::from_node(node) {
            Ok(OperatorConfig::Inject(c)) => match (c.mode, inject_interval(node)) {
                (InjectMode::Interval, Some(ms)) => format!("For {}", interval_phrase(ms)),
                _ => "When the user triggers the app".to_string(),
            },
            Ok(OperatorConfig::Push(p)) => {
                let device = self.book.device(&p.device);
                match p.event {
                    Some(e) => format!("When the {device} detects {} {e}", article(&e)),
                    None => format!("When the {device} sends data"),
                }
            }
            _ => {
                self.warnings.push(format!("{network}: no inject or push node triggers this flow"));
                AMBIGUOUS_TRIGGER.to_string()
            }
        }
    }

    fn labels(&self, node: &str, kind: DataKind) -> String {
        let mut names: Vec<&str> = Vec::new();
        for t in self.types.output(node).iter().filter(|t| t.kind == kind) {
            if !names.contains(&t.content.label()) {
                names.push(t.content.label());
            }
        }
        names.join(" and ")
    }

    fn inputs_phrase(&self, node: &str, kind: DataKind) -> String {
        let shown: Vec<String> = self
            .types
            .input(node)
            .iter()
            .filter(|t| t.kind == kind)
            .map(ContentType::display)
            .collect();
        if shown.is_empty() {
            kind.to_string()
        } else {
            shown.join(" or ")
        }
    }

    fn content(&self, path: &Path<'m>, kind: DataKind) -> String {
        let b = self.book;
        let last = path.nodes.iter().rev().find_map(|id| {
            let node = self.g.node(id)?;
            match OperatorConfig::from_node(node) {
                Ok(OperatorConfig::Filter(f)) => Some((*id, f)),
                _ => None,
            }
        });
        let Some((id, f)) = last else {
            return format!("raw {kind}");
        };
        match f {
            FilterConfig::Select(c) if c.datatype == DataKind::Tabular => {
                format!("selected {} rows", c.target.label())
            }
            FilterConfig::Select(c) => format!("cropped {} {}", c.target.label(), b.plural(c.datatype.as_str())),
            FilterConfig::Retrieve(c) if c.absent => format!("reports of missing {}", b.plural(c.target.label())),
            FilterConfig::Retrieve(c) => format!("extracted {}", b.plural(c.target.label())),
            FilterConfig::Aggregate(AggregateConfig {
                datatype: DataKind::Tabular,
                group_by: Some(group),
                value_field: Some(value),
                ..
            }) => format!("{} data aggregated by {}", b.field(&value), b.field(&group)),
            FilterConfig::Aggregate(c) => {
                format!("aggregated {} {}", self.labels(id, c.datatype), b.plural(c.datatype.as_str()))
            }
            FilterConfig::Noisify(c) => {
                format!("anonymized {} {}", self.labels(id, c.datatype), b.plural(c.datatype.as_str()))
            }
            FilterConfig::Spoof(c) => {
                format!("{} with spoofed {}", b.plural(c.datatype.as_str()), b.plural(c.target.label()))
            }
        }
    }

    fn condition(&self, gate: &'m str) -> String {
        let b = self.book;
        for p in paths(self.g, self.types, gate, None, &mut Vec::new()) {
            for id in p.nodes.iter().rev() {
                let node = self.g.node(id).expect("path nodes exist");
                let Ok(OperatorConfig::Filter(f)) = OperatorConfig::from_node(node) else {
                    continue;
                };
                let from = self.inputs_phrase(id, f.datatype());
                return match f {
                    FilterConfig::Retrieve(c) if c.absent => {
                        format!("the app cannot recognize {} from the {from}", b.plural(c.target.label()))
                    }
                    FilterConfig::Retrieve(RetrieveConfig { target, category: Some(cat), .. }) => {
                        format!("the {} is classified as {cat}", target.label())
                    }
                    FilterConfig::Retrieve(c) => {
                        format!("the app recognizes {} from the {from}", b.plural(c.target.label()))
                    }
                    FilterConfig::Select(c) => format!("the app detects {} in the {from}", b.plural(c.target.label())),
                    _ => continue,
                };
            }
        }
        format!("data from {gate} is available")
    }
}

pub fn generate_description(m: &Manifest, types: &TypeMap) -> (Vec<PrivacyDescription>, Vec<String>) {
    let g = Graph::new(m);
    let mut d = Describer {
        g: &g,
        types,
        book: Phrasebook::english(),
        warnings: Vec::new(),
    };
    let mut out: Vec<PrivacyDescription> = Vec::new();
    for node in g.nodes().filter(|n| n.kind.is_network()) {
        let Ok(OperatorConfig::Network(cfg)) = OperatorConfig::from_node(node) else {
            continue;
        };
        let destination = cfg.destination.authority();
        let Some(input) = g.inputs(&node.id).first() else {
            d.warnings.push(format!("{}: network node has no input", node.id));
            continue;
        };
        for p in paths(&g, types, input, Some(cfg.datatype), &mut Vec::new()) {
            let trigger = d.trigger(p.nodes[0], &node.id);
            let content_data = d.content(&p, cfg.datatype);
            let conds: Vec<String> = p.conditions.iter().map(|c| d.condition(c)).collect();
            let condition = (!conds.is_empty()).then(|| conds.join(" and "));
            let rendered = render(&trigger, &content_data, &destination, condition.as_deref());
            if out.iter().any(|x| x.network_node == node.id && x.rendered == rendered) {
                continue;
            }
            out.push(PrivacyDescription {
                network_node: node.id.clone(),
                trigger,
                content_data,
                destination: destination.clone(),
                condition,
                rendered,
            });
        }
    }
    (out, d.warnings)
}
