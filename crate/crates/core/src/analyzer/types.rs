//! Edge type inference: which (content, kind) pairs can flow on each edge.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::data::{ContentLabel, DataKind, Qualifier, Task};
use crate::manifest::{Graph, Manifest, NodeSpec};
use crate::operators::{
    FilterConfig, InjectMode, JoinMode, OperatorConfig, OperatorKind,
};

/// One (content, kind) pair of a type annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ContentType {
    pub content: ContentLabel,
    pub kind: DataKind,
}

impl ContentType {
    pub fn new(content: ContentLabel, kind: DataKind) -> Self {
        ContentType { content, kind }
    }

    /// User-facing name, e.g. "face image" or "anonymized speech audio".
    pub fn display(&self) -> String {
        format!("{} {}", self.content.phrase(), self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeTypeAnnotation {
    pub from: String,
    pub to: String,
    pub psi: Vec<ContentType>,
    pub available_annotations: BTreeSet<(Task, String)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NodeTypes {
    pub input: Vec<ContentType>,
    pub output: Vec<ContentType>,
    pub annotations: BTreeSet<(Task, String)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TypeMap {
    pub order: Vec<String>,
    pub nodes: BTreeMap<String, NodeTypes>,
    pub edges: Vec<EdgeTypeAnnotation>,
    /// Nodes that no provider or inject node reaches.
    pub unreachable: Vec<String>,
}

impl TypeMap {
    pub fn edge(&self, from: &str, to: &str) -> Option<&EdgeTypeAnnotation> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn input(&self, node: &str) -> &[ContentType] {
        self.nodes.get(node).map(|n| n.input.as_slice()).unwrap_or(&[])
    }

    pub fn output(&self, node: &str) -> &[ContentType] {
        self.nodes.get(node).map(|n| n.output.as_slice()).unwrap_or(&[])
    }
}

fn push_unique(list: &mut Vec<ContentType>, t: ContentType) {
    if !list.contains(&t) {
        list.push(t);
    }
}

fn trigger() -> ContentLabel {
    ContentLabel::new("trigger").expect("valid label")
}

/// Output types of one node given its input types.
pub fn transfer(node: &NodeSpec, input: &[ContentType]) -> Vec<ContentType> {
    let Ok(cfg) = OperatorConfig::from_node(node) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    match cfg {
        OperatorConfig::Push(p) | OperatorConfig::Pull(p) => {
            out.push(ContentType::new(ContentLabel::raw(), p.datatype));
        }
        OperatorConfig::Inject(_) => out.push(ContentType::new(trigger(), DataKind::Scalar)),
        OperatorConfig::Inference(_) | OperatorConfig::Network(_) | OperatorConfig::Debug | OperatorConfig::Join(_) => {
            out = input.to_vec();
        }
        OperatorConfig::Filter(f) => {
            let dt = f.datatype();
            let matching = input.iter().filter(|t| t.kind == dt);
            match &f {
                FilterConfig::Select(c) => {
                    if input.iter().any(|t| t.kind == dt) {
                        out.push(ContentType::new(c.target.clone().with_qualifier(Qualifier::Cropped), dt));
                    }
                }
                FilterConfig::Retrieve(c) => {
                    if input.iter().any(|t| t.kind == dt) {
                        out.push(ContentType::new(
                            c.target.clone().with_qualifier(Qualifier::Extracted),
                            DataKind::Tabular,
                        ));
                    }
                }
                FilterConfig::Aggregate(c) => {
                    for t in matching {
                        if c.target.as_ref().is_none_or(|g| g.label() == t.content.label()) {
                            push_unique(&mut out, ContentType::new(t.content.clone().with_qualifier(Qualifier::Aggregated), dt));
                        }
                    }
                }
                FilterConfig::Noisify(c) => {
                    for t in matching {
                        let hit = c.target.as_ref().is_none_or(|g| g.label() == t.content.label());
                        let content = if hit {
                            t.content.clone().with_qualifier(Qualifier::Anonymized)
                        } else {
                            t.content.clone()
                        };
                        push_unique(&mut out, ContentType::new(content, dt));
                    }
                }
                FilterConfig::Spoof(c) => {
                    for t in matching {
                        let spoofed = ContentType::new(t.content.clone().with_qualifier(Qualifier::Spoofed), dt);
                        if t.content.label() != c.target.label() {
                            // region replacement only happens when the target was annotated
                            push_unique(&mut out, t.clone());
                        }
                        push_unique(&mut out, spoofed);
                    }
                }
            }
        }
    }
    out
}

fn annotations_out(node: &NodeSpec, input: BTreeSet<(Task, String)>) -> BTreeSet<(Task, String)> {
    match OperatorConfig::from_node(node) {
        Ok(OperatorConfig::Inference(c)) => {
            let mut s = input;
            s.insert((c.task, c.target.label().to_string()));
            s
        }
        Ok(OperatorConfig::Filter(
            FilterConfig::Select(_) | FilterConfig::Retrieve(_) | FilterConfig::Aggregate(_),
        ))
        | Ok(OperatorConfig::Push(_) | OperatorConfig::Pull(_) | OperatorConfig::Inject(_)) => BTreeSet::new(),
        _ => input,
    }
}

/// Annotates every edge, visiting nodes in topological order with ties
/// broken by node id. Cyclic manifests yield an empty map.
pub fn infer_edge_types(m: &Manifest) -> TypeMap {
    let g = Graph::new(m);
    let Ok(order) = g.topo_order() else {
        return TypeMap::default();
    };
    let mut map = TypeMap {
        order: order.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    for id in &order {
        let node = g.node(id).expect("ordered ids exist");
        let mut input = Vec::new();
        let mut ann = BTreeSet::new();
        for src in g.inputs(id) {
            let up = &map.nodes[*src];
            for t in &up.output {
                push_unique(&mut input, t.clone());
            }
            ann.extend(up.annotations.iter().cloned());
        }
        let output = transfer(node, &input);
        let annotations = annotations_out(node, ann);
        let source = node.kind.is_provider() || node.kind == OperatorKind::Inject;
        let fed = g.inputs(id).iter().any(|s| !map.unreachable.iter().any(|u| u == s));
        if !source && !fed {
            map.unreachable.push(id.to_string());
        }
        map.nodes.insert(id.to_string(), NodeTypes { input, output, annotations });
    }
    for (from, to) in g.edges() {
        let n = &map.nodes[from];
        map.edges.push(EdgeTypeAnnotation {
            from: from.to_string(),
            to: to.to_string(),
            psi: n.output.clone(),
            available_annotations: n.annotations.clone(),
        });
    }
    map
}

/// Inject interval of a node, if it is an interval inject.
pub fn inject_interval(node: &NodeSpec) -> Option<u64> {
    match OperatorConfig::from_node(node) {
        Ok(OperatorConfig::Inject(c)) if c.mode == InjectMode::Interval => c.interval_ms,
        _ => None,
    }
}

pub fn is_blocking_join(node: &NodeSpec) -> bool {
    matches!(OperatorConfig::from_node(node), Ok(OperatorConfig::Join(j)) if j.mode == JoinMode::Blocking)
}
