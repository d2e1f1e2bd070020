use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::schema::{PropertyProblem, SchemaSet};
use super::{Endpoint, Graph, Manifest, NodeSpec, RUNTIME_VERSION};
use crate::operators::OperatorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    Cycle,
    MultiInputNonJoin,
    JoinInputCount,
    DuplicateId,
    DanglingWire,
    DuplicateWire,
    UnknownProperty,
    MissingProperty,
    InvalidProperty,
    UnsupportedDatatype,
    DestinationNotAllowed,
    TlsRequired,
    InvalidEndpoint,
    ProviderInput,
    InjectInput,
    ExternalDestination,
    RuntimeVersion,
    InvalidMeta,
    // warnings
    Unreachable,
    DeadEnd,
    PullWithoutTrigger,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub nodes: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_installable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|i| i.code == code)
    }

    pub fn has_warning(&self, code: IssueCode) -> bool {
        self.warnings.iter().any(|i| i.code == code)
    }

    fn error(&mut self, code: IssueCode, nodes: &[&str], message: impl Into<String>) {
        self.errors.push(issue(code, nodes, message));
    }

    fn warn(&mut self, code: IssueCode, nodes: &[&str], message: impl Into<String>) {
        self.warnings.push(issue(code, nodes, message));
    }
}

fn issue(code: IssueCode, nodes: &[&str], message: impl Into<String>) -> Issue {
    Issue {
        code,
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        message: message.into(),
    }
}

fn parse_version(v: &str) -> Option<(u64, u64, u64)> {
    let mut parts = v.trim().split('.').map(|p| p.parse::<u64>().ok());
    let major = parts.next()??;
    let minor = parts.next().unwrap_or(Some(0))?;
    let patch = parts.next().unwrap_or(Some(0))?;
    if parts.next().is_some() {
        return None;
    }
    Some((major, minor, patch))
}

pub fn validate_manifest(m: &Manifest) -> ValidationReport {
    let mut report = ValidationReport::default();
    let schemas = SchemaSet::builtin();

    match parse_version(&m.meta.min_runtime_version) {
        None => report.error(
            IssueCode::InvalidMeta,
            &[],
            format!("min_runtime_version {:?} is not a version", m.meta.min_runtime_version),
        ),
        Some(required) if Some(required) > parse_version(RUNTIME_VERSION) => report.error(
            IssueCode::RuntimeVersion,
            &[],
            format!(
                "manifest requires runtime {} but this runtime is {RUNTIME_VERSION}",
                m.meta.min_runtime_version
            ),
        ),
        Some(_) => {}
    }

    let mut allowed_origins = BTreeSet::new();
    for ep in &m.security.allowed_endpoints {
        match Endpoint::parse(ep) {
            Ok(e) => {
                allowed_origins.insert(e.origin());
            }
            Err(e) => report.error(IssueCode::InvalidEndpoint, &[], e.to_string()),
        }
    }

    let mut seen = BTreeSet::new();
    for n in &m.graph {
        if !seen.insert(n.id.as_str()) {
            report.error(IssueCode::DuplicateId, &[&n.id], format!("node id {:?} is used twice", n.id));
        }
    }

    for n in &m.graph {
        let mut targets = BTreeSet::new();
        for w in &n.wires {
            if !seen.contains(w.as_str()) {
                report.error(
                    IssueCode::DanglingWire,
                    &[&n.id, w],
                    format!("{} wires to missing node {w:?}", n.id),
                );
            } else if !targets.insert(w.as_str()) {
                report.error(
                    IssueCode::DuplicateWire,
                    &[&n.id, w],
                    format!("{} wires to {w} more than once", n.id),
                );
            }
        }
    }

    let graph = Graph::new(m);
    if let Err(cycle) = graph.topo_order() {
        report.error(IssueCode::Cycle, &cycle, format!("cycle through {}", cycle.join(", ")));
    }

    for n in graph.nodes() {
        check_properties(n, schemas, &mut report);
        check_wiring(n, &graph, &mut report);
        if n.kind.is_network() {
            check_destination(n, m, &allowed_origins, &mut report);
        } else if n.properties.contains_key("destination") {
            report.error(
                IssueCode::ExternalDestination,
                &[&n.id],
                format!("{} is not a network operator but declares a destination", n.id),
            );
        }
    }

    let roots: BTreeSet<&str> = graph
        .nodes()
        .filter(|n| n.kind.is_provider() || n.kind == OperatorKind::Inject)
        .map(|n| n.id.as_str())
        .collect();
    for n in graph.nodes() {
        if !roots.contains(n.id.as_str()) && graph.ancestors(&n.id).is_disjoint(&roots) {
            report.warn(
                IssueCode::Unreachable,
                &[&n.id],
                format!("{} has no provider or inject upstream and never runs", n.id),
            );
        }
    }

    report
}

fn check_properties(n: &NodeSpec, schemas: &SchemaSet, report: &mut ValidationReport) {
    let schema = schemas.operator(n.kind);
    for (key, value) in &n.properties {
        let Some(spec) = schemas.property(n.kind, key) else {
            report.error(
                IssueCode::UnknownProperty,
                &[&n.id],
                format!("{} operator has no property {key:?}", n.kind),
            );
            continue;
        };
        if let Err(problem) = spec.ty.check(value) {
            let code = match problem {
                PropertyProblem::UnsupportedDatatype(_) => IssueCode::UnsupportedDatatype,
                _ => IssueCode::InvalidProperty,
            };
            report.error(code, &[&n.id], format!("{}.{key}: {problem}", n.id));
        }
    }
    for (key, spec) in &schema.properties {
        if spec.required && !n.properties.contains_key(key) {
            report.error(
                IssueCode::MissingProperty,
                &[&n.id],
                format!("{}: missing required property {key:?}", n.id),
            );
        }
    }

    let mut require = |key: &str, why: &str| {
        if !n.properties.contains_key(key) {
            report.error(
                IssueCode::MissingProperty,
                &[&n.id],
                format!("{}: property {key:?} is required {why}", n.id),
            );
        }
    };
    match n.kind {
        OperatorKind::Inject if n.str_prop("mode") == Some("interval") => {
            require("interval_ms", "in interval mode")
        }
        OperatorKind::Join if n.str_prop("mode") == Some("blocking") => {
            require("window_ms", "for blocking joins")
        }
        OperatorKind::Aggregate if n.str_prop("datatype") == Some("tabular") => {
            require("group_by", "for tabular aggregation");
            require("value_field", "for tabular aggregation");
        }
        _ => {}
    }
}

fn check_wiring(n: &NodeSpec, graph: &Graph<'_>, report: &mut ValidationReport) {
    let inputs = graph.inputs(&n.id);
    match n.kind {
        OperatorKind::Join => {
            if let Some(expected) = n.u64_prop("inputs_expected") {
                if inputs.len() as u64 != expected {
                    report.error(
                        IssueCode::JoinInputCount,
                        &[&n.id],
                        format!(
                            "join {} expects {expected} inputs but has {}",
                            n.id,
                            inputs.len()
                        ),
                    );
                }
            }
        }
        _ if inputs.len() > 1 => {
            let mut nodes = vec![n.id.as_str()];
            nodes.extend(inputs);
            report.error(
                IssueCode::MultiInputNonJoin,
                &nodes,
                format!("{} has {} inputs; only join may have more than one", n.id, inputs.len()),
            );
        }
        _ => {}
    }

    match n.kind {
        OperatorKind::Push if !inputs.is_empty() => report.error(
            IssueCode::ProviderInput,
            &[&n.id],
            format!("push operator {} cannot have incoming wires", n.id),
        ),
        OperatorKind::Pull => {
            let bad: Vec<&str> = inputs
                .iter()
                .copied()
                .filter(|i| graph.node(i).map(|s| s.kind) != Some(OperatorKind::Inject))
                .collect();
            if !bad.is_empty() {
                report.error(
                    IssueCode::ProviderInput,
                    &[&n.id],
                    format!("pull operator {} can only be triggered by inject", n.id),
                );
            } else if inputs.is_empty() {
                report.warn(
                    IssueCode::PullWithoutTrigger,
                    &[&n.id],
                    format!("pull operator {} has no inject trigger", n.id),
                );
            }
        }
        OperatorKind::Inject if !inputs.is_empty() => report.error(
            IssueCode::InjectInput,
            &[&n.id],
            format!("inject operator {} cannot have incoming wires", n.id),
        ),
        _ => {}
    }

    if graph.outputs(&n.id).is_empty() && !n.kind.is_network() && n.kind != OperatorKind::Debug {
        report.warn(
            IssueCode::DeadEnd,
            &[&n.id],
            format!("{} has no outgoing wires; its output is discarded", n.id),
        );
    }
}

fn check_destination(
    n: &NodeSpec,
    m: &Manifest,
    allowed: &BTreeSet<String>,
    report: &mut ValidationReport,
) {
    let Some(dest) = n.str_prop("destination") else {
        return;
    };
    let Ok(ep) = Endpoint::parse(dest) else {
        // already reported as an invalid property
        return;
    };
    if !allowed.contains(&ep.origin()) {
        report.error(
            IssueCode::DestinationNotAllowed,
            &[&n.id],
            format!("{} sends to {} which is not in allowed_endpoints", n.id, ep.origin()),
        );
    }
    if m.security.require_tls && !ep.is_tls() {
        report.error(
            IssueCode::TlsRequired,
            &[&n.id],
            format!("{} uses {} but the manifest requires TLS", n.id, ep.scheme),
        );
    }
}

/// Per-code counts, handy for summaries.
pub fn count_by_code(issues: &[Issue]) -> BTreeMap<IssueCode, usize> {
    let mut out = BTreeMap::new();
    for i in issues {
        *out.entry(i.code).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{Meta, Security};
    use super::*;

    fn manifest(nodes: Vec<NodeSpec>) -> Manifest {
        Manifest {
            meta: Meta {
                name: "HelloVisitor".into(),
                version: "1.0".into(),
                author: "a".into(),
                purpose: "p".into(),
                min_runtime_version: "0.1.0".into(),
            },
            security: Security {
                allowed_endpoints: vec!["https://HelloVisitor.com".into()],
                require_tls: true,
            },
            graph: nodes,
        }
    }

    fn hello() -> Vec<NodeSpec> {
        vec![
            NodeSpec::new("wait", OperatorKind::Push)
                .prop("device", "camera")
                .prop("datatype", "image")
                .wire("detect"),
            NodeSpec::new("detect", OperatorKind::Detect)
                .prop("datatype", "image")
                .prop("target", "face")
                .wire("crop"),
            NodeSpec::new("crop", OperatorKind::Select)
                .prop("datatype", "image")
                .prop("target", "face")
                .wire("send"),
            NodeSpec::new("send", OperatorKind::Post)
                .prop("datatype", "image")
                .prop("destination", "https://hellovisitor.com/upload"),
        ]
    }

    #[test]
    fn hello_visitor_is_valid() {
        let r = validate_manifest(&manifest(hello()));
        assert!(r.errors.is_empty(), "{:?}", r.errors);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }

    #[test]
    fn two_node_cycle() {
        let r = validate_manifest(&manifest(vec![
            NodeSpec::new("A", OperatorKind::Debug).wire("B"),
            NodeSpec::new("B", OperatorKind::Debug).wire("A"),
        ]));
        let cycle = r.errors.iter().find(|i| i.code == IssueCode::Cycle).unwrap();
        assert_eq!(cycle.nodes, ["A", "B"]);
    }

    #[test]
    fn detect_with_two_inputs() {
        let mut nodes = hello();
        nodes.push(
            NodeSpec::new("other", OperatorKind::Push)
                .prop("device", "camera")
                .prop("datatype", "image")
                .wire("detect"),
        );
        let r = validate_manifest(&manifest(nodes));
        assert!(r.has_error(IssueCode::MultiInputNonJoin));
        assert_eq!(r.errors.len(), 1);
    }

    #[test]
    fn destination_must_be_whitelisted_and_tls() {
        let mut nodes = hello();
        nodes[3] = nodes[3].clone().prop("destination", "http://evil.example/x");
        let r = validate_manifest(&manifest(nodes));
        assert!(r.has_error(IssueCode::DestinationNotAllowed));
        assert!(r.has_error(IssueCode::TlsRequired));
    }

    #[test]
    fn schema_violations() {
        let mut nodes = hello();
        nodes[1] = nodes[1].clone().prop("colour", "red");
        nodes[2].properties.remove("target");
        nodes[3] = nodes[3].clone().prop("datatype", "pixels");
        let r = validate_manifest(&manifest(nodes));
        let codes = count_by_code(&r.errors);
        assert_eq!(codes.get(&IssueCode::UnknownProperty), Some(&1));
        assert_eq!(codes.get(&IssueCode::MissingProperty), Some(&1));
        assert_eq!(codes.get(&IssueCode::InvalidProperty), Some(&1));
    }

    #[test]
    fn unsupported_datatype_for_kind() {
        let mut nodes = hello();
        nodes[2] = nodes[2].clone().prop("datatype", "scalar");
        let r = validate_manifest(&manifest(nodes));
        assert!(r.has_error(IssueCode::UnsupportedDatatype));
    }

    #[test]
    fn dangling_and_duplicate_wires() {
        let mut nodes = hello();
        nodes[0] = nodes[0].clone().wire("ghost").wire("detect");
        let r = validate_manifest(&manifest(nodes));
        assert!(r.has_error(IssueCode::DanglingWire));
        assert!(r.has_error(IssueCode::DuplicateWire));
    }

    #[test]
    fn provider_inputs() {
        let nodes = vec![
            NodeSpec::new("tick", OperatorKind::Inject)
                .prop("mode", "interval")
                .prop("interval_ms", 1000)
                .wire("pull"),
            NodeSpec::new("pull", OperatorKind::Pull)
                .prop("device", "camera")
                .prop("datatype", "image")
                .wire("dbg")
                .wire("push"),
            NodeSpec::new("push", OperatorKind::Push)
                .prop("device", "camera")
                .prop("datatype", "image")
                .wire("dbg2"),
            NodeSpec::new("dbg", OperatorKind::Debug),
            NodeSpec::new("dbg2", OperatorKind::Debug),
        ];
        let r = validate_manifest(&manifest(nodes));
        assert_eq!(r.errors.len(), 1, "{:?}", r.errors);
        assert!(r.has_error(IssueCode::ProviderInput));
    }

    #[test]
    fn join_needs_declared_input_count() {
        let nodes = vec![
            NodeSpec::new("t", OperatorKind::Inject)
                .prop("mode", "manual")
                .wire("j"),
            NodeSpec::new("j", OperatorKind::Join)
                .prop("mode", "blocking")
                .prop("window_ms", 100)
                .prop("inputs_expected", 2)
                .wire("d"),
            NodeSpec::new("d", OperatorKind::Debug),
        ];
        let r = validate_manifest(&manifest(nodes));
        assert!(r.has_error(IssueCode::JoinInputCount));
    }

    #[test]
    fn interval_inject_requires_interval() {
        let nodes = vec![
            NodeSpec::new("t", OperatorKind::Inject)
                .prop("mode", "interval")
                .wire("d"),
            NodeSpec::new("d", OperatorKind::Debug),
        ];
        let r = validate_manifest(&manifest(nodes));
        assert!(r.has_error(IssueCode::MissingProperty));
    }

    #[test]
    fn newer_runtime_required() {
        let mut m = manifest(hello());
        m.meta.min_runtime_version = "99.0.0".into();
        assert!(validate_manifest(&m).has_error(IssueCode::RuntimeVersion));
        m.meta.min_runtime_version = "zero".into();
        assert!(validate_manifest(&m).has_error(IssueCode::InvalidMeta));
    }

    #[test]
    fn unreachable_and_dead_end_warnings() {
        let nodes = vec![
            NodeSpec::new("d", OperatorKind::Detect)
                .prop("datatype", "image")
                .prop("target", "face"),
        ];
        let r = validate_manifest(&manifest(nodes));
        assert!(r.errors.is_empty());
        assert!(r.has_warning(IssueCode::Unreachable));
        assert!(r.has_warning(IssueCode::DeadEnd));
    }

    #[test]
    fn versions() {
        assert_eq!(parse_version("0.1"), Some((0, 1, 0)));
        assert_eq!(parse_version("1.2.3"), Some((1, 2, 3)));
        assert_eq!(parse_version("1.2.3.4"), None);
    }
}
