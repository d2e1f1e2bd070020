use serde_json::{Map, Value};
use thiserror::Error;

use super::OperatorKind;
use crate::data::{ContentLabel, DataKind, Task};
use crate::manifest::{Endpoint, NodeSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{node}: missing or invalid property {key:?}")]
    Property { node: String, key: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectMode {
    Manual,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinMode {
    Blocking,
    NonBlocking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateFn {
    Sum,
    Count,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Post,
    Publish,
    Stream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub device: String,
    pub datatype: DataKind,
    pub event: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectConfig {
    pub mode: InjectMode,
    pub interval_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub task: Task,
    pub datatype: DataKind,
    pub target: ContentLabel,
    pub provider: Option<String>,
    /// All node properties; providers read their own parameters from here.
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectConfig {
    pub datatype: DataKind,
    pub target: ContentLabel,
    pub category: Option<String>,
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieveConfig {
    pub datatype: DataKind,
    pub target: ContentLabel,
    pub category: Option<String>,
    /// Emit when the target is missing instead of when it is present.
    pub absent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateConfig {
    pub datatype: DataKind,
    pub target: Option<ContentLabel>,
    pub function: AggregateFn,
    pub group_by: Option<String>,
    pub value_field: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisifyConfig {
    pub datatype: DataKind,
    pub target: Option<ContentLabel>,
    pub magnitude_percent: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpoofConfig {
    pub datatype: DataKind,
    pub target: ContentLabel,
    pub replacement: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub protocol: Protocol,
    pub destination: Endpoint,
    pub datatype: DataKind,
    pub topic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinConfig {
    pub mode: JoinMode,
    pub window_ms: u64,
    pub inputs_expected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterConfig {
    Spoof(SpoofConfig),
    Noisify(NoisifyConfig),
    Select(SelectConfig),
    Aggregate(AggregateConfig),
    Retrieve(RetrieveConfig),
}

impl FilterConfig {
    pub fn datatype(&self) -> DataKind {
        match self {
            FilterConfig::Spoof(c) => c.datatype,
            FilterConfig::Noisify(c) => c.datatype,
            FilterConfig::Select(c) => c.datatype,
            FilterConfig::Aggregate(c) => c.datatype,
            FilterConfig::Retrieve(c) => c.datatype,
        }
    }

    pub fn kind(&self) -> OperatorKind {
        match self {
            FilterConfig::Spoof(_) => OperatorKind::Spoof,
            FilterConfig::Noisify(_) => OperatorKind::Noisify,
            FilterConfig::Select(_) => OperatorKind::Select,
            FilterConfig::Aggregate(_) => OperatorKind::Aggregate,
            FilterConfig::Retrieve(_) => OperatorKind::Retrieve,
        }
    }
}

/// Typed view of a validated node.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorConfig {
    Push(ProviderConfig),
    Pull(ProviderConfig),
    Inference(InferenceConfig),
    Filter(FilterConfig),
    Network(NetworkConfig),
    Inject(InjectConfig),
    Join(JoinConfig),
    Debug,
}

struct Props<'a>(&'a NodeSpec);

impl Props<'_> {
    fn err(&self, key: &'static str) -> ConfigError {
        ConfigError::Property {
            node: self.0.id.clone(),
            key,
        }
    }

    fn string(&self, key: &'static str) -> Result<String, ConfigError> {
        self.0.str_prop(key).map(str::to_string).ok_or_else(|| self.err(key))
    }

    fn opt_string(&self, key: &'static str) -> Option<String> {
        self.0.str_prop(key).map(str::to_string)
    }

    fn kind(&self) -> Result<DataKind, ConfigError> {
        self.0.datatype().ok_or_else(|| self.err("datatype"))
    }

    fn target(&self) -> Result<ContentLabel, ConfigError> {
        self.0.target().ok_or_else(|| self.err("target"))
    }

    fn opt_target(&self) -> Result<Option<ContentLabel>, ConfigError> {
        match self.0.properties.get("target") {
            None => Ok(None),
            Some(_) => self.target().map(Some),
        }
    }
}

impl OperatorConfig {
    pub fn from_node(node: &NodeSpec) -> Result<Self, ConfigError> {
        let p = Props(node);
        let cfg = match node.kind {
            OperatorKind::Push | OperatorKind::Pull => {
                let c = ProviderConfig {
                    device: p.string("device")?,
                    datatype: p.kind()?,
                    event: p.opt_string("event"),
                };
                if node.kind == OperatorKind::Push {
                    OperatorConfig::Push(c)
                } else {
                    OperatorConfig::Pull(c)
                }
            }
            OperatorKind::Detect | OperatorKind::Classify | OperatorKind::Extract => {
                let task = match node.kind {
                    OperatorKind::Detect => Task::Detect,
                    OperatorKind::Classify => Task::Classify,
                    _ => Task::Extract,
                };
                OperatorConfig::Inference(InferenceConfig {
                    task,
                    datatype: p.kind()?,
                    target: p.target()?,
                    provider: p.opt_string("provider"),
                    params: node.properties.clone(),
                })
            }
            OperatorKind::Spoof => OperatorConfig::Filter(FilterConfig::Spoof(SpoofConfig {
                datatype: p.kind()?,
                target: p.target()?,
                replacement: p.opt_string("replacement"),
            })),
            OperatorKind::Noisify => OperatorConfig::Filter(FilterConfig::Noisify(NoisifyConfig {
                datatype: p.kind()?,
                target: p.opt_target()?,
                magnitude_percent: node
                    .f64_prop("magnitude_percent")
                    .ok_or_else(|| p.err("magnitude_percent"))?,
                seed: node.u64_prop("seed").unwrap_or(0),
            })),
            OperatorKind::Select => OperatorConfig::Filter(FilterConfig::Select(SelectConfig {
                datatype: p.kind()?,
                target: p.target()?,
                category: p.opt_string("category"),
                columns: node.properties.get("columns").and_then(|v| {
                    v.as_array()
                        .map(|a| a.iter().filter_map(|s| s.as_str().map(str::to_string)).collect())
                }),
            })),
            OperatorKind::Aggregate => {
                let function = match node.str_prop("function") {
                    Some("sum") => AggregateFn::Sum,
                    Some("count") => AggregateFn::Count,
                    Some("average") => AggregateFn::Average,
                    _ => return Err(p.err("function")),
                };
                OperatorConfig::Filter(FilterConfig::Aggregate(AggregateConfig {
                    datatype: p.kind()?,
                    target: p.opt_target()?,
                    function,
                    group_by: p.opt_string("group_by"),
                    value_field: p.opt_string("value_field"),
                }))
            }
            OperatorKind::Retrieve => OperatorConfig::Filter(FilterConfig::Retrieve(RetrieveConfig {
                datatype: p.kind()?,
                target: p.target()?,
                category: p.opt_string("category"),
                absent: node.bool_prop("absent").unwrap_or(false),
            })),
            OperatorKind::Post | OperatorKind::Publish | OperatorKind::Stream => {
                let protocol = match node.kind {
                    OperatorKind::Post => Protocol::Post,
                    OperatorKind::Publish => Protocol::Publish,
                    _ => Protocol::Stream,
                };
                let destination = node
                    .str_prop("destination")
                    .and_then(|d| Endpoint::parse(d).ok())
                    .ok_or_else(|| p.err("destination"))?;
                OperatorConfig::Network(NetworkConfig {
                    protocol,
                    destination,
                    datatype: p.kind()?,
                    topic: p.opt_string("topic"),
                })
            }
            OperatorKind::Inject => {
                let mode = match node.str_prop("mode") {
                    Some("manual") => InjectMode::Manual,
                    Some("interval") => InjectMode::Interval,
                    _ => return Err(p.err("mode")),
                };
                let interval_ms = node.u64_prop("interval_ms");
                if mode == InjectMode::Interval && !interval_ms.is_some_and(|i| i >= 1) {
                    return Err(p.err("interval_ms"));
                }
                OperatorConfig::Inject(InjectConfig { mode, interval_ms })
            }
            OperatorKind::Join => {
                let mode = match node.str_prop("mode") {
                    Some("blocking") => JoinMode::Blocking,
                    Some("nonblocking") => JoinMode::NonBlocking,
                    _ => return Err(p.err("mode")),
                };
                let inputs_expected = node
                    .u64_prop("inputs_expected")
                    .filter(|n| *n >= 2)
                    .ok_or_else(|| p.err("inputs_expected"))?;
                OperatorConfig::Join(JoinConfig {
                    mode,
                    window_ms: node.u64_prop("window_ms").unwrap_or(0),
                    inputs_expected: inputs_expected as usize,
                })
            }
            OperatorKind::Debug => OperatorConfig::Debug,
        };
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_config() {
        let n = NodeSpec::new("send", OperatorKind::Publish)
            .prop("destination", "mqtt://broker.local:1883")
            .prop("datatype", "scalar")
            .prop("topic", "home/humidity");
        match OperatorConfig::from_node(&n).unwrap() {
            OperatorConfig::Network(c) => {
                assert_eq!(c.protocol, Protocol::Publish);
                assert_eq!(c.destination.port, Some(1883));
                assert_eq!(c.topic.as_deref(), Some("home/humidity"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interval_inject_needs_positive_interval() {
        let n = NodeSpec::new("t", OperatorKind::Inject)
            .prop("mode", "interval")
            .prop("interval_ms", 0);
        assert!(OperatorConfig::from_node(&n).is_err());
    }

    #[test]
    fn inference_keeps_params() {
        let n = NodeSpec::new("c", OperatorKind::Classify)
            .prop("datatype", "scalar")
            .prop("target", "threshold")
            .prop("threshold", 30.0);
        let OperatorConfig::Inference(c) = OperatorConfig::from_node(&n).unwrap() else {
            panic!()
        };
        assert_eq!(c.task, Task::Classify);
        assert_eq!(c.params["threshold"], 30.0);
    }
}
