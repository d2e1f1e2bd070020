use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Provider,
    Inference,
    Filter,
    Network,
    Utility,
}

/// The fixed operator set. Nothing outside these sixteen can be installed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Push,
    Pull,
    Detect,
    Classify,
    Extract,
    Spoof,
    Noisify,
    Select,
    Aggregate,
    Retrieve,
    Post,
    Publish,
    Stream,
    Inject,
    Join,
    Debug,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown operator kind {0:?}")]
pub struct UnknownKind(pub String);

impl OperatorKind {
    pub const ALL: [OperatorKind; 16] = [
        OperatorKind::Push,
        OperatorKind::Pull,
        OperatorKind::Detect,
        OperatorKind::Classify,
        OperatorKind::Extract,
        OperatorKind::Spoof,
        OperatorKind::Noisify,
        OperatorKind::Select,
        OperatorKind::Aggregate,
        OperatorKind::Retrieve,
        OperatorKind::Post,
        OperatorKind::Publish,
        OperatorKind::Stream,
        OperatorKind::Inject,
        OperatorKind::Join,
        OperatorKind::Debug,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Push => "push",
            OperatorKind::Pull => "pull",
            OperatorKind::Detect => "detect",
            OperatorKind::Classify => "classify",
            OperatorKind::Extract => "extract",
            OperatorKind::Spoof => "spoof",
            OperatorKind::Noisify => "noisify",
            OperatorKind::Select => "select",
            OperatorKind::Aggregate => "aggregate",
            OperatorKind::Retrieve => "retrieve",
            OperatorKind::Post => "post",
            OperatorKind::Publish => "publish",
            OperatorKind::Stream => "stream",
            OperatorKind::Inject => "inject",
            OperatorKind::Join => "join",
            OperatorKind::Debug => "debug",
        }
    }

    pub fn category(self) -> Category {
        use OperatorKind::*;
        match self {
            Push | Pull => Category::Provider,
            Detect | Classify | Extract => Category::Inference,
            Spoof | Noisify | Select | Aggregate | Retrieve => Category::Filter,
            Post | Publish | Stream => Category::Network,
            Inject | Join | Debug => Category::Utility,
        }
    }

    pub fn is_provider(self) -> bool {
        self.category() == Category::Provider
    }

    pub fn is_network(self) -> bool {
        self.category() == Category::Network
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}
