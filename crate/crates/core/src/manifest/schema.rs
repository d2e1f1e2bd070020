//! Operator property schemas.
//!
//! The schemas are data (`schemas/operators-v1.json`) shipped with the
//! runtime so that auditors can diff them between releases.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;
use serde_json::Value;

use super::Endpoint;
use crate::data::{ContentLabel, DataKind};
use crate::operators::{Category, OperatorKind};

const SCHEMA_V1: &str = include_str!("../../schemas/operators-v1.json");

#[derive(Debug, Clone, Deserialize)]
pub struct SchemaSet {
    pub version: String,
    pub common: BTreeMap<String, PropertySpec>,
    pub operators: BTreeMap<OperatorKind, OperatorSchema>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OperatorSchema {
    pub category: Category,
    pub properties: BTreeMap<String, PropertySpec>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PropertySpec {
    #[serde(flatten)]
    pub ty: PropertyType,
    #[serde(default)]
    pub required: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PropertyType {
    String,
    Integer {
        min: Option<i64>,
        max: Option<i64>,
    },
    Number {
        min: Option<f64>,
        max: Option<f64>,
    },
    Boolean,
    Enum {
        values: Vec<String>,
    },
    Datatype {
        allowed: Vec<DataKind>,
    },
    Content,
    Url {
        schemes: Vec<String>,
    },
    /// List of `[start_ms, end_ms]` time-of-day pairs.
    Windows,
    StringList,
    /// String or number.
    Value,
}

/// Why a single property value was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyProblem {
    WrongType(&'static str),
    OutOfRange,
    NotInEnum(Vec<String>),
    UnsupportedDatatype(DataKind),
    BadScheme(Vec<String>),
    Invalid(String),
}

impl std::fmt::Display for PropertyProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PropertyProblem::WrongType(t) => write!(f, "expected {t}"),
            PropertyProblem::OutOfRange => f.write_str("value out of range"),
            PropertyProblem::NotInEnum(v) => write!(f, "expected one of {}", v.join(", ")),
            PropertyProblem::UnsupportedDatatype(k) => write!(f, "data type {k} not supported"),
            PropertyProblem::BadScheme(s) => write!(f, "scheme must be one of {}", s.join(", ")),
            PropertyProblem::Invalid(why) => f.write_str(why),
        }
    }
}

impl SchemaSet {
    pub fn builtin() -> &'static SchemaSet {
        static SCHEMAS: OnceLock<SchemaSet> = OnceLock::new();
        SCHEMAS.get_or_init(|| serde_json::from_str(SCHEMA_V1).expect("bundled schema is valid"))
    }

    pub fn operator(&self, kind: OperatorKind) -> &OperatorSchema {
        &self.operators[&kind]
    }

    /// Looks a property up in the kind's schema, then in the common section.
    pub fn property(&self, kind: OperatorKind, key: &str) -> Option<&PropertySpec> {
        self.operator(kind)
            .properties
            .get(key)
            .or_else(|| self.common.get(key))
    }

    pub fn allowed_datatypes(&self, kind: OperatorKind) -> Vec<DataKind> {
        match self.property(kind, "datatype").map(|p| &p.ty) {
            Some(PropertyType::Datatype { allowed }) => allowed.clone(),
            _ => Vec::new(),
        }
    }
}

impl PropertyType {
    pub fn check(&self, value: &Value) -> Result<(), PropertyProblem> {
        match self {
            PropertyType::String => value
                .as_str()
                .map(|_| ())
                .ok_or(PropertyProblem::WrongType("string")),
            PropertyType::Integer { min, max } => {
                let v = value.as_i64().ok_or(PropertyProblem::WrongType("integer"))?;
                if min.is_some_and(|m| v < m) || max.is_some_and(|m| v > m) {
                    return Err(PropertyProblem::OutOfRange);
                }
                Ok(())
            }
            PropertyType::Number { min, max } => {
                let v = value.as_f64().ok_or(PropertyProblem::WrongType("number"))?;
                if min.is_some_and(|m| v < m) || max.is_some_and(|m| v > m) {
                    return Err(PropertyProblem::OutOfRange);
                }
                Ok(())
            }
            PropertyType::Boolean => value
                .as_bool()
                .map(|_| ())
                .ok_or(PropertyProblem::WrongType("boolean")),
            PropertyType::Enum { values } => {
                let v = value.as_str().ok_or(PropertyProblem::WrongType("string"))?;
                if values.iter().any(|x| x == v) {
                    Ok(())
                } else {
                    Err(PropertyProblem::NotInEnum(values.clone()))
                }
            }
            PropertyType::Datatype { allowed } => {
                let v = value.as_str().ok_or(PropertyProblem::WrongType("data type"))?;
                let kind: DataKind = v
                    .parse()
                    .map_err(|_| PropertyProblem::WrongType("data type"))?;
                if allowed.contains(&kind) {
                    Ok(())
                } else {
                    Err(PropertyProblem::UnsupportedDatatype(kind))
                }
            }
            PropertyType::Content => {
                let v = value.as_str().ok_or(PropertyProblem::WrongType("content label"))?;
                ContentLabel::new(v)
                    .map(|_| ())
                    .map_err(|e| PropertyProblem::Invalid(e.to_string()))
            }
            PropertyType::Url { schemes } => {
                let v = value.as_str().ok_or(PropertyProblem::WrongType("URL"))?;
                let e = Endpoint::parse(v).map_err(|e| PropertyProblem::Invalid(e.to_string()))?;
                if schemes.iter().any(|s| *s == e.scheme) {
                    Ok(())
                } else {
                    Err(PropertyProblem::BadScheme(schemes.clone()))
                }
            }
            PropertyType::Windows => parse_windows(value).map(|_| ()),
            PropertyType::StringList => {
                let ok = value
                    .as_array()
                    .is_some_and(|a| a.iter().all(Value::is_string));
                if ok {
                    Ok(())
                } else {
                    Err(PropertyProblem::WrongType("list of strings"))
                }
            }
            PropertyType::Value => {
                if value.is_string() || value.is_number() {
                    Ok(())
                } else {
                    Err(PropertyProblem::WrongType("string or number"))
                }
            }
        }
    }
}

pub const DAY_MS: u64 = 86_400_000;

/// Parses a `[[start, end], ...]` list of time-of-day windows in ms.
pub fn parse_windows(value: &Value) -> Result<Vec<(u64, u64)>, PropertyProblem> {
    let list = value
        .as_array()
        .ok_or(PropertyProblem::WrongType("list of [start, end] pairs"))?;
    list.iter()
        .map(|w| {
            let pair = w
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or(PropertyProblem::WrongType("[start, end] pair"))?;
            let start = pair[0].as_u64().ok_or(PropertyProblem::WrongType("integer ms"))?;
            let end = pair[1].as_u64().ok_or(PropertyProblem::WrongType("integer ms"))?;
            if start >= end || end > DAY_MS {
                return Err(PropertyProblem::OutOfRange);
            }
            Ok((start, end))
        })
        .collect()
}
