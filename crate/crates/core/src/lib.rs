//! A privacy-mediating smart home hub.
//!
//! Apps are declarative manifests: a DAG of sixteen fixed operators that
//! pull sensor data, run inference, transform content and send the result
//! out. Because every step has known semantics the hub can tell, before an
//! app runs, which content leaves the home and where it goes. At run time it
//! enforces per-content permissions and records every outbound delivery.

pub mod analyzer;
pub mod corpus;
pub mod data;
pub mod diag;
pub mod fixtures;
pub mod hub;
pub mod manifest;
pub mod operators;
pub mod rewriter;
pub mod runtime;
