//! Shipped example apps and the default data directory.

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::manifest::{parse_manifest, Manifest, ParseError};
use crate::operators::Transport;
use crate::runtime::{default_data_dir, DriverCatalog, Runtime};

pub const MANIFESTS: [&str; 6] = ["hello_visitor", "baby_monitor", "tv_summary", "voice_assistant", "productivity", "water_leak"];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub fn manifest_path(name: &str) -> PathBuf {
    default_data_dir().join("manifests").join(format!("{name}.json"))
}

/// Loads `manifests/<name>.json` from the data directory.
pub fn manifest(name: &str) -> Result<Manifest, FixtureError> {
    let path = manifest_path(name);
    let text = std::fs::read_to_string(&path).map_err(|source| FixtureError::Read {
        path: path.clone(),
        source,
    })?;
    parse_manifest(&text).map_err(|source| FixtureError::Parse { path, source })
}

/// The catalog over the data directory.
pub fn catalog() -> DriverCatalog {
    DriverCatalog::new(default_data_dir())
}

/// A simulated-clock runtime over the shipped drivers and annotations.
pub fn runtime(transport: Arc<dyn Transport>) -> Result<Runtime, FixtureError> {
    runtime_with(catalog(), transport)
}

pub fn runtime_with(catalog: DriverCatalog, transport: Arc<dyn Transport>) -> Result<Runtime, FixtureError> {
    let registry = Arc::new(catalog.registry()?);
    Ok(Runtime::new(Arc::new(catalog), registry, transport))
}
