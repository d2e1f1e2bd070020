//! Slows the water-leak app from one pull every 30 minutes to one every
//! two hours and shows the manifest diff and the pull counts.
//!
//!     cargo run --example rate_limit

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::fixtures;
use privhub::manifest::Manifest;
use privhub::operators::RecordingTransport;
use privhub::rewriter::{apply_rate_limit, canonical_diff};
use privhub::runtime::{Runtime, DAY_MS, HOUR_MS};

fn pulls(m: &Manifest) -> Result<usize, Box<dyn std::error::Error>> {
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let mut rt = Runtime::new(Arc::new(catalog), registry, Arc::new(RecordingTransport::new()));
    rt.install_app(m.clone(), BTreeMap::new())?;
    Ok(rt.run_until(DAY_MS).emits.iter().filter(|e| e.node == "humidity").count())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let before = fixtures::manifest("water_leak")?;
    let after = apply_rate_limit(&before, "timer", 2 * HOUR_MS)?;
    print!("{}", canonical_diff(&before, &after));
    println!("pulls per day: {} -> {}", pulls(&before)?, pulls(&after)?);
    Ok(())
}
