//! Weekly viewing summary: the TV log is aggregated by category before it
//! leaves the hub. Prints the one request body of a simulated week.
//!
//!     cargo run --example tv_summary

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::analyzer::analyze;
use privhub::fixtures;
use privhub::operators::RecordingTransport;
use privhub::runtime::{Runtime, DAY_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = fixtures::manifest("tv_summary")?;
    println!("{}", analyze(&m).sentences().join("\n"));
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let net = Arc::new(RecordingTransport::new());
    let mut rt = Runtime::new(Arc::new(catalog), registry, net.clone());
    rt.install_app(m, BTreeMap::new())?;
    rt.run_until(7 * DAY_MS);
    for req in net.requests() {
        let body: serde_json::Value = serde_json::from_slice(&req.body)?;
        println!("{} {}", req.destination, serde_json::to_string_pretty(&body["items"][0]["data"])?);
    }
    Ok(())
}
