//! Audio is only sent when a blocking join sees a crying detection next to
//! the raw clip.
//!
//!     cargo run --example baby_monitor

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::analyzer::analyze;
use privhub::fixtures;
use privhub::operators::RecordingTransport;
use privhub::runtime::{Runtime, DAY_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = fixtures::manifest("baby_monitor")?;
    for s in analyze(&m).sentences() {
        println!("{s}");
    }
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let net = Arc::new(RecordingTransport::new());
    let mut rt = Runtime::new(Arc::new(catalog), registry, net.clone());
    rt.install_app(m, BTreeMap::new())?;
    let trace = rt.run_until(DAY_MS);
    println!(
        "{} sound events, {} clips sent, {} items dropped by the datatype filter",
        trace.emits.len(),
        trace.sent_items(),
        trace.egress.iter().map(|e| e.outcome.type_filtered).sum::<usize>()
    );
    Ok(())
}
