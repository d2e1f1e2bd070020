//! Two network nodes: poses when the pose extractor finds one, cropped
//! person images otherwise. Counts what each node sent over a working day.
//!
//!     cargo run --example productivity

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::analyzer::analyze;
use privhub::fixtures;
use privhub::operators::RecordingTransport;
use privhub::runtime::{EgressFilter, GroupBy, Runtime, HOUR_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = fixtures::manifest("productivity")?;
    for s in analyze(&m).sentences() {
        println!("{s}");
    }
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let net = Arc::new(RecordingTransport::new());
    let mut rt = Runtime::new(Arc::new(catalog), registry, net);
    rt.install_app(m, BTreeMap::new())?;
    rt.run_until(8 * HOUR_MS);
    for row in rt.ledger().query(&EgressFilter { group_by: GroupBy::Node, ..Default::default() }) {
        println!("{:<22} {:>3} items {:>8} bytes", row.group, row.items, row.bytes);
    }
    Ok(())
}
