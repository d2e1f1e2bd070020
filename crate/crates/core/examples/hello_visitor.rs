//! Doorbell app that uploads cropped faces: description, permission and
//! one simulated day of egress.
//!
//!     cargo run --example hello_visitor

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::analyzer::analyze;
use privhub::fixtures;
use privhub::operators::RecordingTransport;
use privhub::runtime::{EgressFilter, GroupBy, Runtime, DAY_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = fixtures::manifest("hello_visitor")?;
    let a = analyze(&m);
    for s in a.sentences() {
        println!("{s}");
    }
    println!("permissions: {:?}", a.permission_summaries());

    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let net = Arc::new(RecordingTransport::new());
    let mut rt = Runtime::new(Arc::new(catalog), registry, net.clone());
    rt.install_app(m, BTreeMap::new())?;
    let trace = rt.run_until(DAY_MS);
    println!("{} doorbell events, {} uploads", trace.emits.len(), net.connections());
    for row in rt.ledger().query(&EgressFilter { group_by: GroupBy::Content, ..Default::default() }) {
        println!("{:<12} {:>4} items {:>9} bytes", row.group, row.items, row.bytes);
    }
    Ok(())
}
