//! Keeps the doorbell app quiet between 17:00 and 19:00 and prints uploads
//! per hour of a simulated day.
//!
//!     cargo run --example time_schedule

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::analyzer::analyze;
use privhub::fixtures;
use privhub::operators::RecordingTransport;
use privhub::rewriter::insert_time_schedule;
use privhub::runtime::{EgressFilter, GroupBy, Runtime, DAY_MS, HOUR_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = insert_time_schedule(&fixtures::manifest("hello_visitor")?, "post-faces", &[(17 * HOUR_MS, 19 * HOUR_MS)])?;
    println!("{}", analyze(&m).sentences().join("\n"));
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let mut rt = Runtime::new(Arc::new(catalog), registry, Arc::new(RecordingTransport::new()));
    rt.install_app(m, BTreeMap::new())?;
    rt.run_until(DAY_MS);
    let rows = rt.ledger().query(&EgressFilter { group_by: GroupBy::Hour, ..Default::default() });
    for h in 0..24 {
        let n = rows.iter().find(|r| r.group == (h * HOUR_MS).to_string()).map_or(0, |r| r.records);
        println!("{h:02}:00 {}", "#".repeat(n as usize));
    }
    Ok(())
}
