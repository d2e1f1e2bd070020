//! Runs two apps against a file-backed ledger, then reads the report back
//! grouped by app and by day.
//!
//!     cargo run --example egress_report [-- <ledger.ndjson>]

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::fixtures;
use privhub::operators::RecordingTransport;
use privhub::runtime::{EgressFilter, EgressLedger, GroupBy, Runtime, DAY_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("privhub-egress-report.ndjson"));
    let _ = std::fs::remove_file(&path);
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let mut rt = Runtime::new(Arc::new(catalog), registry, Arc::new(RecordingTransport::new()))
        .with_ledger(EgressLedger::open(&path)?);
    for name in ["hello_visitor", "water_leak"] {
        rt.install_app(fixtures::manifest(name)?, BTreeMap::new())?;
    }
    rt.run_until(2 * DAY_MS);
    for group_by in [GroupBy::App, GroupBy::Day] {
        println!("-- {group_by:?}");
        for r in rt.ledger().query(&EgressFilter { group_by, ..Default::default() }) {
            println!("{:<14} {:>4} records {:>5} items {:>9} bytes", r.group, r.records, r.items, r.bytes);
        }
    }
    println!("ledger: {}", path.display());
    Ok(())
}
