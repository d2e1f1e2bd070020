//! Speech segments are cut out of the recording and anonymized before
//! upload.
//!
//!     cargo run --example voice_assistant

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::analyzer::analyze;
use privhub::fixtures;
use privhub::operators::RecordingTransport;
use privhub::runtime::{Runtime, DAY_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = fixtures::manifest("voice_assistant")?;
    let a = analyze(&m);
    println!("{}", a.sentences().join("\n"));
    println!("permissions: {:?}", a.permission_summaries());
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let net = Arc::new(RecordingTransport::new());
    let mut rt = Runtime::new(Arc::new(catalog), registry, net.clone());
    rt.install_app(m, BTreeMap::new())?;
    let trace = rt.run_until(DAY_MS);
    println!("{} triggers, {} clips, {} bytes", trace.emits.len(), trace.sent_items(), trace.sent_bytes());
    Ok(())
}
