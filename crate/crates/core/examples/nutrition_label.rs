//! Label for the baby monitor after a simulated day: what goes where,
//! when, under which condition, and how much actually went.
//!
//!     cargo run --example nutrition_label

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::fixtures;
use privhub::hub::Hub;
use privhub::operators::RecordingTransport;
use privhub::runtime::{Runtime, DAY_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let mut hub = Hub::new(Runtime::new(Arc::new(catalog), registry, Arc::new(RecordingTransport::new())));
    let app = hub.install(fixtures::manifest("baby_monitor")?, BTreeMap::new())?.id;
    hub.allow_all(&app)?;
    hub.advance(DAY_MS)?;
    println!("{}", serde_json::to_string_pretty(&hub.label(&app)?)?);
    Ok(())
}
