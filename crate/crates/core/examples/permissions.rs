//! Permissions start pending, which blocks egress. Denying and then allowing
//! "face image" through the hub.
//!
//!     cargo run --example permissions

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::fixtures;
use privhub::hub::Hub;
use privhub::operators::RecordingTransport;
use privhub::runtime::{Runtime, HOUR_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let net = Arc::new(RecordingTransport::new());
    let mut hub = Hub::new(Runtime::new(Arc::new(catalog), registry, net.clone()));
    let app = hub.install(fixtures::manifest("hello_visitor")?, BTreeMap::new())?;
    for p in hub.permissions(&app.id)? {
        println!("{} [{:?}]", p.permission, p.state);
    }
    for allowed in [false, true] {
        hub.set_permission(&app.id, "face image", allowed)?;
        let run = hub.advance(6 * HOUR_MS)?;
        println!(
            "allowed={allowed}: sent {} blocked {} (connections so far {})",
            run.sent_items,
            run.blocked_items,
            net.connections()
        );
    }
    Ok(())
}
