//! Swaps every outgoing face for a stock one without touching the app's
//! manifest.
//!
//!     cargo run --example face_spoofing

use std::collections::BTreeMap;
use std::sync::Arc;

use privhub::data::{ContentLabel, DataKind};
use privhub::fixtures;
use privhub::hub::{FilterSpec, Hub};
use privhub::operators::{OperatorKind, RecordingTransport};
use privhub::runtime::{Runtime, HOUR_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let net = Arc::new(RecordingTransport::new());
    let mut hub = Hub::new(Runtime::new(Arc::new(catalog), registry, net.clone()));
    let app = hub.install(fixtures::manifest("hello_visitor")?, BTreeMap::new())?.id;
    hub.allow_all(&app)?;
    let spoof = FilterSpec {
        kind: OperatorKind::Spoof,
        id: String::new(),
        properties: serde_json::from_value(serde_json::json!({"datatype": "image", "target": "face"}))?,
    };
    hub.intercept(&app, ContentLabel::new("face")?, DataKind::Image, spoof)?;
    hub.advance(2 * HOUR_MS)?;
    for req in net.requests().iter().take(3) {
        let body: serde_json::Value = serde_json::from_slice(&req.body)?;
        for item in body["items"].as_array().into_iter().flatten() {
            println!("{} {}", req.destination, item["contenttype"]);
        }
    }
    Ok(())
}
