//! Starts the hub HTTP API on a free port and drives it with the blocking
//! client: install, deny, advance the clock, read the egress report.
//!
//!     cargo run --example http_api

use std::sync::Arc;

use privhub::fixtures;
use privhub::hub::client::HubClient;
use privhub::hub::http::{serve, HubHandle};
use privhub::hub::Hub;
use privhub::operators::RecordingTransport;
use privhub::runtime::{EgressFilter, GroupBy, Runtime, DAY_MS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = fixtures::catalog();
    let registry = Arc::new(catalog.registry()?);
    let hub = Hub::new(Runtime::new(Arc::new(catalog), registry, Arc::new(RecordingTransport::new())));
    let token = "example-token".to_string();

    let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let server_token = token.clone();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
            serve(listener, HubHandle::spawn(hub), Some(server_token)).await.expect("serve");
        });
    });

    let client = HubClient::new(&format!("http://{addr}"), Some(token));
    let text = std::fs::read_to_string(fixtures::manifest_path("hello_visitor"))?;
    let app = client.install(&text, &[])?;
    let id = app["id"].as_str().unwrap_or_default().to_string();
    println!("installed {id}");
    println!("{}", client.description(&id)?["sentences"][0]);
    client.set_permission(&id, "face image", false)?;
    let run = client.advance(DAY_MS)?;
    println!("run: {}", run["run"]);
    let report = client.egress(&EgressFilter { group_by: GroupBy::Content, ..Default::default() })?;
    println!("report: {}", report["rows"]);
    Ok(())
}
