mod common;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use privhub::hub::http::{router, HubHandle};
use privhub::hub::Hub;
use privhub::runtime::{EgressLedger, DAY_MS};

fn hub() -> (HubHandle, std::sync::Arc<privhub::operators::RecordingTransport>) {
    let (rt, net) = common::runtime();
    (HubHandle::spawn(Hub::new(rt)), net)
}

fn manifest_text(name: &str) -> String {
    std::fs::read_to_string(privhub::fixtures::manifest_path(name)).unwrap()
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    call_with(app, method, uri, body, None).await
}

async fn call_with(app: &Router, method: Method, uri: &str, body: Option<String>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let resp = app
        .clone()
        .oneshot(req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

async fn install(app: &Router, name: &str) -> String {
    let (s, v) = call(app, Method::POST, "/apps", Some(manifest_text(name))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn install_returns_pending_permissions() {
    let (h, _) = hub();
    let app = router(h, None);
    let (s, v) = call(&app, Method::POST, "/apps", Some(manifest_text("hello_visitor"))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["name"], "HelloVisitor");
    let perms = v["permissions"].as_array().unwrap();
    assert_eq!(perms.len(), 1);
    assert_eq!(perms[0]["permission"], "face image");
    assert_eq!(perms[0]["destination"], "HelloVisitor.com");
    assert_eq!(perms[0]["state"], "pending");
    assert_eq!(perms[0]["allowed"], false);

    let (_, list) = call(&app, Method::GET, "/apps", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn install_errors() {
    let (h, _) = hub();
    let app = router(h, None);
    let mut m: Value = serde_json::from_str(&manifest_text("hello_visitor")).unwrap();
    m["graph"][3]["wires"] = json!(["camera"]);
    let (s, v) = call(&app, Method::POST, "/apps", Some(m.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "ValidationFailed");
    assert!(v["codes"].as_array().unwrap().contains(&json!("CYCLE")), "{v}");

    let body = json!({
        "manifest": serde_json::from_str::<Value>(&manifest_text("hello_visitor")).unwrap(),
        "bindings": {"camera": "garage-camera"},
    });
    let (s, v) = call(&app, Method::POST, "/apps", Some(body.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "MissingBinding");

    let (s, v) = call(&app, Method::POST, "/apps", Some("{not json".into())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "ParseError");
}

#[tokio::test]
async fn description_matches_the_analyzer() {
    let (h, _) = hub();
    let app = router(h, None);
    let id = install(&app, "tv_summary").await;
    let (s, v) = call(&app, Method::GET, &format!("/apps/{id}/description"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        v["sentences"],
        json!(["For every week, the app sends duration data aggregated by content category to www.abc.com."])
    );
}

#[tokio::test]
async fn deny_then_allow() {
    let (h, net) = hub();
    let app = router(h, None);
    let id = install(&app, "hello_visitor").await;
    let perm = json!({"permission": "face image", "allowed": false}).to_string();
    let (s, v) = call(&app, Method::PUT, &format!("/apps/{id}/permissions"), Some(perm.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["state"], "denied");
    // idempotent
    let (_, again) = call(&app, Method::PUT, &format!("/apps/{id}/permissions"), Some(perm)).await;
    assert_eq!(v, again);

    let (s, run) = call(&app, Method::POST, "/clock/advance", Some(json!({"ms": DAY_MS}).to_string())).await;
    assert_eq!(s, StatusCode::OK);
    let blocked = run["run"]["blocked_items"].as_u64().unwrap();
    assert!(blocked > 0);
    assert_eq!(run["run"]["sent_items"], 0);
    assert_eq!(net.connections(), 0);

    let allow = json!({"permission": "face image → HelloVisitor.com", "allowed": true}).to_string();
    call(&app, Method::PUT, &format!("/apps/{id}/permissions"), Some(allow)).await;
    let (_, run) = call(&app, Method::POST, "/clock/advance", Some(json!({"ms": DAY_MS}).to_string())).await;
    assert!(run["run"]["sent_items"].as_u64().unwrap() > 0);
    assert_eq!(run["run"]["blocked_items"], 0);
    assert!(net.connections() > 0);
}

#[tokio::test]
async fn unknown_things_are_404() {
    let (h, _) = hub();
    let app = router(h, None);
    let body = Some(json!({"permission": "face image", "allowed": true}).to_string());
    let (s, v) = call(&app, Method::PUT, "/apps/nope-1/permissions", body).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "UnknownApp");

    let id = install(&app, "hello_visitor").await;
    let body = Some(json!({"permission": "raw audio", "allowed": true}).to_string());
    let (s, v) = call(&app, Method::PUT, &format!("/apps/{id}/permissions"), body).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "UnknownPermission");

    let (s, _) = call(&app, Method::DELETE, &format!("/apps/{id}"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = call(&app, Method::GET, &format!("/apps/{id}/label"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn dry_run_rewrite_changes_nothing() {
    let (h, _) = hub();
    let app = router(h, None);
    let id = install(&app, "water_leak").await;
    let (_, before) = call(&app, Method::GET, &format!("/apps/{id}"), None).await;
    let req = json!({"op": "rate-limit", "node": "timer", "interval_ms": 7_200_000, "dry_run": true});
    let (s, v) = call(&app, Method::POST, &format!("/apps/{id}/rewrites"), Some(req.to_string())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["applied"], false);
    let diff = v["diff"].as_str().unwrap();
    assert!(diff.contains("-        \"interval_ms\": 1800000,"), "{diff}");
    assert!(diff.contains("+        \"interval_ms\": 7200000,"), "{diff}");
    assert_eq!(diff.lines().filter(|l| l.starts_with('+') && !l.starts_with("+++")).count(), 1);
    let (_, after) = call(&app, Method::GET, &format!("/apps/{id}"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn applied_rewrite_refreshes_the_analysis() {
    let (h, _) = hub();
    let app = router(h, None);
    let id = install(&app, "hello_visitor").await;
    call(&app, Method::PUT, &format!("/apps/{id}/permissions"), Some(json!({"permission": "face image", "allowed": true}).to_string())).await;
    let (_, before) = call(&app, Method::GET, &format!("/apps/{id}"), None).await;
    let req = json!({"op": "schedule", "node": "post-faces", "windows": [[61_200_000u64, 68_400_000u64]]});
    let (s, v) = call(&app, Method::POST, &format!("/apps/{id}/rewrites"), Some(req.to_string())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["applied"], true);
    let (_, d) = call(&app, Method::GET, &format!("/apps/{id}/description"), None).await;
    assert_ne!(d["manifest_hash"], before["manifest_hash"]);
    assert_eq!(d["manifest_hash"], v["manifest_hash"]);
    assert!(d["sentences"][0].as_str().unwrap().ends_with("if the time is classified as allowed."));
    // the surviving permission keeps its decision
    let (_, p) = call(&app, Method::GET, &format!("/apps/{id}/permissions"), None).await;
    assert_eq!(p[0]["state"], "allowed");

    let bad = json!({"op": "rate-limit", "node": "post-faces", "interval_ms": 1000});
    let (s, v) = call(&app, Method::POST, &format!("/apps/{id}/rewrites"), Some(bad.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "NotAnInjectNode");
}

#[tokio::test]
async fn filter_rewrite_type_mismatch() {
    let (h, _) = hub();
    let app = router(h, None);
    let id = install(&app, "hello_visitor").await;
    let req = json!({"op": "filter", "after": "select-face", "filter": {"kind": "spoof", "properties": {"datatype": "audio", "target": "face"}}});
    let (s, v) = call(&app, Method::POST, &format!("/apps/{id}/rewrites"), Some(req.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "TypeMismatchAtSplice");
}

#[tokio::test]
async fn egress_groups_match_the_label_and_ledger_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("egress.ndjson");
    let (rt, _) = common::runtime();
    let h = HubHandle::spawn(Hub::new(rt.with_ledger(EgressLedger::open(&path).unwrap())));
    let app = router(h, None);
    let hv = install(&app, "hello_visitor").await;
    let tv = install(&app, "tv_summary").await;
    for id in [&hv, &tv] {
        let (_, perms) = call(&app, Method::GET, &format!("/apps/{id}/permissions"), None).await;
        for p in perms.as_array().unwrap() {
            let body = json!({"permission": p["summary"], "allowed": true}).to_string();
            call(&app, Method::PUT, &format!("/apps/{id}/permissions"), Some(body)).await;
        }
    }
    call(&app, Method::POST, "/clock/advance", Some(json!({"ms": 7 * DAY_MS}).to_string())).await;

    let (s, report) = call(&app, Method::GET, "/egress?group_by=content", None).await;
    assert_eq!(s, StatusCode::OK);
    let text = std::fs::read_to_string(&path).unwrap();
    let (mut items, mut bytes) = (0u64, 0u64);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        if v["blocked"] == false {
            items += v["items"].as_u64().unwrap();
            bytes += v["bytes"].as_u64().unwrap();
        }
    }
    assert_eq!(report["total"]["items"].as_u64().unwrap(), items);
    assert_eq!(report["total"]["bytes"].as_u64().unwrap(), bytes);
    let row_items: u64 = report["rows"].as_array().unwrap().iter().map(|r| r["items"].as_u64().unwrap()).sum();
    assert_eq!(row_items, items);

    let (_, label) = call(&app, Method::GET, &format!("/apps/{hv}/label"), None).await;
    let (_, mine) = call(&app, Method::GET, &format!("/egress?app={hv}"), None).await;
    let label_items: u64 = label["rows"].as_array().unwrap().iter().map(|r| r["sent_items"].as_u64().unwrap()).sum();
    assert_eq!(label_items, mine["total"]["items"].as_u64().unwrap());

    let (s, _) = call(&app, Method::GET, "/egress?group_by=week", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn inject_endpoint_runs_manual_injects() {
    let (h, net) = hub();
    let app = router(h, None);
    let mut m: Value = serde_json::from_str(&manifest_text("water_leak")).unwrap();
    m["graph"][0]["properties"] = json!({"mode": "manual"});
    let (_, v) = call(&app, Method::POST, "/apps", Some(m.to_string())).await;
    let id = v["id"].as_str().unwrap().to_string();
    call(&app, Method::PUT, &format!("/apps/{id}/permissions"), Some(json!({"permission": "raw scalar", "allowed": true}).to_string())).await;
    let (s, run) = call(&app, Method::POST, &format!("/apps/{id}/inject/timer"), None).await;
    assert_eq!(s, StatusCode::OK, "{run}");
    assert_eq!(run["emits"], 1);
    assert_eq!(net.connections(), 1);
    let (s, v) = call(&app, Method::POST, &format!("/apps/{id}/inject/missing"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{v}");
}

#[tokio::test]
async fn token_and_clock_mode() {
    let (h, _) = hub();
    let app = router(h, Some("s3cret".into()));
    let (s, _) = call(&app, Method::GET, "/apps", None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, _) = call_with(&app, Method::GET, "/apps", None, Some("s3cret")).await;
    assert_eq!(s, StatusCode::OK);

    let (rt, _) = common::runtime();
    let real = HubHandle::spawn(Hub::new(rt.with_clock(privhub::runtime::VirtualClock::real())));
    let app = router(real, None);
    let (s, v) = call(&app, Method::POST, "/clock/advance", Some(json!({"ms": 1}).to_string())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "NotSimulated");
    let (_, c) = call(&app, Method::GET, "/clock", None).await;
    assert_eq!(c["mode"], "real");
}
