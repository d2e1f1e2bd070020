//! JSON API over a [`Hub`] owned by one control thread.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | GET | /apps | |
//! | POST | /apps | manifest, or `{"manifest": .., "bindings": {..}}` |
//! | GET, DELETE | /apps/{id} | |
//! | GET | /apps/{id}/manifest | |
//! | GET | /apps/{id}/description | |
//! | GET | /apps/{id}/label | |
//! | GET, PUT | /apps/{id}/permissions | `{"permission": .., "allowed": bool}` or a list |
//! | POST | /apps/{id}/rewrites | [`RewriteBody`] |
//! | POST | /apps/{id}/inject/{node} | |
//! | GET | /egress | `app, content, from, to, group_by` |
//! | GET | /clock | |
//! | POST | /clock/advance | `{"ms": u64}` |
//! | GET | /drivers | |

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;

use super::{Hub, HubError, RewriteBody};
use crate::runtime::EgressFilter;

type Job = Box<dyn FnOnce(&mut Hub) + Send>;

/// How often a real-clock hub runs due events when idle.
pub const REAL_CLOCK_POLL: Duration = Duration::from_millis(250);

/// Sends work to the thread that owns the hub. All mutations, including
/// message delivery, run there one at a time.
#[derive(Clone)]
pub struct HubHandle {
    tx: mpsc::Sender<Job>,
}

impl HubHandle {
    pub fn spawn(hub: Hub) -> Self {
        let (tx, rx) = mpsc::channel::<Job>();
        thread::Builder::new()
            .name("privhub-control".into())
            .spawn(move || control_loop(hub, rx))
            .expect("spawn control thread");
        HubHandle { tx }
    }

    pub async fn call<R: Send + 'static>(&self, f: impl FnOnce(&mut Hub) -> R + Send + 'static) -> R {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Box::new(move |hub: &mut Hub| {
                let _ = reply.send(f(hub));
            }))
            .expect("control thread alive");
        rx.await.expect("control thread replied")
    }

    /// For callers outside an async runtime.
    pub fn call_blocking<R: Send + 'static>(&self, f: impl FnOnce(&mut Hub) -> R + Send + 'static) -> R {
        let (reply, rx) = mpsc::channel();
        self.tx
            .send(Box::new(move |hub: &mut Hub| {
                let _ = reply.send(f(hub));
            }))
            .expect("control thread alive");
        rx.recv().expect("control thread replied")
    }
}

fn control_loop(mut hub: Hub, rx: mpsc::Receiver<Job>) {
    loop {
        if hub.runtime().clock().is_simulated() {
            match rx.recv() {
                Ok(job) => job(&mut hub),
                Err(_) => return,
            }
        } else {
            match rx.recv_timeout(REAL_CLOCK_POLL) {
                Ok(job) => job(&mut hub),
                Err(mpsc::RecvTimeoutError::Timeout) => {}
                Err(mpsc::RecvTimeoutError::Disconnected) => return,
            }
            hub.runtime_mut().catch_up();
        }
    }
}

pub struct ApiError(pub HubError);

impl From<HubError> for ApiError {
    fn from(e: HubError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut body = json!({ "error": self.0.code(), "message": self.0.to_string() });
        if let HubError::Invalid(report) = &self.0 {
            body["report"] = serde_json::to_value(report).unwrap_or(Value::Null);
            body["codes"] = report.errors.iter().map(|i| json!(i.code)).collect();
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
struct ApiState {
    hub: HubHandle,
    token: Option<String>,
}

async fn auth(State(st): State<ApiState>, req: Request, next: Next) -> Response {
    if let Some(token) = &st.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return (StatusCode::UNAUTHORIZED, Json(json!({ "error": "Unauthorized" }))).into_response();
        }
    }
    next.run(req).await
}

pub fn router(hub: HubHandle, token: Option<String>) -> Router {
    let st = ApiState { hub, token };
    Router::new()
        .route("/apps", get(list_apps).post(install))
        .route("/apps/{id}", get(get_app).delete(uninstall))
        .route("/apps/{id}/manifest", get(get_manifest))
        .route("/apps/{id}/description", get(description))
        .route("/apps/{id}/label", get(label))
        .route("/apps/{id}/permissions", get(permissions).put(set_permissions))
        .route("/apps/{id}/rewrites", post(rewrite))
        .route("/apps/{id}/inject/{node}", post(inject))
        .route("/egress", get(egress))
        .route("/clock", get(clock))
        .route("/clock/advance", post(advance))
        .route("/drivers", get(drivers))
        .layer(middleware::from_fn_with_state(st.clone(), auth))
        .with_state(st)
}

async fn list_apps(State(st): State<ApiState>) -> Json<Value> {
    let apps = st.hub.call(|h| h.apps()).await;
    Json(json!(apps))
}

/// Splits an install body into manifest text and bindings.
pub fn split_install_body(body: &str) -> (String, BTreeMap<String, String>) {
    if let Ok(Value::Object(mut obj)) = serde_json::from_str::<Value>(body) {
        if !obj.contains_key("meta") {
            if let Some(m) = obj.remove("manifest") {
                let bindings = obj
                    .remove("bindings")
                    .and_then(|b| serde_json::from_value(b).ok())
                    .unwrap_or_default();
                let text = match m {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                return (text, bindings);
            }
        }
    }
    (body.to_string(), BTreeMap::new())
}

async fn install(State(st): State<ApiState>, body: String) -> ApiResult<(StatusCode, Json<Value>)> {
    let (text, bindings) = split_install_body(&body);
    let view = st.hub.call(move |h| h.install_text(&text, bindings)).await?;
    Ok((StatusCode::CREATED, Json(json!(view))))
}

async fn get_app(State(st): State<ApiState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(st.hub.call(move |h| h.app(&id)).await?)))
}

async fn uninstall(State(st): State<ApiState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    st.hub.call(move |h| h.uninstall(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_manifest(State(st): State<ApiState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = st.hub.call(move |h| h.canonical_manifest(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn description(State(st): State<ApiState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(st.hub.call(move |h| h.description(&id)).await?)))
}

async fn label(State(st): State<ApiState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(st.hub.call(move |h| h.label(&id)).await?)))
}

async fn permissions(State(st): State<ApiState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(st.hub.call(move |h| h.permissions(&id)).await?)))
}

#[derive(Debug, Clone, Deserialize)]
pub struct PermissionUpdate {
    pub permission: String,
    pub allowed: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PermissionBody {
    One(PermissionUpdate),
    Many(Vec<PermissionUpdate>),
}

async fn set_permissions(
    State(st): State<ApiState>,
    Path(id): Path<String>,
    Json(body): Json<PermissionBody>,
) -> ApiResult<Json<Value>> {
    let updates = match body {
        PermissionBody::One(u) => vec![u],
        PermissionBody::Many(v) => v,
    };
    let view = st
        .hub
        .call(move |h| {
            for u in &updates {
                h.set_permission(&id, &u.permission, u.allowed)?;
            }
            h.permissions(&id)
        })
        .await?;
    Ok(Json(json!(view)))
}

async fn rewrite(
    State(st): State<ApiState>,
    Path(id): Path<String>,
    Json(body): Json<RewriteBody>,
) -> ApiResult<Json<Value>> {
    Ok(Json(json!(st.hub.call(move |h| h.rewrite(&id, &body)).await?)))
}

async fn inject(State(st): State<ApiState>, Path((id, node)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(st.hub.call(move |h| h.fire_inject(&id, &node)).await?)))
}

async fn egress(State(st): State<ApiState>, Query(filter): Query<EgressFilter>) -> Json<Value> {
    Json(json!(st.hub.call(move |h| h.egress(&filter)).await))
}

async fn clock(State(st): State<ApiState>) -> Json<Value> {
    Json(json!(st.hub.call(|h| h.clock()).await))
}

#[derive(Deserialize)]
struct AdvanceBody {
    ms: u64,
}

async fn advance(State(st): State<ApiState>, Json(body): Json<AdvanceBody>) -> ApiResult<Json<Value>> {
    let (summary, clock) = st
        .hub
        .call(move |h| h.advance(body.ms).map(|s| (s, h.clock())))
        .await?;
    Ok(Json(json!({ "clock": clock, "run": summary })))
}

async fn drivers(State(st): State<ApiState>) -> Json<Value> {
    let infos = st
        .hub
        .call(|h| {
            let cat = h.runtime().catalog();
            cat.names().iter().filter_map(|n| cat.info(n)).collect::<Vec<_>>()
        })
        .await;
    Json(json!(infos))
}

/// Serves the API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, hub: HubHandle, token: Option<String>) -> std::io::Result<()> {
    axum::serve(listener, router(hub, token)).await
}
