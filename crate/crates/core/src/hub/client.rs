//! Blocking client for the hub API, used by the CLI.

use reqwest::blocking::{Client, RequestBuilder};
use reqwest::Method;
use serde_json::{json, Value};
use thiserror::Error;

use super::RewriteBody;
use crate::runtime::EgressFilter;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("hub answered {status}: {body}")]
    Status { status: u16, body: Value },
}

pub struct HubClient {
    base: String,
    token: Option<String>,
    http: Client,
}

impl HubClient {
    pub fn new(base: &str, token: Option<String>) -> Self {
        HubClient {
            base: base.trim_end_matches('/').to_string(),
            token,
            http: Client::new(),
        }
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        let rb = self.http.request(method, format!("{}{}", self.base, path));
        match &self.token {
            Some(t) => rb.bearer_auth(t),
            None => rb,
        }
    }

    fn send(&self, rb: RequestBuilder) -> Result<Value, ClientError> {
        let resp = rb.send()?;
        let status = resp.status();
        let text = resp.text()?;
        let body = if text.is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&text).unwrap_or(Value::String(text))
        };
        if status.is_success() {
            Ok(body)
        } else {
            Err(ClientError::Status {
                status: status.as_u16(),
                body,
            })
        }
    }

    fn get(&self, path: &str) -> Result<Value, ClientError> {
        self.send(self.request(Method::GET, path))
    }

    pub fn apps(&self) -> Result<Value, ClientError> {
        self.get("/apps")
    }

    pub fn app(&self, id: &str) -> Result<Value, ClientError> {
        self.get(&format!("/apps/{id}"))
    }

    pub fn install(&self, manifest: &str, bindings: &[(String, String)]) -> Result<Value, ClientError> {
        let body = if bindings.is_empty() {
            manifest.to_string()
        } else {
            let m: Value = serde_json::from_str(manifest).unwrap_or(Value::String(manifest.to_string()));
            let b: serde_json::Map<String, Value> = bindings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            json!({ "manifest": m, "bindings": b }).to_string()
        };
        self.send(
            self.request(Method::POST, "/apps")
                .header("content-type", "application/json")
                .body(body),
        )
    }

    pub fn uninstall(&self, id: &str) -> Result<Value, ClientError> {
        self.send(self.request(Method::DELETE, &format!("/apps/{id}")))
    }

    pub fn description(&self, id: &str) -> Result<Value, ClientError> {
        self.get(&format!("/apps/{id}/description"))
    }

    pub fn label(&self, id: &str) -> Result<Value, ClientError> {
        self.get(&format!("/apps/{id}/label"))
    }

    pub fn permissions(&self, id: &str) -> Result<Value, ClientError> {
        self.get(&format!("/apps/{id}/permissions"))
    }

    pub fn set_permission(&self, id: &str, permission: &str, allowed: bool) -> Result<Value, ClientError> {
        self.send(
            self.request(Method::PUT, &format!("/apps/{id}/permissions"))
                .json(&json!({ "permission": permission, "allowed": allowed })),
        )
    }

    pub fn rewrite(&self, id: &str, body: &RewriteBody) -> Result<Value, ClientError> {
        self.send(self.request(Method::POST, &format!("/apps/{id}/rewrites")).json(body))
    }

    pub fn inject(&self, id: &str, node: &str) -> Result<Value, ClientError> {
        self.send(self.request(Method::POST, &format!("/apps/{id}/inject/{node}")))
    }

    pub fn egress(&self, f: &EgressFilter) -> Result<Value, ClientError> {
        self.send(self.request(Method::GET, "/egress").query(f))
    }

    pub fn clock(&self) -> Result<Value, ClientError> {
        self.get("/clock")
    }

    pub fn advance(&self, ms: u64) -> Result<Value, ClientError> {
        self.send(self.request(Method::POST, "/clock/advance").json(&json!({ "ms": ms })))
    }

    pub fn drivers(&self) -> Result<Value, ClientError> {
        self.get("/drivers")
    }
}
