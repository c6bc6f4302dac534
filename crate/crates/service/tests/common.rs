#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nbcd_core::GibbsConfig;
use nbcd_service::{router, AppState, Store};
use serde_json::Value;
use tower::ServiceExt;

pub const SHORT: GibbsConfig = GibbsConfig { n_samples: 1000, burn_in: 100, seed: 0 };

pub fn store(dir: &std::path::Path) -> Arc<Store> {
    Arc::new(Store::open(dir, SHORT).unwrap())
}

pub fn app(store: Arc<Store>, token: Option<&str>) -> Router {
    router(AppState { store, token: token.map(Into::into) }, None)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, headers: &[(&str, &str)]) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

/// Outcomes for every pending patient, with DLTs from `dlt`.
pub fn outcomes_for(pending: &Value, dlt: impl Fn(usize) -> bool) -> Value {
    let list: Vec<Value> = pending
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(n, a)| serde_json::json!({ "i": a["dose"]["i"], "j": a["dose"]["j"], "dlt": dlt(n) }))
        .collect();
    serde_json::json!({ "outcomes": list })
}

pub fn log_len(store: &Store, id: &str) -> u64 {
    std::fs::metadata(store.log_path(id)).unwrap().len()
}
