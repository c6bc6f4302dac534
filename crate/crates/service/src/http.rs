//! Routes under /v1.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nbcd_sim::{preset, PresetName};
use serde::de::DeserializeOwned;
use tower_http::services::ServeDir;

use crate::api::{CohortRequest, CreateTrialRequest, PresetView};
use crate::error::{ApiError, ApiResult};
use crate::store::Store;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub token: Option<Arc<str>>,
}

/// JSON body whose rejections use the API error format.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(JsonRejection::JsonDataError(e)) => Err(ApiError::invalid("body", e.body_text())),
            Err(e) => Err(ApiError::BadRequest(e.body_text())),
        }
    }
}

fn idempotency_key(headers: &HeaderMap) -> ApiResult<Option<String>> {
    match headers.get(IDEMPOTENCY_HEADER) {
        None => Ok(None),
        Some(v) => {
            let k = v.to_str().map_err(|_| ApiError::BadRequest("idempotency key must be ASCII".into()))?;
            if k.is_empty() || k.len() > 200 {
                return Err(ApiError::BadRequest("idempotency key must have 1 to 200 characters".into()));
            }
            Ok(Some(k.to_string()))
        }
    }
}

/// Runs blocking store work (chains, fsync) off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn create_trial(State(app): State<AppState>, headers: HeaderMap, Body(req): Body<CreateTrialRequest>) -> ApiResult<Response> {
    let key = idempotency_key(&headers)?;
    let (resp, created) = blocking(move || app.store.create(&req, key.as_deref())).await?;
    let code = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((code, Json(resp)).into_response())
}

async fn list_trials(State(app): State<AppState>) -> impl IntoResponse {
    Json(app.store.list())
}

async fn get_trial(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.store.snapshot(&id)?.view()))
}

async fn submit_cohort(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(req): Body<CohortRequest>,
) -> ApiResult<impl IntoResponse> {
    let key = idempotency_key(&headers)?;
    Ok(Json(blocking(move || app.store.submit(&id, &req, key.as_deref())).await?))
}

async fn get_posterior(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || app.store.posterior(&id)).await?))
}

async fn get_recommendation(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || app.store.recommendation(&id)).await?))
}

async fn what_if(State(app): State<AppState>, Path(id): Path<String>, Body(req): Body<CohortRequest>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || app.store.what_if(&id, &req)).await?))
}

async fn get_events(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.store.events(&id)?))
}

async fn list_presets() -> impl IntoResponse {
    let all: Vec<PresetView> = [PresetName::Study1, PresetName::Study2, PresetName::Trial]
        .into_iter()
        .map(|n| {
            let p = preset(n);
            PresetView {
                name: n,
                rows: p.dims.rows(),
                cols: p.dims.cols(),
                design: p.design,
                prior: p.prior,
                recommender: p.recommender,
            }
        })
        .collect();
    Json(all)
}

async fn not_found() -> ApiError {
    ApiError::NotFound("route".into())
}

async fn require_token(State(app): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &app.token {
        let ok = req
            .headers()
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == &**token);
        if !ok {
            return ApiError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

pub fn router(app: AppState, static_dir: Option<PathBuf>) -> Router {
    let v1 = Router::new()
        .route("/trials", post(create_trial).get(list_trials))
        .route("/trials/{id}", get(get_trial))
        .route("/trials/{id}/cohorts", post(submit_cohort))
        .route("/trials/{id}/posterior", get(get_posterior))
        .route("/trials/{id}/recommendation", get(get_recommendation))
        .route("/trials/{id}/what-if", post(what_if))
        .route("/trials/{id}/events", get(get_events))
        .route("/presets", get(list_presets))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(app.clone(), require_token))
        .with_state(app);
    let root = Router::new().nest("/v1", v1).route("/healthz", get(|| async { "ok" }));
    match static_dir {
        Some(dir) => root.fallback_service(ServeDir::new(dir)),
        None => root,
    }
}
