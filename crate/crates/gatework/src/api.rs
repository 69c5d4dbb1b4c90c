//! JSON over HTTP. Every response body is an [`ApiEnvelope`].

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::store::{ApiError, DecisionRequest, DeliverableUpload, Store};
use gatework_core::TaskBrief;

/// Header naming the expert behind a decision or upload.
pub const EXPERT_HEADER: &str = "x-expert-id";
/// Optional client-chosen request id, echoed back in the envelope.
pub const REQUEST_ID_HEADER: &str = "x-request-id";
const DEFAULT_PAGE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// Exactly one of `payload` and `error` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEnvelope {
    pub request_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl ApiEnvelope {
    pub fn ok(request_id: String, payload: Value) -> Self {
        ApiEnvelope {
            request_id,
            payload: Some(payload),
            error: None,
        }
    }

    pub fn err(request_id: String, e: &ApiError) -> Self {
        ApiEnvelope {
            request_id,
            payload: None,
            error: Some(ErrorBody {
                code: e.code().to_string(),
                message: e.to_string(),
            }),
        }
    }
}

fn status(e: &ApiError) -> StatusCode {
    match e {
        ApiError::ValidationFailed(_) => StatusCode::BAD_REQUEST,
        ApiError::NotFound(_) | ApiError::NoPendingGate(_) => StatusCode::NOT_FOUND,
        ApiError::Conflict(_) => StatusCode::CONFLICT,
        ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn request_id(headers: &HeaderMap) -> String {
    headers
        .get(REQUEST_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .unwrap_or_else(|| uuid::Uuid::new_v4().to_string())
}

fn reply<T: Serialize>(rid: String, ok: StatusCode, r: Result<T, ApiError>) -> Response {
    match r {
        Ok(v) => {
            let payload = serde_json::to_value(v).expect("payload serializes");
            (ok, Json(ApiEnvelope::ok(rid, payload))).into_response()
        }
        Err(e) => {
            if let ApiError::Internal(m) = &e {
                tracing::error!(request_id = %rid, "{m}");
            }
            (status(&e), Json(ApiEnvelope::err(rid, &e))).into_response()
        }
    }
}

/// Run a store call off the async workers; file syncs block.
async fn blocking<T, F>(store: &Arc<Store>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, ApiError> + Send + 'static,
{
    let store = store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .unwrap_or_else(|e| Err(ApiError::Internal(format!("request handler failed: {e}"))))
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::ValidationFailed(format!("request body: {e}")))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::ValidationFailed(e.body_text()))
}

fn expert(headers: &HeaderMap) -> Result<String, ApiError> {
    headers
        .get(EXPERT_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .ok_or_else(|| ApiError::ValidationFailed(format!("missing {EXPERT_HEADER} header")))
}

async fn create_task(State(store): State<Arc<Store>>, headers: HeaderMap, bytes: Bytes) -> Response {
    let rid = request_id(&headers);
    let r = match body::<TaskBrief>(&bytes) {
        Ok(brief) => blocking(&store, move |s| s.submit(brief)).await,
        Err(e) => Err(e),
    };
    reply(rid, StatusCode::CREATED, r)
}

async fn list_tasks(State(store): State<Arc<Store>>, headers: HeaderMap) -> Response {
    let r = blocking(&store, |s| Ok(s.list())).await;
    reply(request_id(&headers), StatusCode::OK, r)
}

async fn get_task(State(store): State<Arc<Store>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    let r = blocking(&store, move |s| s.get(&id)).await;
    reply(request_id(&headers), StatusCode::OK, r)
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    after_seq: Option<u64>,
    limit: Option<usize>,
}

async fn task_events(
    State(store): State<Arc<Store>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    q: Result<Query<EventsQuery>, QueryRejection>,
) -> Response {
    let r = match query(q) {
        Ok(q) => blocking(&store, move |s| s.events(&id, q.after_seq, q.limit.unwrap_or(DEFAULT_PAGE))).await,
        Err(e) => Err(e),
    };
    reply(request_id(&headers), StatusCode::OK, r)
}

async fn upload(State(store): State<Arc<Store>>, headers: HeaderMap, Path(id): Path<String>, bytes: Bytes) -> Response {
    let rid = request_id(&headers);
    let r = match expert(&headers).and_then(|_| body::<DeliverableUpload>(&bytes)) {
        Ok(up) => blocking(&store, move |s| s.upload(&id, up)).await,
        Err(e) => Err(e),
    };
    reply(rid, StatusCode::OK, r)
}

#[derive(Debug, Deserialize)]
struct GatesQuery {
    assignee: Option<String>,
}

async fn list_gates(
    State(store): State<Arc<Store>>,
    headers: HeaderMap,
    q: Result<Query<GatesQuery>, QueryRejection>,
) -> Response {
    let r = match query(q) {
        Ok(q) => blocking(&store, move |s| Ok(s.gates(q.assignee.as_deref()))).await,
        Err(e) => Err(e),
    };
    reply(request_id(&headers), StatusCode::OK, r)
}

async fn decide(State(store): State<Arc<Store>>, headers: HeaderMap, Path(gate_id): Path<String>, bytes: Bytes) -> Response {
    let rid = request_id(&headers);
    let parsed = expert(&headers).and_then(|who| body::<DecisionRequest>(&bytes).map(|req| (who, req)));
    let r = match parsed {
        Ok((who, req)) => blocking(&store, move |s| s.decide(&gate_id, req, &who)).await,
        Err(e) => Err(e),
    };
    reply(rid, StatusCode::OK, r)
}

async fn stats(State(store): State<Arc<Store>>, headers: HeaderMap) -> Response {
    let r = blocking(&store, |s| Ok(s.stats())).await;
    reply(request_id(&headers), StatusCode::OK, r)
}

async fn fallback(headers: HeaderMap) -> Response {
    let e = ApiError::NotFound("no such endpoint".into());
    reply::<()>(request_id(&headers), StatusCode::OK, Err(e))
}

/// All endpoints; static console files are served under `/console` when a
/// directory is given.
pub fn router(store: Arc<Store>, console: Option<PathBuf>) -> Router {
    let mut app = Router::new()
        .route("/tasks", post(create_task).get(list_tasks))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/events", get(task_events))
        .route("/tasks/{id}/deliverables", post(upload))
        .route("/gates", get(list_gates))
        .route("/gates/{gate_id}/decision", post(decide))
        .route("/stats", get(stats));
    if let Some(dir) = console {
        app = app.nest_service("/console", ServeDir::new(dir));
    }
    app.fallback(fallback).with_state(store)
}
