//! Low-latency HTTP scoring service.
//!
//! Serves the linear model in-process: `POST /v1/score` for one text,
//! `POST /v1/score:batch` for ordered batches, `GET /healthz` for the
//! loaded model's identity. The model is immutable shared state, so every
//! request sees identical scores and the server stays stateless across
//! requests. LLM-backed scoring is deliberately not exposed here; its
//! latency belongs in offline batch labeling, not this endpoint.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::corpus::level_from_score;
use crate::linear_model::{LinearModel, MODEL_SCHEMA_VERSION};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub text: String,
    /// Optional model id; defaults to the loaded model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub score: f64,
    /// Display label nearest to `score`.
    pub cefr: String,
    pub model: String,
    pub latency_us: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

fn error_body(code: &str, message: impl Into<String>) -> ErrorBody {
    ErrorBody {
        error: ErrorDetail {
            code: code.to_string(),
            message: message.into(),
        },
    }
}

#[derive(Debug, Deserialize, Serialize)]
pub struct BatchScoreRequest {
    pub requests: Vec<ScoreRequest>,
}

/// Batch items succeed or fail independently, in request order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchItem {
    Ok(ScoreResponse),
    Err(ErrorBody),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchScoreResponse {
    pub responses: Vec<BatchItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HealthResponse {
    pub model: String,
    pub schema_version: u32,
}

/// Immutable state shared by all requests.
pub struct ServiceState {
    pub model: LinearModel,
    pub model_id: String,
    pub max_batch: usize,
}

fn score_one(
    state: &ServiceState,
    request: &ScoreRequest,
) -> std::result::Result<ScoreResponse, (StatusCode, ErrorBody)> {
    if let Some(requested) = &request.model {
        if requested != &state.model_id {
            return Err((
                StatusCode::NOT_FOUND,
                error_body("UnknownModel", format!("no model {requested:?} loaded")),
            ));
        }
    }
    let start = Instant::now();
    match state.model.predict(&request.text) {
        Ok(score) => {
            let level = level_from_score(score).expect("clamped score is in range");
            Ok(ScoreResponse {
                score,
                cefr: level.name().to_string(),
                model: state.model_id.clone(),
                latency_us: start.elapsed().as_micros() as u64,
            })
        }
        Err(Error::EmptyText) => Err((
            StatusCode::BAD_REQUEST,
            error_body("EmptyText", "text has no tokens"),
        )),
        // Nothing else can fail during prediction; keep internals out of
        // the response if it ever does.
        Err(_) => Err((
            StatusCode::INTERNAL_SERVER_ERROR,
            error_body("Internal", "internal error"),
        )),
    }
}

/// One structured line per request on stderr. Text bodies and credentials
/// never appear here.
fn log_request(path: &str, status: u16, latency_us: u128) {
    eprintln!(
        "{}",
        serde_json::json!({"path": path, "status": status, "latency_us": latency_us as u64})
    );
}

async fn handle_score(
    State(state): State<Arc<ServiceState>>,
    Json(request): Json<ScoreRequest>,
) -> (StatusCode, Json<serde_json::Value>) {
    let start = Instant::now();
    let (status, body) = match score_one(&state, &request) {
        Ok(response) => (
            StatusCode::OK,
            serde_json::to_value(response).expect("serializable response"),
        ),
        Err((status, body)) => (
            status,
            serde_json::to_value(body).expect("serializable error"),
        ),
    };
    log_request("/v1/score", status.as_u16(), start.elapsed().as_micros());
    (status, Json(body))
}

async fn handle_batch(
    State(state): State<Arc<ServiceState>>,
    Json(batch): Json<BatchScoreRequest>,
) -> (StatusCode, Json<serde_json::Value>) {
    let start = Instant::now();
    let (status, body) = if batch.requests.is_empty() {
        (
            StatusCode::BAD_REQUEST,
            serde_json::to_value(error_body("EmptyBatch", "requests list is empty"))
                .expect("serializable error"),
        )
    } else if batch.requests.len() > state.max_batch {
        (
            StatusCode::PAYLOAD_TOO_LARGE,
            serde_json::to_value(error_body(
                "BatchTooLarge",
                format!(
                    "batch of {} exceeds the limit of {}",
                    batch.requests.len(),
                    state.max_batch
                ),
            ))
            .expect("serializable error"),
        )
    } else {
        let responses: Vec<BatchItem> = batch
            .requests
            .iter()
            .map(|req| match score_one(&state, req) {
                Ok(response) => BatchItem::Ok(response),
                Err((_, body)) => BatchItem::Err(body),
            })
            .collect();
        (
            StatusCode::OK,
            serde_json::to_value(BatchScoreResponse { responses })
                .expect("serializable response"),
        )
    };
    log_request(
        "/v1/score:batch",
        status.as_u16(),
        start.elapsed().as_micros(),
    );
    (status, Json(body))
}

async fn handle_health(State(state): State<Arc<ServiceState>>) -> Json<HealthResponse> {
    Json(HealthResponse {
        model: state.model_id.clone(),
        schema_version: MODEL_SCHEMA_VERSION,
    })
}

/// The service router; exposed separately from [`serve`] so tests can bind
/// it to an ephemeral port.
pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/score", post(handle_score))
        .route("/v1/score:batch", post(handle_batch))
        .route("/healthz", get(handle_health))
        .with_state(state)
}

/// Model id used when serving a model file: the file stem.
pub fn model_id_for_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "linear".to_string())
}

/// Load a model file and serve it until interrupted.
pub async fn serve(model_path: &Path, bind: &str, max_batch: usize) -> Result<()> {
    let model = LinearModel::load(model_path)?;
    let state = Arc::new(ServiceState {
        model_id: model_id_for_path(model_path),
        model,
        max_batch,
    });
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!(
        "{}",
        serde_json::json!({
            "listening": listener.local_addr()?.to_string(),
            "model": state.model_id,
        })
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
