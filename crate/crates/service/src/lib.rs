//! HTTP+JSON front of a labeling session, so a person can act as the oracle.
//!
//! | route | |
//! |---|---|
//! | `POST /sessions` | create a human-oracle session |
//! | `GET /sessions/{id}/state` | status, remaining pairs, timestamps |
//! | `GET /sessions/{id}/batch` | the pending batch with record values |
//! | `POST /sessions/{id}/labels` | answer some or all of the batch |
//! | `GET /sessions/{id}/metrics` | every logged iteration |
//! | `GET /sessions/{id}/model` | rules, atom count, depth, ensemble |

pub mod error;
pub mod store;
pub mod types;

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};

pub use error::ApiError;
pub use store::AppState;
use types::{
    CreateSession, LabelSubmission, MetricsSnapshot, ModelSummary, PendingBatch, SessionState, SubmitResponse,
};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Created {
    pub session_id: String,
    pub state: SessionState,
    pub batch: Option<PendingBatch>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state_of))
        .route("/sessions/{id}/batch", get(batch))
        .route("/sessions/{id}/labels", post(labels))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/model", get(model))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn create(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let entry = blocking(move || app.create(req)).await?;
    let snap = entry.snapshot();
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: entry.id.clone(),
            state: snap.state,
            batch: snap.batch,
        }),
    ))
}

async fn state_of(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    Ok(Json(app.get(&id)?.snapshot().state))
}

async fn batch(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<PendingBatch>, ApiError> {
    app.get(&id)?
        .snapshot()
        .batch
        .map(Json)
        .ok_or_else(|| ApiError::State(format!("session `{id}` has terminated")))
}

async fn labels(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(sub): Json<LabelSubmission>,
) -> Result<Json<SubmitResponse>, ApiError> {
    let entry = app.get(&id)?;
    blocking(move || entry.submit(&sub.labels, app.checkpoint_dir())).await.map(Json)
}

async fn metrics(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<MetricsSnapshot>, ApiError> {
    let snap = app.get(&id)?.snapshot();
    Ok(Json(MetricsSnapshot {
        session_id: id,
        iterations: snap.logs.as_ref().clone(),
    }))
}

async fn model(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ModelSummary>, ApiError> {
    Ok(Json(app.get(&id)?.snapshot().model.as_ref().clone()))
}
