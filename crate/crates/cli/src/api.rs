//! HTTP API over a run store, consumed by the rater console.
//!
//! `/runs/...` routes accept any run in the store; `/rollouts/...` routes
//! resolve rollout ids inside the run the server was started for.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use wmeval_core::rollout::{RolloutKey, Termination};
use wmeval_core::store::{agreement, vframes, LabelRecord, RunStore, StoreError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    status: Option<u16>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
            status: Some(status.as_u16()),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::RunNotFound(_) | StoreError::RolloutNotFound(_) => {
                (StatusCode::NOT_FOUND, "NOT_FOUND")
            }
            StoreError::InvalidLabel(_) | StoreError::InvalidName(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_LABEL")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self
            .status
            .and_then(|s| StatusCode::from_u16(s).ok())
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct ApiState {
    store: RunStore,
    run_id: String,
    writer: Mutex<()>,
}

/// One row of `GET /runs/{id}/rollouts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub id: String,
    pub policy_id: String,
    pub task: String,
    pub trial: u32,
    pub seed: u64,
    pub frame_count: usize,
    pub steps_executed: usize,
    pub termination: Termination,
    pub label_status: LabelStatus,
    /// Classifier outcome, when the rollout has one.
    pub automated_success: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LabelStatus {
    /// Not classified yet.
    Pending,
    Labeled,
    /// Classification failed; no automatic outcome.
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricView {
    pub rollout_id: String,
    pub task: String,
    pub rubric: Vec<String>,
}

/// Body of `POST /rollouts/{id}/labels`; the rollout id comes from the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub rater_id: String,
    pub outcome: bool,
    #[serde(default)]
    pub anomaly_flag: bool,
    #[serde(default)]
    pub rubric_checks: Option<Vec<bool>>,
    #[serde(default)]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct VideoQuery {
    index: Option<usize>,
}

pub fn router(store: RunStore, run_id: impl Into<String>) -> Router {
    let state = Arc::new(ApiState {
        store,
        run_id: run_id.into(),
        writer: Mutex::new(()),
    });
    Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}/rollouts", get(list_rollouts))
        .route("/runs/{id}/agreement", get(run_agreement))
        .route("/runs/{id}/report", get(run_report))
        .route("/rollouts/{id}/video", get(rollout_video))
        .route("/rollouts/{id}/rubric", get(rollout_rubric))
        .route("/rollouts/{id}/labels", post(submit_label))
        .with_state(state)
}

fn parse_key(id: &str) -> ApiResult<RolloutKey> {
    RolloutKey::parse(id).ok_or_else(|| ApiError::not_found(format!("rollout `{id}` not found")))
}

async fn list_runs(State(s): State<Arc<ApiState>>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store.list_runs()?))
}

async fn list_rollouts(
    State(s): State<Arc<ApiState>>,
    Path(run_id): Path<String>,
) -> ApiResult<Json<Vec<RolloutSummary>>> {
    let mut out = Vec::new();
    for key in s.store.rollout_keys(&run_id)? {
        let meta = s.store.rollout_meta(&run_id, &key)?;
        let outcome = s.store.load_outcome(&run_id, &key)?;
        let label_status = match (&outcome, s.store.unlabeled_reason(&run_id, &key)?) {
            (Some(_), _) => LabelStatus::Labeled,
            (None, Some(_)) => LabelStatus::Unlabeled,
            (None, None) => LabelStatus::Pending,
        };
        out.push(RolloutSummary {
            id: meta.id,
            policy_id: meta.policy_id,
            task: meta.task,
            trial: meta.trial,
            seed: meta.seed,
            frame_count: meta.frame_count,
            steps_executed: meta.steps_executed,
            termination: meta.termination,
            label_status,
            automated_success: outcome.map(|o| o.is_success()),
        });
    }
    Ok(Json(out))
}

async fn rollout_video(
    State(s): State<Arc<ApiState>>,
    Path(id): Path<String>,
    Query(q): Query<VideoQuery>,
) -> ApiResult<Response> {
    let key = parse_key(&id)?;
    match q.index {
        None => {
            let path = s.store.video_path(&s.run_id, &key)?;
            let bytes = std::fs::read(&path).map_err(|e| StoreError::Io { path, source: e })?;
            Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
        }
        Some(i) => {
            let video = s.store.load_video(&s.run_id, &key)?;
            let frame = video.frames().get(i).ok_or_else(|| {
                ApiError::not_found(format!(
                    "frame {i} out of range (video has {})",
                    video.len()
                ))
            })?;
            Ok((
                [(header::CONTENT_TYPE, "image/png")],
                vframes::encode_png(frame),
            )
                .into_response())
        }
    }
}

async fn rollout_rubric(
    State(s): State<Arc<ApiState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<RubricView>> {
    let key = parse_key(&id)?;
    s.store.rollout_meta(&s.run_id, &key)?;
    let manifest = s.store.manifest(&s.run_id)?;
    let task = manifest
        .task(&key.task)
        .ok_or_else(|| ApiError::not_found(format!("task `{}` not in run", key.task)))?;
    Ok(Json(RubricView {
        rollout_id: key.id(),
        task: task.name.clone(),
        rubric: task.rubric.clone(),
    }))
}

async fn submit_label(
    State(s): State<Arc<ApiState>>,
    Path(id): Path<String>,
    body: Result<Json<LabelSubmission>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<LabelRecord>)> {
    let Json(sub) = body?;
    let key = parse_key(&id)?;
    let label = LabelRecord {
        rollout_id: key.id(),
        rater_id: sub.rater_id,
        outcome: sub.outcome,
        anomaly_flag: sub.anomaly_flag,
        rubric_checks: sub.rubric_checks,
        timestamp: sub.timestamp,
    };
    let _guard = s.writer.lock().await;
    s.store.submit_label(&s.run_id, label.clone())?;
    Ok((StatusCode::CREATED, Json(label)))
}

async fn run_agreement(
    State(s): State<Arc<ApiState>>,
    Path(run_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(agreement(&s.store.labels(&run_id)?)))
}

async fn run_report(
    State(s): State<Arc<ApiState>>,
    Path(run_id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    s.store
        .report(&run_id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("run `{run_id}` has no report yet")))
}
