use std::future::Future;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::aggregate::CampaignResults;
use crate::campaign::BatchView;
use crate::error::ServiceError;
use crate::service::{EvalService, QuestionView, VoteAck, VoteRequest};

pub type Shared = Arc<Mutex<EvalService>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError(StatusCode, ErrorBody);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::Validation(_) => StatusCode::BAD_REQUEST,
            ServiceError::Unauthorized(_) => StatusCode::FORBIDDEN,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Io { .. } | ServiceError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(
            status,
            ErrorBody {
                code: e.code().into(),
                message: e.to_string(),
            },
        )
    }
}

fn bad_request(message: String) -> ApiError {
    ApiError(
        StatusCode::BAD_REQUEST,
        ErrorBody {
            code: "validation".into(),
            message,
        },
    )
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateRequest {
    pub worker_id: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateResponse {
    pub worker_id: String,
    pub admitted: bool,
}

#[derive(Debug, Deserialize)]
struct WorkerQuery {
    worker_id: String,
}

#[derive(Debug, Deserialize)]
struct CampaignQuery {
    campaign_id: String,
}

fn lock(s: &Shared) -> std::sync::MutexGuard<'_, EvalService> {
    s.lock().unwrap_or_else(|p| p.into_inner())
}

async fn question(State(s): State<Shared>) -> Json<QuestionView> {
    Json(lock(&s).question())
}

async fn gate(State(s): State<Shared>, body: Result<Json<GateRequest>, JsonRejection>) -> ApiResult<GateResponse> {
    let Json(req) = body?;
    let admitted = lock(&s).gate_worker(&req.worker_id, &req.answer)?;
    Ok(Json(GateResponse {
        worker_id: req.worker_id,
        admitted,
    }))
}

async fn batch(State(s): State<Shared>, q: Result<Query<WorkerQuery>, QueryRejection>) -> ApiResult<BatchView> {
    let Query(q) = q?;
    Ok(Json(lock(&s).assign_batch(&q.worker_id)?))
}

async fn vote(State(s): State<Shared>, body: Result<Json<VoteRequest>, JsonRejection>) -> ApiResult<VoteAck> {
    let Json(req) = body?;
    Ok(Json(lock(&s).record_vote(req)?))
}

async fn results(State(s): State<Shared>, q: Result<Query<CampaignQuery>, QueryRejection>) -> ApiResult<CampaignResults> {
    let Query(q) = q?;
    Ok(Json(lock(&s).aggregate(&q.campaign_id)?))
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/question", get(question))
        .route("/gate", post(gate))
        .route("/batch", get(batch))
        .route("/vote", post(vote))
        .route("/results", get(results))
        .with_state(service)
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    service: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
