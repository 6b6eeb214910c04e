//! HTTP+JSON interface over the session store.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use revealq_core::model::Answer;

use crate::error::{Result, ServiceError};
use crate::session::{BeliefSummary, QuestionPayload, SessionConfig, Status};
use crate::store::SessionStore;

pub type AppState = Arc<SessionStore>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_view))
        .route("/sessions/{id}/question", get(next_question))
        .route("/sessions/{id}/answer", post(submit_answer))
        .route("/sessions/{id}/deploy", post(deploy))
        .route("/sessions/{id}/debug", get(debug))
        .with_state(store)
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (status, Json(body)).into_response()
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8], code: &'static str) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::invalid(code, e.to_string()))
}

/// Session work is CPU-bound and takes a blocking lock, so it runs off the
/// async worker threads.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub status: Status,
}

async fn create_session(State(store): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>)> {
    let config: SessionConfig = parse(&body, "invalid_request")?;
    let session = blocking(move || store.create(config)).await?;
    tracing::info!(id = session.id(), "session created");
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: session.id().to_string(),
            status: session.status(),
        }),
    ))
}

async fn session_view(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    let view = blocking(move || store.read(&id, |s| s.view())).await?;
    Ok(Json(view).into_response())
}

/// Either the question to show or the signal that the session is complete.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuestionReply {
    Question(QuestionPayload),
    Complete { complete: bool, round: usize },
}

/// Returns the pending question, asking a new one when none is pending, so
/// a reload shows the same question instead of drawing another.
async fn next_question(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<QuestionReply>> {
    let reply = blocking(move || {
        store.update(&id, |s, now| {
            if let Some(q) = s.pending() {
                return Ok((QuestionReply::Question(s.question_payload(q)), Vec::new()));
            }
            if s.status() == Status::Active && s.is_complete() {
                let done = QuestionReply::Complete {
                    complete: true,
                    round: s.round(),
                };
                return Ok((done, Vec::new()));
            }
            let event = s.ask(now)?;
            let q = s.pending().expect("question just asked");
            Ok((QuestionReply::Question(s.question_payload(q)), vec![event]))
        })
    })
    .await?;
    Ok(Json(reply))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub index: usize,
    #[serde(flatten)]
    pub answer: Answer,
}

async fn submit_answer(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<BeliefSummary>> {
    let req: AnswerRequest = parse(&body, "invalid_answer")?;
    let summary = blocking(move || {
        store.update(&id, |s, now| {
            let event = s.answer(req.index, req.answer, now)?;
            Ok((s.summary()?, vec![event]))
        })
    })
    .await?;
    Ok(Json(summary))
}

async fn deploy(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<BeliefSummary>> {
    let summary = blocking(move || {
        store.update(&id, |s, now| {
            let event = s.deploy(now)?;
            Ok((s.summary()?, vec![event]))
        })
    })
    .await?;
    Ok(Json(summary))
}

async fn debug(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response> {
    if !store.options().debug_panel {
        return Err(ServiceError::DebugDisabled);
    }
    let summary = blocking(move || store.read(&id, |s| Ok(s.debug_summary()))).await?;
    Ok(Json(summary).into_response())
}
