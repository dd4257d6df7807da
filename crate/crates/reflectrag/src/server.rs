//! Read-only HTTP service over a prebuilt engine.
//!
//! `POST /ask` runs one question through the pipeline; `GET /healthz`
//! reports status and index sizes. Index building is a CLI concern; the
//! service never mutates shared state.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::engine::Engine;
use crate::error::Error;
use crate::generation::Task;

#[derive(Clone)]
pub struct AppState {
    /// Absent when the service started without loadable indexes.
    pub engine: Option<Arc<Engine>>,
}

#[derive(Deserialize)]
struct AskRequest {
    question: String,
    #[serde(default)]
    options: Option<BTreeMap<String, String>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ask", post(handle_ask))
        .route("/healthz", get(handle_healthz))
        .with_state(state)
}

async fn handle_healthz(State(state): State<AppState>) -> Response {
    match &state.engine {
        Some(engine) => Json(json!({
            "status": "ok",
            "n_passages": engine.corpus.len(),
            "sparse_docs": engine.sparse.n_docs(),
            "dense_rows": engine.dense.len(),
            "dense_dim": engine.dense.dim(),
        }))
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({"status": "no_index"})),
        )
            .into_response(),
    }
}

async fn handle_ask(State(state): State<AppState>, body: Result<Json<AskRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(request) = match body {
        Ok(body) => body,
        Err(rejection) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({"error": rejection.to_string()})),
            )
                .into_response()
        }
    };
    let Some(engine) = state.engine.clone() else {
        return (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({"error": "indexes not loaded"})),
        )
            .into_response();
    };
    if request.question.trim().is_empty() {
        return (
            StatusCode::BAD_REQUEST,
            Json(json!({"error": "question must be non-empty"})),
        )
            .into_response();
    }
    let task = match request.options {
        Some(options) if !options.is_empty() => Task::multiple_choice(options),
        _ => Task::binary(),
    };

    let result = tokio::task::spawn_blocking(move || {
        engine.ask(&request.question, &task, None)
    })
    .await;

    match result {
        Ok(Ok(result)) => Json(json!({
            "answer": result.answer,
            "rationale": result.statements,
            "support_score": result.support_score,
            "accepted": result.accepted,
            "iterations": result.iterations.len(),
        }))
        .into_response(),
        Ok(Err(e)) => {
            let status = match e {
                Error::RetriesExhausted { .. }
                | Error::Backend(_)
                | Error::EmptyCompletion
                | Error::MockMiss { .. } => StatusCode::BAD_GATEWAY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            (status, Json(json!({"error": e.to_string()}))).into_response()
        }
        Err(join) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": join.to_string()})),
        )
            .into_response(),
    }
}

/// Blocks serving on `addr` until the process exits.
pub fn serve(state: AppState, addr: &str) -> crate::error::Result<()> {
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Error::Config(format!("tokio runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Config(format!("bind {addr}: {e}")))?;
        log::info!("listening on {addr}");
        axum::serve(listener, router(state))
            .await
            .map_err(|e| Error::Config(format!("serve: {e}")))
    })
}
