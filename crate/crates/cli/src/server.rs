//! HTTP API: health, defaults and synchronous simulation with a cap on
//! concurrently running campaigns.

use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use retrovote_core::{validate_config, Engine, Error, SimulationConfig, SimulationReport};
use serde::Serialize;
use serde_json::json;
use tokio::sync::Semaphore;

pub const DEFAULT_PORT: u16 = 8080;

pub const MAX_ITERATIONS: u64 = 20_000;
pub const MAX_VOTERS: usize = 2_000;
pub const MAX_PROJECTS: usize = 5_000;

/// Request body of `POST /api/simulate`: a config document.
pub type SimulateRequest = SimulationConfig;
/// Response body of `POST /api/simulate`.
pub type SimulateResponse = SimulationReport;

#[derive(Clone)]
pub struct AppState {
    permits: Arc<Semaphore>,
}

impl AppState {
    pub fn new(max_concurrent: usize) -> Self {
        Self {
            permits: Arc::new(Semaphore::new(max_concurrent.max(1))),
        }
    }
}

pub fn default_worker_limit() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/defaults", get(defaults))
        .route("/api/simulate", post(simulate))
        .with_state(state)
}

pub async fn serve(host: &str, port: u16, max_concurrent: usize) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .with_context(|| format!("could not bind {host}:{port}"))?;
    eprintln!(
        "listening on http://{} ({max_concurrent} concurrent simulations)",
        listener.local_addr()?
    );
    axum::serve(listener, router(AppState::new(max_concurrent)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server error")
}

#[derive(Debug)]
pub enum ApiError {
    Malformed(String),
    Invalid {
        invariant: &'static str,
        detail: String,
    },
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    invariant: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::Malformed(detail) => (
                StatusCode::BAD_REQUEST,
                Json(ErrorBody {
                    error: "malformed_request",
                    invariant: None,
                    detail: Some(&detail),
                    id: None,
                }),
            )
                .into_response(),
            ApiError::Invalid { invariant, detail } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(ErrorBody {
                    error: "invalid_config",
                    invariant: Some(invariant),
                    detail: Some(&detail),
                    id: None,
                }),
            )
                .into_response(),
            ApiError::Internal(message) => {
                let id = format!("{:016x}", rand::random::<u64>());
                eprintln!("internal error {id}: {message}");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    Json(ErrorBody {
                        error: "internal",
                        invariant: None,
                        detail: None,
                        id: Some(&id),
                    }),
                )
                    .into_response()
            }
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { invariant, detail } => ApiError::Invalid { invariant, detail },
            other => ApiError::Internal(other.to_string()),
        }
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn defaults() -> Json<SimulateRequest> {
    Json(SimulationConfig::default())
}

/// Rejects configs above the service size limits.
pub fn check_limits(config: &SimulationConfig) -> Result<(), ApiError> {
    let limits = [
        ("iterations_within_limit", config.iterations, MAX_ITERATIONS),
        (
            "n_voters_within_limit",
            config.n_voters as u64,
            MAX_VOTERS as u64,
        ),
        (
            "n_projects_within_limit",
            config.n_projects as u64,
            MAX_PROJECTS as u64,
        ),
    ];
    for (invariant, value, max) in limits {
        if value > max {
            return Err(ApiError::Invalid {
                invariant,
                detail: format!("{value} exceeds the service limit of {max}"),
            });
        }
    }
    Ok(())
}

/// Parses and checks a request body without running it.
pub fn parse_request(body: &[u8]) -> Result<SimulationConfig, ApiError> {
    let malformed = |e: serde_json::Error| ApiError::Malformed(e.to_string());
    let value: serde_json::Value = serde_json::from_slice(body).map_err(malformed)?;
    if !value.is_object() {
        return Err(ApiError::Malformed("request must be a JSON object".into()));
    }
    let config: SimulateRequest = serde_json::from_value(value).map_err(malformed)?;
    check_limits(&config)?;
    Ok(validate_config(config)?)
}

async fn simulate(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let config = parse_request(&body)?;
    let _permit = state
        .permits
        .clone()
        .acquire_owned()
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let report = tokio::task::spawn_blocking(move || Engine::new(config)?.run())
        .await
        .map_err(|e| ApiError::Internal(format!("simulation task failed: {e}")))??;
    Ok(Json::<SimulateResponse>(report).into_response())
}
