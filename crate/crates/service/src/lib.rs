//! HTTP API over the segmentation pipeline.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/v1/sessions` | upload a PNG/JPEG body, 201 `{session_id, width, height}` |
//! | GET | `/v1/sessions/{id}` | dimensions and the latest result |
//! | POST | `/v1/sessions/{id}/segment` | `{x, y, w, h}`, runs the pipeline |
//! | POST | `/v1/sessions/{id}/override` | `{factor}`, reruns matting from another candidate |
//! | GET | `/v1/sessions/{id}/raster?kind=K&rev=N` | `mask`, `matte`, `trimap`, `pre-refine` or `candidate-F` |
//!
//! Each segment or override call creates a new numbered revision whose
//! rasters never change.

pub mod error;
pub mod handlers;
pub mod state;

use std::net::SocketAddr;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::http::HeaderValue;
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{Any, CorsLayer};

pub use error::ApiError;
pub use state::{AppState, ServiceConfig};

pub fn router(state: AppState) -> Router {
    let cors = match state.config.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => CorsLayer::new().allow_origin(origin),
        _ => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let upload_limit = state.config.max_upload_bytes;
    Router::new()
        .route("/healthz", get(handlers::health))
        .route(
            "/v1/sessions",
            post(handlers::upload).layer(DefaultBodyLimit::max(upload_limit)),
        )
        .route("/v1/sessions/{id}", get(handlers::info))
        .route("/v1/sessions/{id}/segment", post(handlers::segment))
        .route("/v1/sessions/{id}/override", post(handlers::override_factor))
        .route("/v1/sessions/{id}/raster", get(handlers::raster))
        .layer(cors)
        .with_state(state)
}

/// Evicts idle sessions every `period` for as long as the runtime lives.
pub fn spawn_evictor(state: AppState, period: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            state.evict_idle(std::time::Instant::now());
        }
    })
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    state.restore();
    let period = (state.config.session_ttl / 10).max(Duration::from_secs(1));
    spawn_evictor(state.clone(), period);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
