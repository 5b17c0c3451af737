//! HTTP and WebSocket service around the emotion pipeline.
//!
//! Routes:
//! - `POST /api/session` with `{"name": ...}` creates a session.
//! - `POST /api/session/{id}/predict` with PNG or JPEG bytes predicts one image.
//! - `GET /api/session/{id}/live` upgrades to a WebSocket; each binary frame
//!   gets one JSON reply with boxes and the running engagement score.
//! - `GET /api/session/{id}/report` summarizes the session's log.
//!
//! Every prediction is appended to `{sessions_dir}/{id}.jsonl`; reports are
//! computed from that file alone.

mod api;
pub mod config;
pub mod engine;
pub mod error;
pub mod store;

pub use api::{
    router, AppState, FileInfo, LiveError, LiveReply, PredictResponse, TableRow, FILE_NAME_HEADER, MAX_NAME_LEN,
    MAX_UPLOAD_BYTES,
};
pub use config::{ServiceConfig, CONFIG_ENV};
pub use engine::Engine;
pub use error::{ApiError, ServiceError};
pub use store::{FaceOut, LogStore, Mode, PredictionRecord, Record, Report, SessionInfo};

/// Builds the state described by `config`.
pub fn state_from_config(config: &ServiceConfig) -> Result<AppState, ServiceError> {
    let engine = Engine::from_config(config)?;
    let store = LogStore::open(&config.sessions_dir)?;
    Ok(AppState::new(engine, store, config.static_dir.clone()))
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = state_from_config(&config)?;
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
