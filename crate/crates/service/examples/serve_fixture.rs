//! Starts the service with the bundled cascade and an untrained model.
//!
//! `cargo run -p fer-service --example serve_fixture -- [addr]`, then e.g.
//! `curl -s -XPOST localhost:8080/api/session -d '{"name":"demo"}'`.

use std::path::PathBuf;

use fer_service::{serve, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), fer_service::ServiceError> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let mut config = ServiceConfig {
        fixture_mode: true,
        cascade: root.join("../../fixtures/cascades/haarcascade_frontalface_default.xml"),
        sessions_dir: std::env::temp_dir().join("fer-sessions"),
        static_dir: Some(root.join("static")),
        ..ServiceConfig::default()
    };
    if let Some(addr) = std::env::args().nth(1) {
        config.bind = addr.parse().map_err(|e| fer_service::ServiceError::Config(format!("{addr}: {e}")))?;
    }
    println!("listening on http://{}", config.bind);
    serve(config).await
}
