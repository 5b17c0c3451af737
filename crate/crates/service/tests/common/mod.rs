//! Shared helpers for the service tests.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use fer_core::pipeline::EngagementConfig;
use fer_service::{router, state_from_config, AppState, ServiceConfig};
use futures_util::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};
use tower::ServiceExt;

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn fixture_bytes(rel: &str) -> Vec<u8> {
    std::fs::read(fixture(rel)).unwrap()
}

pub fn fixture_config(sessions: &Path, window_len: usize) -> ServiceConfig {
    ServiceConfig {
        fixture_mode: true,
        cascade: fixture("cascades/haarcascade_frontalface_default.xml"),
        sessions_dir: sessions.to_path_buf(),
        engagement: EngagementConfig {
            window_len,
            ..EngagementConfig::default()
        },
        ..ServiceConfig::default()
    }
}

pub fn fixture_state(sessions: &Path, window_len: usize) -> AppState {
    state_from_config(&fixture_config(sessions, window_len)).unwrap()
}

/// One request through the router; the body is parsed as JSON when possible.
pub async fn call(state: &AppState, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

pub async fn create_session(state: &AppState, name: &str) -> (StatusCode, Value) {
    let body = serde_json::json!({ "name": name }).to_string();
    call(state, Request::post("/api/session").body(Body::from(body)).unwrap()).await
}

pub async fn new_session(state: &AppState) -> String {
    let (status, v) = create_session(state, "test").await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["id"].as_str().unwrap().to_string()
}

pub async fn predict(state: &AppState, id: &str, bytes: Vec<u8>) -> (StatusCode, Value) {
    let req = Request::post(format!("/api/session/{id}/predict"))
        .header("x-file-name", "upload.png")
        .body(Body::from(bytes))
        .unwrap();
    call(state, req).await
}

pub async fn report(state: &AppState, id: &str) -> (StatusCode, Value) {
    call(state, Request::get(format!("/api/session/{id}/report")).body(Body::empty()).unwrap()).await
}

pub async fn spawn_server(state: AppState) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    addr
}

pub async fn connect_live(addr: SocketAddr, id: &str) -> Result<Ws, tokio_tungstenite::tungstenite::Error> {
    tokio_tungstenite::connect_async(format!("ws://{addr}/api/session/{id}/live"))
        .await
        .map(|(ws, _)| ws)
}

/// Sends one binary frame and returns the JSON reply.
pub async fn send_frame(ws: &mut Ws, bytes: Vec<u8>) -> Value {
    ws.send(Message::Binary(bytes.into())).await.unwrap();
    loop {
        match ws.next().await.expect("stream closed").unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("unexpected message {other:?}"),
        }
    }
}

/// Validates `value` against one definition of the API schema.
pub fn schema_errors(def: &str, value: &Value) -> Vec<String> {
    let text = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../service/schema/api.schema.json")).unwrap();
    let mut schema: Value = serde_json::from_str(&text).unwrap();
    schema["$ref"] = Value::String(format!("#/$defs/{def}"));
    let validator = jsonschema::options()
        .should_validate_formats(true)
        .build(&schema)
        .unwrap();
    validator.iter_errors(value).map(|e| format!("{e} at {}", e.instance_path)).collect()
}

pub fn assert_schema(def: &str, value: &Value) {
    let errors = schema_errors(def, value);
    assert!(errors.is_empty(), "{def}: {errors:?}\n{value}");
}
