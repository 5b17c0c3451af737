use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{SecondsFormat, Utc};
use fer_core::pipeline::{engagement_score, EmotionLabel, FramePrediction};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::engine::Engine;
use crate::error::ApiError;
use crate::store::{FaceOut, LogStore, Mode, PredictionRecord, Record, Report, SessionInfo};

/// Longest accepted session name, in characters.
pub const MAX_NAME_LEN: usize = 64;
/// Upload size limit for images.
pub const MAX_UPLOAD_BYTES: usize = 16 * 1024 * 1024;
/// Request header carrying the uploaded file's name.
pub const FILE_NAME_HEADER: &str = "x-file-name";

struct Session {
    info: SessionInfo,
    seq: u64,
    history: VecDeque<FramePrediction>,
}

struct Inner {
    engine: Arc<Engine>,
    store: LogStore,
    static_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(engine: Engine, store: LogStore, static_dir: Option<PathBuf>) -> Self {
        Self(Arc::new(Inner {
            engine: Arc::new(engine),
            store,
            static_dir,
            sessions: RwLock::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &LogStore {
        &self.0.store
    }

    pub fn engine(&self) -> &Engine {
        &self.0.engine
    }

    /// In-memory session, or one rebuilt from its log after a restart.
    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        if let Some(s) = self.0.sessions.read().unwrap().get(id) {
            return Ok(s.clone());
        }
        let records = self
            .0
            .store
            .read(id)
            .map_err(ApiError::internal)?
            .ok_or_else(|| ApiError::not_found(id))?;
        let Some(Record::Session(info)) = records.first() else {
            return Err(ApiError::internal(format!("log of {id} has no session record")));
        };
        let window = self.0.engine.engagement.window_len;
        let live: Vec<&PredictionRecord> = records
            .iter()
            .filter_map(|r| match r {
                Record::Prediction(p) if p.mode == Mode::Live => Some(p),
                _ => None,
            })
            .collect();
        let session = Session {
            info: info.clone(),
            seq: live.iter().filter_map(|p| p.seq).max().unwrap_or(0),
            history: live[live.len().saturating_sub(window)..]
                .iter()
                .map(|p| p.to_frame())
                .collect(),
        };
        let mut map = self.0.sessions.write().unwrap();
        Ok(map
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(session)))
            .clone())
    }
}

/// The service's routes, plus the web UI at `/` when a static dir is set.
pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/predict", post(predict))
        .route("/api/session/{id}/live", get(live))
        .route("/api/session/{id}/report", get(report))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES));
    let api = match &state.0.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

fn now_iso() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Deserialize)]
struct CreateSession {
    name: String,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Json<SessionInfo>, ApiError> {
    let req: CreateSession = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("expected {{\"name\": string}}: {e}")))?;
    let name = req.name.trim();
    if name.is_empty() || name.chars().count() > MAX_NAME_LEN {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("name must be 1 to {MAX_NAME_LEN} characters"),
        ));
    }
    let info = SessionInfo {
        id: uuid::Uuid::new_v4().simple().to_string(),
        name: name.to_string(),
        created: now_iso(),
    };
    state.0.store.create(&info).map_err(ApiError::internal)?;
    let session = Session {
        info: info.clone(),
        seq: 0,
        history: VecDeque::new(),
    };
    state
        .0
        .sessions
        .write()
        .unwrap()
        .insert(info.id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(id = %info.id, name = %info.name, "session created");
    Ok(Json(info))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileInfo {
    pub name: Option<String>,
    pub bytes: usize,
    pub format: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: EmotionLabel,
    pub probability: f32,
}

/// Reply to a single-image upload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub session: String,
    pub timestamp: String,
    pub file: FileInfo,
    pub faces: Vec<FaceOut>,
    pub no_face: bool,
    /// Class probabilities of the largest face; empty without a face.
    pub table: Vec<TableRow>,
}

/// Reply to one live frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveReply {
    pub seq: u64,
    pub timestamp: String,
    /// `YYYY-MM-DD`, UTC.
    pub date: String,
    pub boxes: Vec<FaceOut>,
    pub engagement: f64,
}

/// Reply to a live frame that could not be processed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveError {
    pub seq: u64,
    pub error: String,
}

enum FrameError {
    Decode(String),
    Internal(String),
}

/// Decodes and predicts off the async runtime.
async fn run_frame(engine: Arc<Engine>, bytes: Bytes) -> Result<(crate::engine::Decoded, FramePrediction), FrameError> {
    tokio::task::spawn_blocking(move || {
        let decoded = Engine::decode(&bytes).map_err(|e| FrameError::Decode(e.to_string()))?;
        let frame = engine
            .predict(&decoded.image)
            .map_err(|e| FrameError::Internal(e.to_string()))?;
        Ok((decoded, frame))
    })
    .await
    .map_err(|e| FrameError::Internal(e.to_string()))?
}

async fn predict(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<PredictResponse>, ApiError> {
    let session = state.session(&id)?;
    let size = body.len();
    let (decoded, frame) = run_frame(state.0.engine.clone(), body).await.map_err(|e| match e {
        FrameError::Decode(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, m),
        FrameError::Internal(m) => ApiError::internal(m),
    })?;
    let faces: Vec<FaceOut> = frame.faces.iter().map(FaceOut::from).collect();
    let table = frame
        .largest_face()
        .map(|f| {
            EmotionLabel::ALL[..8]
                .iter()
                .zip(f.distribution.probs)
                .map(|(&label, probability)| TableRow { label, probability })
                .collect()
        })
        .unwrap_or_default();
    let timestamp = now_iso();
    let record = PredictionRecord {
        session: id.clone(),
        timestamp: timestamp.clone(),
        mode: Mode::Static,
        seq: None,
        faces: faces.clone(),
        engagement: None,
    };
    {
        let _guard = session.lock().unwrap();
        state
            .0
            .store
            .append(&id, &Record::Prediction(record))
            .map_err(ApiError::internal)?;
    }
    Ok(Json(PredictResponse {
        session: id,
        timestamp,
        file: FileInfo {
            name: headers
                .get(FILE_NAME_HEADER)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string),
            bytes: size,
            format: decoded.format.to_string(),
            width: decoded.width,
            height: decoded.height,
        },
        no_face: faces.is_empty(),
        faces,
        table,
    }))
}

async fn report(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Report>, ApiError> {
    let records = state
        .0
        .store
        .read(&id)
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::not_found(&id))?;
    Report::from_records(&records)
        .map(Json)
        .ok_or_else(|| ApiError::internal(format!("log of {id} has no session record")))
}

async fn live(State(state): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    match state.session(&id) {
        Ok(session) => ws.on_upgrade(move |socket| live_loop(state, id, session, socket)),
        Err(e) => e.into_response(),
    }
}

async fn live_loop(state: AppState, id: String, session: Arc<Mutex<Session>>, mut socket: WebSocket) {
    while let Some(Ok(msg)) = socket.recv().await {
        let result = match msg {
            Message::Binary(bytes) => run_frame(state.0.engine.clone(), bytes).await,
            Message::Text(_) => Err(FrameError::Decode("expected a binary image frame".into())),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = {
            let mut s = session.lock().unwrap();
            s.seq += 1;
            let seq = s.seq;
            match result {
                Ok((_, frame)) => live_step(&state, &id, &mut s, frame),
                Err(FrameError::Decode(error) | FrameError::Internal(error)) => {
                    serde_json::to_string(&LiveError { seq, error })
                }
            }
        };
        let text = match reply {
            Ok(t) => t,
            Err(e) => {
                tracing::error!(%e, "live reply");
                break;
            }
        };
        if socket.send(Message::Text(text.into())).await.is_err() {
            break;
        }
    }
}

fn live_step(state: &AppState, id: &str, s: &mut Session, frame: FramePrediction) -> serde_json::Result<String> {
    let cfg = &state.0.engine.engagement;
    s.history.push_back(frame);
    while s.history.len() > cfg.window_len {
        s.history.pop_front();
    }
    let history: Vec<FramePrediction> = s.history.iter().cloned().collect();
    let engagement = engagement_score(&history, cfg).unwrap_or(cfg.no_face_score);
    let now = Utc::now();
    let boxes: Vec<FaceOut> = history.last().unwrap().faces.iter().map(FaceOut::from).collect();
    let reply = LiveReply {
        seq: s.seq,
        timestamp: now.to_rfc3339_opts(SecondsFormat::Millis, true),
        date: now.format("%Y-%m-%d").to_string(),
        boxes,
        engagement,
    };
    let record = PredictionRecord {
        session: id.to_string(),
        timestamp: reply.timestamp.clone(),
        mode: Mode::Live,
        seq: Some(s.seq),
        faces: reply.boxes.clone(),
        engagement: Some(engagement),
    };
    if let Err(e) = state.0.store.append(id, &Record::Prediction(record)) {
        tracing::error!(session = %s.info.id, %e, "log append failed");
        return serde_json::to_string(&LiveError {
            seq: s.seq,
            error: format!("log append failed: {e}"),
        });
    }
    serde_json::to_string(&reply)
}

