//! Live session server: HTTP control endpoints and the dashboard stream.
//!
//! Measure points leave each pipeline only on the push tick, and are
//! published to the snapshot buffers and every attached client under one
//! lock, so a client that attaches mid-session sees its snapshot followed by
//! exactly the points published after it.

use std::collections::{BTreeMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use adt_core::session::{MeasurePoint, SessionConfig, SessionPipeline, SessionSummary};
use adt_core::transport::decode_envelope;
use axum::body::Bytes;
use axum::extract::ws::{Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;
use tracing::{debug, info, warn};

/// Receiver wall clock in epoch milliseconds.
pub fn now_ms() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64() * 1000.0)
}

struct Hub {
    depth: usize,
    recent: BTreeMap<String, VecDeque<(MeasurePoint, u64)>>,
    clients: Vec<mpsc::UnboundedSender<Utf8Bytes>>,
    next_id: u64,
}

impl Hub {
    fn new(depth: usize) -> Self {
        Self { depth, recent: BTreeMap::new(), clients: Vec::new(), next_id: 0 }
    }

    fn publish(&mut self, points: Vec<MeasurePoint>) {
        for p in points {
            let text = Utf8Bytes::from(p.to_json(false).to_string());
            self.clients.retain(|c| c.send(text.clone()).is_ok());
            if self.depth == 0 {
                continue;
            }
            let q = self.recent.entry(p.chan.to_string()).or_default();
            if q.len() == self.depth {
                q.pop_front();
            }
            q.push_back((p, self.next_id));
            self.next_id += 1;
        }
    }

    /// Snapshot frames in publication order, plus a receiver for what follows.
    fn attach(&mut self) -> (Vec<Utf8Bytes>, mpsc::UnboundedReceiver<Utf8Bytes>) {
        let mut all: Vec<&(MeasurePoint, u64)> = self.recent.values().flatten().collect();
        all.sort_by_key(|(_, id)| *id);
        let snapshot = all.into_iter().map(|(p, _)| Utf8Bytes::from(p.to_json(true).to_string())).collect();
        let (tx, rx) = mpsc::unbounded_channel();
        self.clients.push(tx);
        (snapshot, rx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestError {
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub received: usize,
    pub rejected: Vec<RejectedLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: usize,
    pub error: String,
}

/// One running session: its pipeline and dashboard fan-out.
pub struct LiveSession {
    id: String,
    push_interval: Duration,
    record_dir: Option<PathBuf>,
    pipeline: Mutex<SessionPipeline>,
    hub: Mutex<Hub>,
}

impl LiveSession {
    pub fn new(cfg: SessionConfig, record_dir: Option<PathBuf>) -> anyhow::Result<Self> {
        let push_interval = Duration::from_secs_f64(cfg.chart_update_s);
        let hub = Hub::new(cfg.snapshot_depth);
        Ok(Self {
            id: cfg.session_id.clone(),
            push_interval,
            record_dir,
            pipeline: Mutex::new(SessionPipeline::new(cfg)?),
            hub: Mutex::new(hub),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Feeds envelopes in JSONL form, one per line.
    pub fn ingest_jsonl(&self, body: &[u8], arrival_ms: f64) -> Result<IngestReport, IngestError> {
        let mut p = self.pipeline.lock().expect("pipeline lock");
        if p.is_finished() {
            return Err(IngestError::Closed);
        }
        let mut report = IngestReport { received: 0, rejected: Vec::new() };
        for (i, line) in body.split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            match decode_envelope(line) {
                Ok(env) => {
                    p.ingest(env, arrival_ms);
                    report.received += 1;
                }
                Err(e) => report.rejected.push(RejectedLine { line: i + 1, error: e.to_string() }),
            }
        }
        Ok(report)
    }

    /// Advances the pipeline clock and publishes whatever it produced.
    pub fn push(&self, now: f64) {
        let mut p = self.pipeline.lock().expect("pipeline lock");
        p.poll(now);
        let points = p.drain_points();
        if !points.is_empty() {
            self.hub.lock().expect("hub lock").publish(points);
        }
    }

    /// Proctor stop: closes every window, publishes the remainder and
    /// writes the recording when a directory is configured.
    pub fn stop(&self, now: f64) -> anyhow::Result<SessionSummary> {
        let mut p = self.pipeline.lock().expect("pipeline lock");
        let first = !p.is_finished();
        p.stop(now);
        let points = p.drain_points();
        self.hub.lock().expect("hub lock").publish(points);
        if first {
            if let Some(dir) = &self.record_dir {
                let path = dir.join(format!("{}.jsonl", self.id));
                p.recording().save(&path)?;
                info!(session = %self.id, path = %path.display(), "recording saved");
            }
        }
        Ok(p.summary())
    }

    pub fn is_finished(&self) -> bool {
        self.pipeline.lock().expect("pipeline lock").is_finished()
    }

    pub fn summary(&self) -> SessionSummary {
        self.pipeline.lock().expect("pipeline lock").summary()
    }

    pub fn recording_jsonl(&self) -> Vec<u8> {
        let rec = self.pipeline.lock().expect("pipeline lock").recording();
        let mut out = Vec::new();
        rec.write_jsonl(&mut out).expect("writing to memory");
        out
    }

    fn attach(&self) -> (Vec<Utf8Bytes>, mpsc::UnboundedReceiver<Utf8Bytes>) {
        self.hub.lock().expect("hub lock").attach()
    }

    fn listing(&self) -> SessionListing {
        let p = self.pipeline.lock().expect("pipeline lock");
        SessionListing {
            session_id: self.id.clone(),
            users: p.users().to_vec(),
            finished: p.is_finished(),
            samples_accepted: p.samples_accepted(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionListing {
    pub session_id: String,
    pub users: Vec<String>,
    pub finished: bool,
    pub samples_accepted: usize,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<BTreeMap<String, Arc<LiveSession>>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a session and starts its push ticker.
    pub fn add(&self, session: LiveSession) -> Arc<LiveSession> {
        let session = Arc::new(session);
        self.sessions.write().expect("sessions lock").insert(session.id.clone(), session.clone());
        let ticking = session.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(ticking.push_interval);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tick.tick().await;
                if ticking.is_finished() {
                    break;
                }
                ticking.push(now_ms());
            }
        });
        session
    }

    pub fn get(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.sessions.read().expect("sessions lock").get(id).cloned()
    }

    pub fn all(&self) -> Vec<Arc<LiveSession>> {
        self.sessions.read().expect("sessions lock").values().cloned().collect()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", get(list_sessions))
        .route("/sessions/{id}/summary", get(summary))
        .route("/sessions/{id}/stop", post(stop))
        .route("/sessions/{id}/ingest", post(ingest))
        .route("/sessions/{id}/recording", get(recording))
        .route("/ws/sessions/{id}", get(stream))
        .with_state(state)
}

/// Binds `addr` and serves until the returned handle is dropped or aborted.
pub async fn spawn(addr: SocketAddr, state: AppState) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(state);
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            warn!(error = %e, "server stopped");
        }
    });
    Ok((local, handle))
}

fn unknown(id: &str) -> Response {
    (StatusCode::NOT_FOUND, Json(json!({ "error": format!("unknown session {id:?}") }))).into_response()
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<SessionListing>> {
    Json(state.all().iter().map(|s| s.listing()).collect())
}

async fn summary(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.get(&id) {
        Some(s) => Json(s.summary()).into_response(),
        None => unknown(&id),
    }
}

async fn stop(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(s) = state.get(&id) else { return unknown(&id) };
    match s.stop(now_ms()) {
        Ok(summary) => Json(summary).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response(),
    }
}

async fn ingest(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some(s) = state.get(&id) else { return unknown(&id) };
    match s.ingest_jsonl(&body, now_ms()) {
        Ok(report) => Json(report).into_response(),
        Err(IngestError::Closed) => {
            (StatusCode::CONFLICT, Json(json!({ "error": format!("session {id:?} is stopped") }))).into_response()
        }
    }
}

async fn recording(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.get(&id) {
        Some(s) => ([(header::CONTENT_TYPE, "application/x-ndjson")], s.recording_jsonl()).into_response(),
        None => unknown(&id),
    }
}

async fn stream(State(state): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    match state.get(&id) {
        Some(s) => ws.on_upgrade(move |socket| serve_client(socket, s)),
        None => unknown(&id),
    }
}

/// Messages a dashboard may send. None of them alter the stream.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ClientMessage {
    Ping,
}

async fn serve_client(socket: WebSocket, session: Arc<LiveSession>) {
    let (snapshot, mut live) = session.attach();
    let (mut tx, mut rx) = socket.split();
    for frame in snapshot {
        if tx.send(Message::Text(frame)).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            point = live.recv() => match point {
                Some(frame) => {
                    if tx.send(Message::Text(frame)).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(msg) => debug!(session = %session.id, ?msg, "client message"),
                    Err(e) => warn!(session = %session.id, error = %e, "ignoring malformed client message"),
                },
                Some(Ok(Message::Binary(_))) => warn!(session = %session.id, "ignoring binary client message"),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    debug!(session = %session.id, "client detached");
}
