//! Session-scoped belief tracking and policy queries over HTTP.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | `GET` | `/healthz` | | `{"status":"ok"}` |
//! | `POST` | `/sessions` | [`CreateSession`] | [`SessionInfo`] (201) |
//! | `GET` | `/sessions/{id}` | | [`SessionInfo`] |
//! | `POST` | `/sessions/{id}/step` | [`StepRequest`] | [`StepRecord`] |
//! | `POST` | `/sessions/{id}/steps` | `{"steps": [StepRequest]}` | `{"results": [StepRecord]}` |
//! | `GET` | `/sessions/{id}/trace` | | `{"id", "steps": [StepRecord]}` |
//! | `GET` | `/sessions/{id}/events` | | server-sent `step` events carrying [`StepRecord`] |
//!
//! Every step is act-then-observe: the transparency is chosen from the belief
//! before the step's observation is incorporated. Errors come back as
//! `{"error": kind, "message": text}`.

pub mod error;
pub mod session;

use std::collections::HashMap;
use std::convert::Infallible;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, Mutex};

pub use error::ServiceError;
pub use session::{CreateSession, Session, SessionInfo, StepRecord, StepRequest};

const EVENT_BUFFER: usize = 1024;

struct Slot {
    session: Session,
    journal: Option<File>,
}

struct Entry {
    slot: Mutex<Slot>,
    events: broadcast::Sender<StepRecord>,
}

/// Shared service state. Sessions are isolated from each other; steps within
/// a session are serialized by a per-session lock.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Default)]
struct Inner {
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    counter: AtomicU64,
    journal_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum JournalLine {
    Create(Box<CreateSession>),
    Step(StepRequest),
}

fn journal_line(file: &mut File, line: &JournalLine) -> std::io::Result<()> {
    let mut s = serde_json::to_string(line).map_err(std::io::Error::other)?;
    s.push('\n');
    file.write_all(s.as_bytes())
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Journals every session to `<dir>/<id>.jsonl`.
    pub fn with_journal(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { inner: Arc::new(Inner { journal_dir: Some(dir), ..Inner::default() }) })
    }

    /// Rebuilds sessions from the journals in the configured directory by
    /// replaying their steps. Returns the recovered session ids.
    pub fn recover(&self) -> Result<Vec<String>, ServiceError> {
        let Some(dir) = &self.inner.journal_dir else {
            return Ok(Vec::new());
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut ids = Vec::new();
        for path in paths {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let session = replay_journal(&path, id.clone())?;
            let journal = OpenOptions::new().append(true).open(&path)?;
            if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                self.inner.counter.fetch_max(n, Ordering::SeqCst);
            }
            self.insert(session, Some(journal));
            ids.push(id);
        }
        Ok(ids)
    }

    fn insert(&self, session: Session, journal: Option<File>) {
        let id = session.id().to_string();
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        let entry = Arc::new(Entry { slot: Mutex::new(Slot { session, journal }), events });
        self.inner.sessions.write().expect("session map poisoned").insert(id, entry);
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ServiceError> {
        self.inner
            .sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionInfo, ServiceError> {
        let n = self.inner.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("s{n:06}");
        let session = Session::new(id.clone(), &req)?;
        let journal = match &self.inner.journal_dir {
            Some(dir) => {
                let mut f = OpenOptions::new().create_new(true).append(true).open(dir.join(format!("{id}.jsonl")))?;
                journal_line(&mut f, &JournalLine::Create(Box::new(req)))?;
                Some(f)
            }
            None => None,
        };
        let info = session.info();
        self.insert(session, journal);
        Ok(info)
    }

    pub async fn info(&self, id: &str) -> Result<SessionInfo, ServiceError> {
        Ok(self.entry(id)?.slot.lock().await.session.info())
    }

    pub async fn step(&self, id: &str, reqs: &[StepRequest]) -> Result<Vec<StepRecord>, ServiceError> {
        let entry = self.entry(id)?;
        let mut slot = entry.slot.lock().await;
        let mut out = Vec::with_capacity(reqs.len());
        for req in reqs {
            if let Some(f) = slot.journal.as_mut() {
                journal_line(f, &JournalLine::Step(*req))?;
            }
            let rec = slot.session.step(req);
            // no subscribers is fine
            let _ = entry.events.send(rec);
            out.push(rec);
        }
        Ok(out)
    }

    pub async fn trace(&self, id: &str) -> Result<Vec<StepRecord>, ServiceError> {
        Ok(self.entry(id)?.slot.lock().await.session.trace().to_vec())
    }

    pub fn subscribe(&self, id: &str) -> Result<broadcast::Receiver<StepRecord>, ServiceError> {
        Ok(self.entry(id)?.events.subscribe())
    }
}

fn replay_journal(path: &Path, id: String) -> Result<Session, ServiceError> {
    let bad = |msg: String| ServiceError::Core(trustcal_core::Error::Parse(format!("{}: {msg}", path.display())));
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| bad("empty journal".into()))??;
    let JournalLine::Create(req) = serde_json::from_str(&first).map_err(|e| bad(e.to_string()))? else {
        return Err(bad("first line must be a create record".into()));
    };
    let mut session = Session::new(id, &req)?;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| bad(e.to_string()))? {
            JournalLine::Step(req) => {
                session.step(&req);
            }
            JournalLine::Create(_) => return Err(bad("duplicate create record".into())),
        }
    }
    Ok(session)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchRequest {
    pub steps: Vec<StepRequest>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchResponse {
    pub results: Vec<StepRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceResponse {
    pub id: String,
    pub steps: Vec<StepRecord>,
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionInfo>), ServiceError> {
    let info = state.create_session(req)?;
    tracing::info!(session = %info.id, "session created");
    Ok((StatusCode::CREATED, Json(info)))
}

async fn info(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionInfo>, ServiceError> {
    Ok(Json(state.info(&id).await?))
}

async fn step(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<StepRequest>,
) -> Result<Json<StepRecord>, ServiceError> {
    let mut recs = state.step(&id, &[req]).await?;
    Ok(Json(recs.pop().expect("one step in, one record out")))
}

async fn steps(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<BatchRequest>,
) -> Result<Json<BatchResponse>, ServiceError> {
    Ok(Json(BatchResponse { results: state.step(&id, &req.steps).await? }))
}

async fn trace(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<TraceResponse>, ServiceError> {
    let steps = state.trace(&id).await?;
    Ok(Json(TraceResponse { id, steps }))
}

async fn events(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ServiceError> {
    let rx = state.subscribe(&id)?;
    let stream = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(rec) => {
                    let event = Event::default().event("step").json_data(rec).expect("step record serializes");
                    return Some((Ok(event), rx));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "event subscriber lagged");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(info))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/steps", post(steps))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
