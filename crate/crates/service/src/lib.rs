//! HTTP JSON service for interactive guessing games on shuffled decks.
//!
//! Sessions live in memory and expire after a period of inactivity.
//! Completed games are appended to a JSON-lines log when a log path is set.
//! No response carries a hidden card before the game's rules turn it face
//! up: complete-feedback games reveal one position per guess, and
//! no-feedback games reveal the whole deck with the last guess.

pub mod analysis;
pub mod error;
pub mod gamelog;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock, TryLockError};
use std::time::{Duration, SystemTime};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shelflab_core::feedback::Mode;
use shelflab_core::position_matrix;

use crate::analysis::{Analysis, Expectation};
use crate::error::{ApiError, ApiResult};
use crate::gamelog::{GameLogRecord, LogSender};
use crate::session::{unix_millis, GameConfig, Session, TranscriptEntry};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);
/// Largest deck served by `/analysis/position-matrix`.
pub const MATRIX_ENDPOINT_LIMIT: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceConfig {
    pub port: u16,
    pub log_path: Option<PathBuf>,
    /// Directory of static assets served for paths no route claims.
    pub static_dir: Option<PathBuf>,
    pub ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: DEFAULT_PORT,
            log_path: None,
            static_dir: None,
            ttl: DEFAULT_TTL,
        }
    }
}

impl ServiceConfig {
    /// Reads `SHELFLAB_PORT`, `SHELFLAB_LOG_PATH` and `SHELFLAB_STATIC_DIR`.
    pub fn from_env() -> Result<Self, String> {
        let mut cfg = ServiceConfig::default();
        if let Ok(p) = std::env::var("SHELFLAB_PORT") {
            cfg.port = p.parse().map_err(|e| format!("SHELFLAB_PORT={p:?}: {e}"))?;
        }
        cfg.log_path = std::env::var_os("SHELFLAB_LOG_PATH").map(PathBuf::from);
        cfg.static_dir = std::env::var_os("SHELFLAB_STATIC_DIR").map(PathBuf::from);
        Ok(cfg)
    }
}

type SessionRef = Arc<Mutex<Session>>;

struct Inner {
    sessions: RwLock<HashMap<String, SessionRef>>,
    analysis: Analysis,
    log: Option<LogSender>,
    ttl: Duration,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(ttl: Duration, log: Option<LogSender>) -> Self {
        AppState {
            inner: Arc::new(Inner {
                sessions: RwLock::new(HashMap::new()),
                analysis: Analysis::default(),
                log,
                ttl,
            }),
        }
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap().len()
    }

    fn expired(&self, s: &Session, now: SystemTime) -> bool {
        now.duration_since(s.updated())
            .is_ok_and(|idle| idle > self.inner.ttl)
    }

    /// Drops sessions idle for longer than the TTL. Sessions busy with a
    /// request are kept. Returns how many were dropped.
    pub fn evict_expired(&self) -> usize {
        let now = SystemTime::now();
        let mut map = self.inner.sessions.write().unwrap();
        let before = map.len();
        map.retain(|_, s| match s.try_lock() {
            Ok(s) => !self.expired(&s, now),
            Err(_) => true,
        });
        before - map.len()
    }

    fn session(&self, id: &str) -> ApiResult<SessionRef> {
        let s = self
            .inner
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))?;
        let expired = match s.try_lock() {
            Ok(g) => self.expired(&g, SystemTime::now()),
            Err(_) => false,
        };
        if expired {
            self.inner.sessions.write().unwrap().remove(id);
            return Err(ApiError::not_found(format!("session {id:?} expired")));
        }
        Ok(s)
    }
}

/// One request at a time per session; a second one gets a conflict.
fn claim(s: &SessionRef) -> ApiResult<std::sync::MutexGuard<'_, Session>> {
    match s.try_lock() {
        Ok(g) => Ok(g),
        Err(TryLockError::WouldBlock) => Err(ApiError::conflict(
            "busy",
            "another request for this session is in progress",
        )),
        Err(TryLockError::Poisoned(_)) => Err(ApiError::internal("session state is corrupt")),
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    b.map(|Json(v)| v).map_err(|e| {
        let status = if e.status().is_client_error() {
            e.status()
        } else {
            StatusCode::BAD_REQUEST
        };
        ApiError::new(status, "invalid-body", e.body_text())
    })
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request("invalid-query", e.body_text()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/guess", post(submit_guess))
        .route("/sessions/{id}/hint", get(hint))
        .route("/analysis/position-matrix", get(analysis_matrix))
        .route("/analysis/expected", get(analysis_expected))
        .with_state(state)
}

#[derive(Serialize)]
struct Created {
    id: String,
    n: usize,
    shelves: usize,
    mode: Mode,
    positions_remaining: usize,
}

async fn create_session(
    State(app): State<AppState>,
    cfg: Result<Json<GameConfig>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let cfg = body(cfg)?;
    let id = uuid::Uuid::new_v4().to_string();
    let s = blocking({
        let id = id.clone();
        move || Session::new(id, cfg)
    })
    .await?;
    let created = Created {
        id: id.clone(),
        n: cfg.n,
        shelves: cfg.shelves,
        mode: cfg.mode,
        positions_remaining: s.remaining(),
    };
    app.inner
        .sessions
        .write()
        .unwrap()
        .insert(id, Arc::new(Mutex::new(s)));
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Deserialize)]
struct GuessBody {
    card: usize,
}

async fn submit_guess(
    State(app): State<AppState>,
    Path(id): Path<String>,
    b: Result<Json<GuessBody>, JsonRejection>,
) -> ApiResult<Json<session::GuessOutcome>> {
    let s = app.session(&id)?;
    let card = body(b)?.card;
    let mut g = claim(&s)?;
    let out = g.guess(card)?;
    if out.finished {
        if let Some(log) = &app.inner.log {
            let now = SystemTime::now();
            let record = GameLogRecord {
                session_id: g.id().to_string(),
                config: g.config(),
                seed: g.seed(),
                transcript: g.transcript(),
                score: g.state().score(),
                hints: g.transcript().iter().filter(|e| e.hinted).count(),
                created_ms: unix_millis(g.created()),
                finished_ms: unix_millis(now),
                wall_clock_ms: now
                    .duration_since(g.created())
                    .map_or(0, |d| d.as_millis() as u64),
            };
            if log.send(record).is_err() {
                tracing::warn!("game log writer has stopped");
            }
        }
    }
    Ok(Json(out))
}

async fn hint(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<session::Hint>> {
    let s = app.session(&id)?;
    blocking(move || {
        let mut g = claim(&s)?;
        g.hint(&app.inner.analysis)
    })
    .await
    .map(Json)
}

#[derive(Serialize)]
struct Summary {
    id: String,
    config: GameConfig,
    finished: bool,
    /// The next position to guess, while the game is running.
    #[serde(skip_serializing_if = "Option::is_none")]
    position: Option<usize>,
    positions_remaining: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<usize>,
    transcript: Vec<TranscriptEntry>,
    hints: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    expectation: Option<Expectation>,
    /// Percent of simulated games with the default strategy scoring below
    /// this one, ties counted as half.
    #[serde(skip_serializing_if = "Option::is_none")]
    percentile: Option<f64>,
    /// Shuffle seed, disclosed once the game is over.
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    created_ms: u64,
    updated_ms: u64,
}

async fn session_summary(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Summary>> {
    let s = app.session(&id)?;
    blocking(move || {
        let mut summary = {
            let g = s
                .lock()
                .map_err(|_| ApiError::internal("session state is corrupt"))?;
            let finished = g.is_finished();
            let transcript = g.transcript();
            Summary {
                id: g.id().to_string(),
                // The seed fixes the deck, so it only appears after the end.
                config: GameConfig {
                    seed: None,
                    ..g.config()
                },
                finished,
                position: (!finished).then(|| g.state().position()),
                positions_remaining: g.remaining(),
                score: g.visible_score(),
                hints: transcript.iter().filter(|e| e.hinted).count(),
                transcript,
                expectation: None,
                percentile: None,
                seed: finished.then(|| g.seed()),
                created_ms: unix_millis(g.created()),
                updated_ms: unix_millis(g.updated()),
            }
        };
        let GameConfig {
            n, shelves, mode, ..
        } = summary.config;
        let analysis = &app.inner.analysis;
        summary.expectation = analysis.expectation(n, shelves, mode).ok();
        if summary.finished {
            if let (Some(score), Some(sim)) =
                (summary.score, analysis.simulation(n, shelves, mode)?)
            {
                summary.percentile = Some(sim.percentile(score));
            }
        }
        Ok(summary)
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
struct MatrixQuery {
    n: usize,
}

async fn analysis_matrix(q: Result<Query<MatrixQuery>, QueryRejection>) -> ApiResult<Json<Value>> {
    let n = query(q)?.n;
    if !(1..=MATRIX_ENDPOINT_LIMIT).contains(&n) {
        return Err(ApiError::bad_request(
            "invalid-query",
            format!("n must lie in 1..={MATRIX_ENDPOINT_LIMIT}"),
        ));
    }
    blocking(move || {
        let m = position_matrix(n)?;
        let decimal: Vec<Vec<f64>> = (1..=n)
            .map(|i| m.row(i).iter().map(|p| p.to_f64()).collect())
            .collect();
        let mut v = m.to_json();
        v["decimal"] = json!(decimal);
        Ok(v)
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
struct ExpectedQuery {
    n: usize,
    #[serde(default = "default_shelves")]
    shelves: usize,
    #[serde(default = "default_mode")]
    mode: Mode,
}

fn default_shelves() -> usize {
    1
}

fn default_mode() -> Mode {
    Mode::CompleteFeedback
}

async fn analysis_expected(
    State(app): State<AppState>,
    q: Result<Query<ExpectedQuery>, QueryRejection>,
) -> ApiResult<Json<Expectation>> {
    let q = query(q)?;
    GameConfig {
        n: q.n,
        shelves: q.shelves,
        mode: q.mode,
        seed: None,
    }
    .validate()?;
    blocking(move || app.inner.analysis.expectation(q.n, q.shelves, q.mode))
        .await
        .map(Json)
}

/// Binds `0.0.0.0:port` and serves until interrupted.
pub async fn serve(cfg: ServiceConfig) -> std::io::Result<()> {
    let (log, writer) = match &cfg.log_path {
        Some(p) => {
            let (tx, handle) = gamelog::spawn_writer(p.clone());
            (Some(tx), Some(handle))
        }
        None => (None, None),
    };
    let state = AppState::new(cfg.ttl, log);
    let sweeper = {
        let state = state.clone();
        let every = cfg.ttl.min(Duration::from_secs(60));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                let dropped = state.evict_expired();
                if dropped > 0 {
                    tracing::info!(dropped, "evicted idle sessions");
                }
            }
        })
    };
    let mut app = router(state);
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let addr = SocketAddr::from(([0, 0, 0, 0], cfg.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    sweeper.abort();
    let _ = sweeper.await;
    if let Some(w) = writer {
        // The router and its log sender are gone, so the writer drains and
        // returns.
        w.await.map_err(std::io::Error::other)??;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::Body;
    use axum::http::Request;
    use tower::ServiceExt;

    // The held guard stands in for another request mid-guess.
    #[allow(clippy::await_holding_lock)]
    #[tokio::test]
    async fn concurrent_guess_conflicts() {
        let state = AppState::new(DEFAULT_TTL, None);
        let cfg = GameConfig {
            n: 5,
            shelves: 1,
            mode: Mode::CompleteFeedback,
            seed: Some(1),
        };
        let s = Arc::new(Mutex::new(Session::new("s".into(), cfg).unwrap()));
        state
            .inner
            .sessions
            .write()
            .unwrap()
            .insert("s".into(), s.clone());
        let app = router(state);
        let req = || {
            Request::post("/sessions/s/guess")
                .header("content-type", "application/json")
                .body(Body::from(r#"{"card": 1}"#))
                .unwrap()
        };
        let held = s.lock().unwrap();
        let resp = app.clone().oneshot(req()).await.unwrap();
        assert_eq!(resp.status(), StatusCode::CONFLICT);
        drop(held);
        let resp = app.oneshot(req()).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        assert_eq!(s.lock().unwrap().state().guesses(), &[1]);
    }
}
