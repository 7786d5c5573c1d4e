//! Session-oriented JSON API over the narration and QA pipeline.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /api/session` | open a session, optionally with a database DSN |
//! | `GET /api/schema` | tables and columns of the session's database |
//! | `POST /api/narrate` | EXPLAIN a query and narrate the plan |
//! | `POST /api/narrate-file` | narrate EXPLAIN JSON sent as the body |
//! | `POST /api/qa` | answer a question about a narrated plan |
//! | `GET /api/plan/{id}/raw` | the plan JSON as ingested |
//! | `GET /api/plan/{id}/step/{k}/audio` | spoken narration of one step |
//!
//! Errors use the envelope `{"error": {"code", "message"}}`.

mod error;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use qep_core::answer_generator::AnswerPayload;
use qep_core::plan_ingest::{fetch_plan_text, fetch_schema, DatabaseConnection, DEFAULT_STATEMENT_TIMEOUT};
use qep_core::report::{plan_id, NarrateResponse};
use qep_core::{PlanContext, PlanSource, QaEngine, QuestionCategory, TtsConfig, Vocalizer};

pub use error::ApiError;
pub use session::{Session, SessionStore, DEFAULT_SESSION_TTL};

pub const DEFAULT_PORT: u16 = 8964;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    pub statement_timeout: Duration,
    pub tts: TtsConfig,
    /// Origins allowed by CORS; empty allows any origin.
    pub cors_origins: Vec<String>,
    /// Directory of UI assets served under `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            session_ttl: DEFAULT_SESSION_TTL,
            statement_timeout: DEFAULT_STATEMENT_TIMEOUT,
            tts: TtsConfig::default(),
            cors_origins: Vec::new(),
            static_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<QaEngine>,
    sessions: Arc<SessionStore>,
    vocalizer: Arc<Vocalizer>,
    statement_timeout: Duration,
}

impl AppState {
    pub fn new(engine: QaEngine, config: &ServiceConfig) -> Self {
        AppState {
            engine: Arc::new(engine),
            sessions: Arc::new(SessionStore::new(config.session_ttl)),
            vocalizer: Arc::new(Vocalizer::new(config.tts.clone())),
            statement_timeout: config.statement_timeout,
        }
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/schema", get(schema))
        .route("/api/narrate", post(narrate_sql))
        .route("/api/narrate-file", post(narrate_file))
        .route("/api/qa", post(ask))
        .route("/api/plan/{id}/raw", get(raw_plan))
        .route("/api/plan/{id}/step/{k}/audio", get(step_audio))
        .with_state(state);
    let api = match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.layer(cors(&config.cors_origins))
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.is_empty() {
        return layer.allow_origin(Any);
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
    layer.allow_origin(AllowOrigin::list(list))
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, engine: QaEngine, config: ServiceConfig) -> std::io::Result<()> {
    let app = router(AppState::new(engine, &config), &config);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, tts = config.tts.enabled(), "listening");
    axum::serve(listener, app).await
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr, engine: QaEngine, config: ServiceConfig) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, engine, config))
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let body = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Deserialize)]
struct SessionRequest {
    dsn: Option<String>,
}

#[derive(Serialize)]
struct SessionReply {
    session_id: String,
    live: bool,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Json<SessionReply>, ApiError> {
    let req: SessionRequest = parse_json(&body)?;
    let connection = match req.dsn.filter(|d| !d.trim().is_empty()) {
        Some(dsn) => {
            let timeout = state.statement_timeout;
            let conn = blocking(move || Ok(DatabaseConnection::connect(&dsn)?.with_statement_timeout(timeout))).await?;
            Some(conn)
        }
        None => None,
    };
    let live = connection.is_some();
    let session_id = state.sessions.create(connection);
    Ok(Json(SessionReply { session_id, live }))
}

#[derive(Deserialize)]
struct SessionQuery {
    session_id: Option<String>,
}

impl SessionQuery {
    fn id(self) -> Result<String, ApiError> {
        self.session_id
            .ok_or_else(|| ApiError::bad_request("missing session_id query parameter"))
    }
}

async fn schema(State(state): State<AppState>, Query(q): Query<SessionQuery>) -> Result<Response, ApiError> {
    let conn = state.sessions.connection(&q.id()?)?;
    let info = blocking(move || {
        let mut conn = conn.lock().map_err(|_| ApiError::internal("connection lock poisoned"))?;
        Ok(fetch_schema(&mut conn)?)
    })
    .await?;
    Ok(Json(info).into_response())
}

fn narrate_reply(state: &AppState, session_id: &str, ctx: PlanContext) -> Result<Response, ApiError> {
    let body = NarrateResponse::new(&ctx).to_body();
    state
        .sessions
        .store_plan(session_id, plan_id(&ctx.raw_text), Arc::new(ctx))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

#[derive(Deserialize)]
struct NarrateRequest {
    session_id: String,
    sql: String,
    #[serde(default = "default_analyze")]
    analyze: bool,
}

fn default_analyze() -> bool {
    true
}

async fn narrate_sql(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: NarrateRequest = parse_json(&body)?;
    let conn = state.sessions.connection(&req.session_id)?;
    let engine = state.engine.clone();
    let (sql, analyze) = (req.sql, req.analyze);
    let ctx = blocking(move || {
        let text = {
            let mut conn = conn.lock().map_err(|_| ApiError::internal("connection lock poisoned"))?;
            fetch_plan_text(&mut conn, &sql, analyze)?
        };
        Ok(PlanContext::from_json_text(text, PlanSource::LiveDatabase, &engine.templates)?)
    })
    .await?;
    narrate_reply(&state, &req.session_id, ctx)
}

async fn narrate_file(
    State(state): State<AppState>,
    Query(q): Query<SessionQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let session_id = q.id()?;
    state.sessions.with(&session_id, |_| ())?;
    let text = String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::from(qep_core::IngestError::MalformedPlan("plan is not UTF-8 text".into())))?;
    let ctx = PlanContext::from_json_text(text, PlanSource::File, &state.engine.templates)?;
    narrate_reply(&state, &session_id, ctx)
}

#[derive(Deserialize)]
struct QaRequest {
    session_id: String,
    plan_id: String,
    question: String,
}

#[derive(Debug, Serialize)]
struct QaReply {
    category: QuestionCategory,
    answer_text: String,
    payload: Option<AnswerPayload>,
    /// Set when the question could not be answered; `answer_text` then
    /// explains why.
    #[serde(skip_serializing_if = "Option::is_none")]
    error_code: Option<&'static str>,
}

async fn ask(State(state): State<AppState>, body: Bytes) -> Result<Json<QaReply>, ApiError> {
    let req: QaRequest = parse_json(&body)?;
    let ctx = state.sessions.plan(&req.session_id, &req.plan_id)?;
    let reply = match state.engine.reply(&req.question, &ctx) {
        Ok(a) => QaReply {
            category: a.category,
            answer_text: a.text,
            payload: Some(a.payload),
            error_code: None,
        },
        Err((category, text, error)) => QaReply {
            category,
            answer_text: text,
            payload: None,
            error_code: Some(error.code()),
        },
    };
    Ok(Json(reply))
}

async fn raw_plan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SessionQuery>,
) -> Result<Response, ApiError> {
    let ctx = state.sessions.plan(&q.id()?, &id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], ctx.raw_text.clone()).into_response())
}

async fn step_audio(
    State(state): State<AppState>,
    Path((id, k)): Path<(String, String)>,
    Query(q): Query<SessionQuery>,
) -> Result<Response, ApiError> {
    let ctx = state.sessions.plan(&q.id()?, &id)?;
    let unknown = || {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "UnknownStep",
            format!("no step {k}; the plan has {} steps", ctx.step_count()),
        )
    };
    let step = k.parse::<usize>().ok().and_then(|k| ctx.script.step(k)).ok_or_else(unknown)?;
    let text = step.text.clone();
    let vocalizer = state.vocalizer.clone();
    let clip = blocking(move || Ok(vocalizer.synthesize(&text)?)).await?;
    Ok((
        [(header::CONTENT_TYPE, clip.content_type.clone())],
        clip.bytes.to_vec(),
    )
        .into_response())
}
