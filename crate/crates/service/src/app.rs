use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use litnav_core::agent::{
    Agent, AgentError, Artifacts, Assets, Clock, HistoryEntry, LlmProvider, Session, SessionState,
};
use litnav_core::bkg::GraphDump;
use litnav_core::client::LocalCorpusClient;
use litnav_core::corpus::{CorpusStore, IngestStats};
use litnav_core::embed::EmbeddingProvider;
use litnav_core::mining::{MiningError, MiningParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::config::ServiceConfig;
use crate::payload::{landscape, topic_bundle, Landscape, TopicBundle};
use crate::store::{DataDir, PersistedSession};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("data directory: {0}")]
    Data(#[from] std::io::Error),
    #[error("corpus {path}: {source}")]
    Corpus { path: String, source: std::io::Error },
}

/// JSON error body `{error: {code, message}}` with its status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into() }
    }

    fn not_found(what: &str, id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} `{id}`"))
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// One session plus the lock-free view the read endpoints serve from.
struct Slot {
    corpus_id: Option<String>,
    in_flight: AtomicBool,
    session: Mutex<Session>,
    view: RwLock<View>,
}

#[derive(Clone)]
struct View {
    snapshot: Value,
    state: SessionState,
    artifacts: Option<Arc<Artifacts>>,
}

impl View {
    fn of(s: &Session) -> View {
        View {
            snapshot: serde_json::to_value(s).expect("sessions serialize"),
            state: s.state,
            artifacts: s.artifacts().cloned(),
        }
    }
}

/// Clears the in-flight flag when the request finishes, even on panic.
struct InFlight(Arc<Slot>);

impl InFlight {
    fn acquire(slot: &Arc<Slot>) -> Result<InFlight, ApiError> {
        slot.in_flight
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| InFlight(slot.clone()))
            .map_err(|_| ApiError::new(StatusCode::CONFLICT, "in_flight", "a request for this session is in progress"))
    }
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.0.in_flight.store(false, Ordering::Release);
    }
}

/// Provider, embedder and clock the service runs with.
pub struct Parts {
    pub provider: Arc<dyn LlmProvider>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub clock: Arc<dyn Clock>,
    pub assets: Arc<Assets>,
    pub params: MiningParams,
}

pub struct AppState {
    config: ServiceConfig,
    parts: Parts,
    data: DataDir,
    default_corpus: Arc<CorpusStore>,
    corpora: RwLock<HashMap<String, Arc<CorpusStore>>>,
    agents: Mutex<HashMap<Option<String>, Arc<Agent>>>,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

pub fn random_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl AppState {
    /// Loads corpora and persisted sessions. Sessions past approval have
    /// their artifacts rebuilt, so they resume where they stopped.
    pub fn open(config: ServiceConfig, parts: Parts) -> Result<Arc<AppState>, StartupError> {
        let data = DataDir::open(&config.data_dir)?;
        let mut lines = Vec::new();
        for path in &config.corpus {
            let text = std::fs::read_to_string(path)
                .map_err(|source| StartupError::Corpus { path: path.display().to_string(), source })?;
            lines.extend(text.lines().map(String::from));
        }
        let default_corpus = Arc::new(CorpusStore::ingest(lines));
        tracing::info!(stats = ?default_corpus.stats(), "default corpus loaded");
        let corpora = data
            .load_corpora()?
            .into_iter()
            .map(|(id, body)| (id, Arc::new(CorpusStore::ingest(body.lines()))))
            .collect();
        let state = Arc::new(AppState {
            config,
            parts,
            data,
            default_corpus,
            corpora: RwLock::new(corpora),
            agents: Mutex::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        });
        for persisted in state.data.load_sessions()? {
            state.resume(persisted);
        }
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn resume(&self, p: PersistedSession) {
        let Some(agent) = self.agent(p.corpus_id.as_deref()) else {
            tracing::warn!(session = %p.session.id, "corpus of persisted session is gone; skipping");
            return;
        };
        let mut session = p.session;
        if let Err(e) = agent.restore(&mut session) {
            tracing::warn!(session = %session.id, error = %e, "could not rebuild session artifacts");
        }
        let slot = self.insert(p.corpus_id, session);
        self.persist(&slot);
    }

    fn agent(&self, corpus_id: Option<&str>) -> Option<Arc<Agent>> {
        let key = corpus_id.map(String::from);
        let mut agents = self.agents.lock().expect("agent map lock");
        if let Some(agent) = agents.get(&key) {
            return Some(agent.clone());
        }
        let corpus = match corpus_id {
            None => self.default_corpus.clone(),
            Some(id) => self.corpora.read().expect("corpus map lock").get(id)?.clone(),
        };
        let agent = Arc::new(Agent::new(
            self.parts.provider.clone(),
            self.parts.embedder.clone(),
            Arc::new(LocalCorpusClient::new(corpus)),
            self.parts.assets.clone(),
            self.parts.params.clone(),
            self.parts.clock.clone(),
        ));
        agents.insert(key, agent.clone());
        Some(agent)
    }

    fn insert(&self, corpus_id: Option<String>, session: Session) -> Arc<Slot> {
        let slot = Arc::new(Slot {
            corpus_id,
            in_flight: AtomicBool::new(false),
            view: RwLock::new(View::of(&session)),
            session: Mutex::new(session),
        });
        let id = slot.session.lock().expect("session lock").id.clone();
        self.sessions.write().expect("session map lock").insert(id, slot.clone());
        slot
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions.read().expect("session map lock").get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }

    fn persist(&self, slot: &Slot) {
        let session = slot.session.lock().expect("session lock").clone();
        if let Some(a) = session.artifacts() {
            if let Err(e) = self.data.save_artifacts(a) {
                tracing::warn!(error = %e, "could not write artifacts");
            }
        }
        *slot.view.write().expect("view lock") = View::of(&session);
        let doc = PersistedSession { corpus_id: slot.corpus_id.clone(), session };
        if let Err(e) = self.data.save_session(&doc) {
            tracing::error!(session = %doc.session.id, error = %e, "could not persist session");
        }
    }

    pub fn create_session(&self, corpus_id: Option<String>) -> Result<(String, SessionState), ApiError> {
        let agent = self
            .agent(corpus_id.as_deref())
            .ok_or_else(|| ApiError::not_found("corpus", corpus_id.as_deref().unwrap_or_default()))?;
        let mut id = random_id();
        while self.sessions.read().expect("session map lock").contains_key(&id) {
            id = random_id();
        }
        let session = agent.new_session(id.clone());
        let state = session.state;
        let slot = self.insert(corpus_id, session);
        self.persist(&slot);
        Ok((id, state))
    }

    /// Runs `f` on the session under the in-flight guard, then persists.
    fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&Agent, &mut Session) -> Result<T, ApiError>,
    ) -> Result<(T, Vec<HistoryEntry>, SessionState), ApiError> {
        let slot = self.slot(id)?;
        let _guard = InFlight::acquire(&slot)?;
        let agent = self.agent(slot.corpus_id.as_deref()).ok_or_else(|| ApiError::internal("session corpus missing"))?;
        let (out, replies, state) = {
            let mut session = slot.session.lock().expect("session lock");
            let before = session.history.len();
            let out = f(&agent, &mut session)?;
            let replies = session.replies_since(before).into_iter().cloned().collect();
            (out, replies, session.state)
        };
        self.persist(&slot);
        Ok((out, replies, state))
    }

    pub fn post_message(&self, id: &str, text: &str) -> Result<MessagesReply, ApiError> {
        let (_, messages, state) = self.mutate(id, |agent, s| {
            agent.advance(s, text).map_err(|e| match e {
                AgentError::EmptyMessage => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_text", e.to_string()),
            })
        })?;
        Ok(MessagesReply { messages, state, in_flight: false })
    }

    pub fn approve(&self, id: &str) -> Result<MessagesReply, ApiError> {
        let (_, messages, state) = self.mutate(id, |agent, s| Ok(agent.approve(s)))?;
        Ok(MessagesReply { messages, state, in_flight: false })
    }

    pub fn session_view(&self, id: &str) -> Result<Value, ApiError> {
        let slot = self.slot(id)?;
        let mut snapshot = slot.view.read().expect("view lock").snapshot.clone();
        snapshot["in_flight"] = json!(slot.in_flight.load(Ordering::Acquire));
        snapshot["corpus_id"] = json!(slot.corpus_id);
        Ok(snapshot)
    }

    fn ready_artifacts(&self, id: &str) -> Result<Arc<Artifacts>, ApiError> {
        let view = self.slot(id)?.view.read().expect("view lock").clone();
        match (view.state, view.artifacts) {
            (SessionState::Ready, Some(a)) => Ok(a),
            (state, _) => Err(ApiError::new(
                StatusCode::CONFLICT,
                "not_ready",
                format!("session is {state}; approve a query and wait for retrieval first"),
            )),
        }
    }

    pub fn landscape(&self, id: &str) -> Result<Landscape, ApiError> {
        Ok(landscape(&*self.ready_artifacts(id)?))
    }

    pub fn topic(&self, id: &str, topic: &str) -> Result<TopicBundle, ApiError> {
        let a = self.ready_artifacts(id)?;
        let tid: i64 = topic.parse().map_err(|_| ApiError::not_found("topic", topic))?;
        topic_bundle(&a, tid).map_err(|e| match e {
            MiningError::UnknownTopic(_) => ApiError::not_found("topic", topic),
            other => ApiError::internal(other.to_string()),
        })
    }

    pub fn graph(&self, id: &str) -> Result<GraphDump, ApiError> {
        Ok(self.ready_artifacts(id)?.bkg.dump())
    }

    pub fn upload_corpus(&self, body: &str) -> Result<UploadReply, ApiError> {
        let store = CorpusStore::ingest(body.lines());
        let stats = store.stats().clone();
        let id = random_id();
        self.data.save_corpus(&id, body).map_err(|e| ApiError::internal(e.to_string()))?;
        self.corpora.write().expect("corpus map lock").insert(id.clone(), Arc::new(store));
        Ok(UploadReply { corpus_id: id, stats })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MessagesReply {
    pub messages: Vec<HistoryEntry>,
    pub state: SessionState,
    pub in_flight: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UploadReply {
    pub corpus_id: String,
    pub stats: IngestStats,
}

#[derive(Debug, Deserialize)]
struct CreateBody {
    corpus_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct MessageBody {
    text: String,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?.map(Json)
}

fn json_body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<Value> {
    let corpus_id = if body.iter().all(u8::is_ascii_whitespace) { None } else { json_body::<CreateBody>(&body)?.corpus_id };
    let (id, state) = blocking(move || app.create_session(corpus_id)).await?.0;
    Ok(Json(json!({ "session_id": id, "state": state })))
}

async fn post_message(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<MessagesReply> {
    let text = json_body::<MessageBody>(&body)?.text;
    if text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_text", "message text is empty"));
    }
    blocking(move || app.post_message(&id, &text)).await
}

async fn approve(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<MessagesReply> {
    blocking(move || app.approve(&id)).await
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Value> {
    app.session_view(&id).map(Json)
}

async fn get_landscape(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Landscape> {
    blocking(move || app.landscape(&id)).await
}

async fn get_topic(State(app): State<Arc<AppState>>, Path((id, tid)): Path<(String, String)>) -> ApiResult<TopicBundle> {
    blocking(move || app.topic(&id, &tid)).await
}

async fn get_graph(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<GraphDump> {
    blocking(move || app.graph(&id)).await
}

async fn upload_corpus(State(app): State<Arc<AppState>>, body: Body) -> ApiResult<UploadReply> {
    let cap = app.config.max_upload_bytes;
    let too_large =
        || ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", format!("corpus uploads are limited to {cap} bytes"));
    let bytes = to_bytes(body, cap).await.map_err(|_| too_large())?;
    let text = String::from_utf8_lossy(&bytes).into_owned();
    blocking(move || app.upload_corpus(&text)).await
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

fn cors(config: &ServiceConfig) -> CorsLayer {
    let origins = if config.cors_origins.is_empty() {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(config.cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(origins)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any)
        .expose_headers([header::CONTENT_TYPE])
}

pub fn router(app: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/approve", post(approve))
        .route("/api/sessions/{id}/landscape", get(get_landscape))
        .route("/api/sessions/{id}/topics/{tid}", get(get_topic))
        .route("/api/sessions/{id}/graph", get(get_graph))
        .route("/api/corpora", post(upload_corpus));
    let api = match &app.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    };
    api.layer(cors(&app.config)).with_state(app)
}
