use std::collections::HashMap;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use latentscope_core::experiment::{
    effective_answers, read_answer_log, score_answers, AnswerRecord, Bounds, GridGeometry,
    ScoreOptions, StimulusManifest, Variant,
};

use crate::config::ServiceConfig;
use crate::session::{new_token, plan_tasks, SessionRecord};
use crate::store::{recover, LogEntry, LogWriter};
use crate::ServiceError;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct SessionState {
    record: SessionRecord,
    /// Tasks answered so far; task `completed + 1` is the open one.
    completed: u32,
}

struct Inner {
    manifest: StimulusManifest,
    geometry: GridGeometry,
    log_path: PathBuf,
    admin_key: String,
    tasks_per_session: u32,
    static_dir: Option<PathBuf>,
    writer: LogWriter,
    sessions: RwLock<HashMap<String, Arc<tokio::sync::Mutex<SessionState>>>>,
    seeds: Mutex<ChaCha8Rng>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl AppState {
    /// Loads the manifest and replays the log.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let manifest = StimulusManifest::load(&config.manifest_path)?;
        let geometry = manifest.geometry.ok_or_else(|| {
            ServiceError::Config(format!(
                "{} has no grid geometry; generate stimuli with a grid",
                config.manifest_path.display()
            ))
        })?;
        if config.admin_key.is_empty() {
            return Err(ServiceError::Config("admin key must not be empty".into()));
        }
        if config.tasks_per_session == 0 {
            return Err(ServiceError::Config("sessions need at least one task".into()));
        }

        let recovered = recover(&config.log_path)?;
        let mut sessions: HashMap<String, SessionState> = HashMap::new();
        let mut stray = 0usize;
        for entry in recovered.entries {
            match entry {
                LogEntry::Session(record) => {
                    sessions.insert(record.session_id.clone(), SessionState { record, completed: 0 });
                }
                LogEntry::Answer(a) => match sessions.get_mut(&a.session_id) {
                    Some(s) => s.completed = s.completed.max(a.task_index),
                    None => stray += 1,
                },
            }
        }
        if stray > 0 {
            tracing::warn!("{stray} logged answers belong to no known session");
        }
        let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
        for _ in 0..sessions.len() {
            seeds.random::<u64>();
        }
        tracing::info!(
            "recovered {} sessions from {}",
            sessions.len(),
            config.log_path.display()
        );

        Ok(AppState(Arc::new(Inner {
            manifest,
            geometry,
            log_path: config.log_path.clone(),
            admin_key: config.admin_key.clone(),
            tasks_per_session: config.tasks_per_session,
            static_dir: config.static_dir.clone(),
            writer: LogWriter::open(&config.log_path, recovered.valid_len)?,
            sessions: RwLock::new(
                sessions
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(tokio::sync::Mutex::new(v))))
                    .collect(),
            ),
            seeds: Mutex::new(seeds),
        })))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<SessionState>>> {
        self.0
            .sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unknown session token"))
    }
}

pub fn router(state: AppState) -> Router {
    let app = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/tasks/{index}", get(get_task))
        .route("/sessions/{id}/tasks/{index}/reference", get(get_reference))
        .route("/sessions/{id}/answers", post(post_answer))
        .route("/audio/{text}/{xi}/{yi}", get(get_audio))
        .route("/results", get(get_results));
    let app = if state.0.static_dir.is_some() {
        app.fallback(get(static_file))
    } else {
        app
    };
    app.with_state(state)
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    let n = state.0.sessions.read().expect("session table poisoned").len();
    Json(serde_json::json!({ "status": "ok", "sessions": n }))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    variant: Variant,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub variant: Variant,
    pub task_count: u32,
    pub completed: u32,
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionSummary>)> {
    let inner = &state.0;
    let seed = inner.seeds.lock().expect("seed generator poisoned").random::<u64>();
    let tasks = plan_tasks(
        req.variant,
        &inner.manifest.texts,
        inner.geometry.cells,
        inner.tasks_per_session,
        seed,
    )
    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    let record = SessionRecord {
        session_id: new_token(),
        variant: req.variant,
        seed,
        created_at_ms: now_ms(),
        tasks,
    };
    inner
        .writer
        .append(&LogEntry::Session(record.clone()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("storage failure: {e}")))?;
    let summary = SessionSummary {
        session_id: record.session_id.clone(),
        variant: record.variant,
        task_count: record.tasks.len() as u32,
        completed: 0,
    };
    inner.sessions.write().expect("session table poisoned").insert(
        record.session_id.clone(),
        Arc::new(tokio::sync::Mutex::new(SessionState { record, completed: 0 })),
    );
    Ok((StatusCode::CREATED, Json(summary)))
}

/// What a participant sees for one task. Carries no hint of the answer.
#[derive(Debug, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub session_id: String,
    pub task_index: u32,
    pub task_count: u32,
    pub variant: Variant,
    /// Audio to be located.
    pub reference_url: String,
    /// Text the explorable space is rendered with.
    pub space_text: String,
    /// `{xi}` and `{yi}` are lattice indices in `0..resolution`.
    pub space_url_template: String,
    pub resolution: usize,
    pub bounds: Bounds,
    /// Latent coordinates of the candidate anchors, row-major.
    pub anchors: Vec<[f64; 2]>,
    /// The same anchors as fractions of the rectangle (0 at `x_min`/`y_min`).
    pub anchor_fractions: Vec<[f64; 2]>,
}

fn check_index(state: &SessionState, index: u32) -> ApiResult<()> {
    let total = state.record.tasks.len() as u32;
    if index == 0 || index > total {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("task index must be in 1..={total}"),
        ));
    }
    if index > state.completed + 1 {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("task {} must be answered first", state.completed + 1),
        ));
    }
    if index <= state.completed {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("task {index} was already answered"),
        ));
    }
    Ok(())
}

async fn get_task(
    State(state): State<AppState>,
    Path((id, index)): Path<(String, u32)>,
) -> ApiResult<Json<TaskAssignment>> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    check_index(&s, index)?;
    let task = &s.record.tasks[index as usize - 1];
    let g = &state.0.geometry;
    let anchors: Vec<[f64; 2]> = g.anchors().into_iter().flatten().collect();
    let anchor_fractions = anchors
        .iter()
        .map(|a| {
            [
                (a[0] - g.bounds.x_min) / g.bounds.width(),
                (a[1] - g.bounds.y_min) / g.bounds.height(),
            ]
        })
        .collect();
    Ok(Json(TaskAssignment {
        session_id: id.clone(),
        task_index: index,
        task_count: s.record.tasks.len() as u32,
        variant: s.record.variant,
        reference_url: format!("/sessions/{id}/tasks/{index}/reference"),
        space_text: task.space_text.clone(),
        space_url_template: format!("/audio/{}/{{xi}}/{{yi}}", task.space_text),
        resolution: g.resolution,
        bounds: g.bounds,
        anchors,
        anchor_fractions,
    }))
}

async fn wav_response(path: PathBuf) -> ApiResult<Response> {
    let bytes = tokio::fs::read(&path).await.map_err(|e| {
        tracing::error!("reading {}: {e}", path.display());
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "stimulus unavailable")
    })?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

/// Audio of the open task's reference: the lattice sample nearest its true
/// anchor, in the reference text.
async fn get_reference(
    State(state): State<AppState>,
    Path((id, index)): Path<(String, u32)>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let path = {
        let s = session.lock().await;
        check_index(&s, index)?;
        let task = &s.record.tasks[index as usize - 1];
        let g = &state.0.geometry;
        let (xi, yi) = g.nearest_lattice(g.anchor(task.true_anchor.0, task.true_anchor.1));
        state
            .0
            .manifest
            .resolve(&task.reference_text, xi, yi)
            .ok_or_else(|| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "reference missing from manifest"))?
    };
    wav_response(path).await
}

async fn get_audio(
    State(state): State<AppState>,
    Path((text, xi, yi)): Path<(String, usize, usize)>,
) -> ApiResult<Response> {
    let path = state.0.manifest.resolve(&text, xi, yi).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, format!("no stimulus for {text} at ({xi}, {yi})"))
    })?;
    wav_response(path).await
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    task_index: u32,
    x: f64,
    y: f64,
    duration_ms: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerAck {
    pub task_index: u32,
    pub completed: u32,
    pub done: bool,
}

/// Accepts the open task, or a resubmission of the last answered one
/// (last write wins; both stay in the log).
async fn post_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<AnswerBody>,
) -> ApiResult<Json<AnswerAck>> {
    if !body.x.is_finite() || !body.y.is_finite() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "click must be finite"));
    }
    if !(body.duration_ms >= 0.0) || !body.duration_ms.is_finite() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "duration must be a non-negative number"));
    }
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let total = s.record.tasks.len() as u32;
    let open = s.completed + 1;
    let resubmit = s.completed > 0 && body.task_index == s.completed;
    if body.task_index == 0 || body.task_index > total {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("task index must be in 1..={total}")));
    }
    if body.task_index != open && !resubmit {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("task {} is not open (open task: {open})", body.task_index),
        ));
    }
    let task = &s.record.tasks[body.task_index as usize - 1];
    let raw = [body.x, body.y];
    let record = AnswerRecord {
        session_id: id,
        variant: s.record.variant,
        task_index: body.task_index,
        true_anchor: task.true_anchor,
        clicked: state.0.geometry.bounds.clamp(raw),
        clicked_raw: raw,
        duration_secs: body.duration_ms / 1000.0,
        timestamp_ms: now_ms(),
    };
    state
        .0
        .writer
        .append(&LogEntry::Answer(record))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("storage failure: {e}")))?;
    s.completed = s.completed.max(body.task_index);
    Ok(Json(AnswerAck {
        task_index: body.task_index,
        completed: s.completed,
        done: s.completed == total,
    }))
}

#[derive(Debug, Deserialize)]
struct ResultsQuery {
    key: Option<String>,
    #[serde(default)]
    snap: bool,
}

async fn get_results(
    State(state): State<AppState>,
    Query(q): Query<ResultsQuery>,
) -> ApiResult<Response> {
    if q.key.as_deref() != Some(state.0.admin_key.as_str()) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "admin key required"));
    }
    let path = state.0.log_path.clone();
    let geometry = state.0.geometry;
    let report = tokio::task::spawn_blocking(move || {
        let answers = effective_answers(&read_answer_log(&path)?);
        score_answers(&geometry, &answers, ScoreOptions { snap: q.snap })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match report {
        Ok(r) => Ok(Json(r).into_response()),
        Err(latentscope_core::Error::NotEnoughData(m)) => Err(ApiError::new(StatusCode::CONFLICT, m)),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

fn content_type(path: &FsPath) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wav") => "audio/wav",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(state): State<AppState>, uri: Uri) -> ApiResult<Response> {
    let root = state.0.static_dir.as_ref().expect("fallback only installed with a static dir");
    let rel = PathBuf::from(uri.path().trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "not found"));
    }
    let mut path = root.join(&rel);
    if rel.as_os_str().is_empty() || path.is_dir() {
        path = path.join("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response()),
        Err(_) => Err(ApiError::new(StatusCode::NOT_FOUND, "not found")),
    }
}
