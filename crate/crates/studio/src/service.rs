//! HTTP service for reading sessions.
//!
//! A session collects gaze samples for one image, is closed by a grade
//! decision (which writes the track pair to `sessions_dir`) and can then be
//! rendered as a raw or fixation-filtered attention map.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gazestudio_core::attnmap::encode_gamap;
use gazestudio_core::pipeline::{segment, track_map};
use gazestudio_core::segmentation::calibrate_threshold;
use gazestudio_core::{GazeSample, GazeTrack, KlGrade, TrackMeta};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::config::ServiceConfig;
use crate::gamap::image_dimensions;
use crate::manifest::{load_manifest, LoadedManifest, ManifestError};
use crate::track::{load_track_dir, save_track, ParseError};

pub const SIDECAR_HEADER: &str = "x-attention-sidecar";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    Closed,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: Uuid,
    pub reader_id: String,
    pub image_id: String,
    /// Unix milliseconds.
    pub created_at: u64,
    pub samples: Vec<GazeSample>,
    pub decision: Option<KlGrade>,
    /// Highest batch number appended so far, for idempotent retries.
    pub last_batch: Option<u64>,
    /// Set when the session closes.
    pub track: Option<GazeTrack>,
}

impl Session {
    pub fn state(&self) -> SessionState {
        if self.decision.is_some() {
            SessionState::Closed
        } else {
            SessionState::Open
        }
    }
}

pub struct AppState {
    cfg: ServiceConfig,
    manifest: LoadedManifest,
    dims: HashMap<String, (u32, u32)>,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>,
    gamma_th: RwLock<Option<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("image for entry {entry}: {source}")]
    Image { entry: String, source: crate::gamap::FileError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub gamma_th: f64,
    pub tracks: usize,
}

impl AppState {
    /// Loads the manifest and image sizes, then calibrates from the healthy
    /// directory. A failed calibration leaves the threshold unset.
    pub fn new(cfg: ServiceConfig) -> Result<Self, StartError> {
        let manifest = load_manifest(&cfg.manifest)?;
        let mut dims = HashMap::new();
        for e in &manifest.manifest.entries {
            let d = image_dimensions(&manifest.resolve(&e.image_path))
                .map_err(|source| StartError::Image { entry: e.image_id.clone(), source })?;
            dims.insert(e.image_id.clone(), d);
        }
        let state = Self { cfg, manifest, dims, sessions: RwLock::default(), gamma_th: RwLock::default() };
        if let Err(e) = state.calibrate() {
            eprintln!("gaze-studio: threshold not calibrated: {}", e.message);
        }
        Ok(state)
    }

    pub fn gamma_th(&self) -> Option<f64> {
        *self.gamma_th.read().unwrap()
    }

    pub fn calibrate(&self) -> Result<Calibration, ApiError> {
        let tracks = load_track_dir(&self.cfg.healthy_dir).map_err(|e: ParseError| ApiError::conflict(format!("healthy tracks: {e}")))?;
        let p = &self.cfg.segment;
        let gamma_th = calibrate_threshold(&tracks, &p.fit, p.window, p.stride).map_err(|e| ApiError::conflict(e.to_string()))?;
        *self.gamma_th.write().unwrap() = Some(gamma_th);
        Ok(Calibration { gamma_th, tracks: tracks.len() })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let id = Uuid::parse_str(id).map_err(|_| ApiError::not_found("session"))?;
        self.sessions.read().unwrap().get(&id).cloned().ok_or_else(|| ApiError::not_found("session"))
    }

    fn session_stem(&self, id: Uuid) -> PathBuf {
        self.cfg.sessions_dir.join(id.to_string())
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what}"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

/// Any body that fails to parse is a 422, whatever the reason.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/samples", post(append_samples))
        .route("/sessions/{id}/decision", post(decide))
        .route("/sessions/{id}/attention", get(attention))
        .route("/sessions/{id}/attention/sidecar", get(attention_sidecar))
        .route("/images/{image_id}", get(image))
        .route("/manifest", get(manifest))
        .route("/calibrate", post(recalibrate))
        .with_state(state)
}

#[derive(Deserialize)]
struct CreateSession {
    reader_id: String,
    image_id: String,
}

#[derive(Serialize)]
struct Created {
    session_id: Uuid,
    image_url: String,
    image_width: u32,
    image_height: u32,
}

async fn create_session(State(st): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    if req.reader_id.trim().is_empty() {
        return Err(ApiError::invalid("reader_id is empty"));
    }
    let &(w, h) = st.dims.get(&req.image_id).ok_or_else(|| ApiError::not_found("image"))?;
    let session_id = Uuid::new_v4();
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
    let session = Session {
        session_id,
        reader_id: req.reader_id,
        image_id: req.image_id.clone(),
        created_at,
        samples: Vec::new(),
        decision: None,
        last_batch: None,
        track: None,
    };
    st.sessions.write().unwrap().insert(session_id, Arc::new(Mutex::new(session)));
    let created = Created { session_id, image_url: format!("/images/{}", req.image_id), image_width: w, image_height: h };
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Serialize)]
struct SessionInfo {
    session_id: Uuid,
    reader_id: String,
    image_id: String,
    created_at: u64,
    state: SessionState,
    samples: usize,
    decision: Option<KlGrade>,
}

async fn session_info(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let s = st.session(&id)?;
    let s = s.lock().unwrap();
    Ok(Json(SessionInfo {
        session_id: s.session_id,
        reader_id: s.reader_id.clone(),
        image_id: s.image_id.clone(),
        created_at: s.created_at,
        state: s.state(),
        samples: s.samples.len(),
        decision: s.decision,
    }))
}

#[derive(Deserialize)]
struct BatchQuery {
    batch: Option<u64>,
}

#[derive(Serialize)]
struct Appended {
    appended: usize,
    total: usize,
}

/// Appends in order. With `?batch=n`, a batch number at or below the last
/// accepted one is acknowledged without appending.
async fn append_samples(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<BatchQuery>,
    body: Bytes,
) -> Result<Json<Appended>, ApiError> {
    let s = st.session(&id)?;
    let batch: Vec<GazeSample> = parse_body(&body)?;
    let mut s = s.lock().unwrap();
    if s.state() == SessionState::Closed {
        return Err(ApiError::conflict("session is closed"));
    }
    if let (Some(n), Some(last)) = (q.batch, s.last_batch) {
        if n <= last {
            return Ok(Json(Appended { appended: 0, total: s.samples.len() }));
        }
    }
    let mut prev = s.samples.last().map(|p| p.t);
    for (i, p) in batch.iter().enumerate() {
        if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite()) || p.t < 0.0 {
            return Err(ApiError::invalid(format!("sample {i} is not finite or has negative time")));
        }
        if prev.is_some_and(|t| p.t <= t) {
            return Err(ApiError::invalid(format!("sample {i} does not advance time")));
        }
        prev = Some(p.t);
    }
    s.samples.extend_from_slice(&batch);
    if q.batch.is_some() {
        s.last_batch = q.batch;
    }
    Ok(Json(Appended { appended: batch.len(), total: s.samples.len() }))
}

#[derive(Deserialize)]
struct Decision {
    grade: serde_json::Value,
}

#[derive(Serialize)]
struct Decided {
    session_id: Uuid,
    grade: KlGrade,
    samples: usize,
}

async fn decide(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<Decided>, ApiError> {
    let s = st.session(&id)?;
    let req: Decision = parse_body(&body)?;
    let grade = req
        .grade
        .as_i64()
        .and_then(|g| KlGrade::try_from(g).ok())
        .ok_or_else(|| ApiError::invalid(format!("grade {} is not an integer in 0..=4", req.grade)))?;
    let mut s = s.lock().unwrap();
    if s.decision.is_some() {
        return Err(ApiError::conflict("session already decided"));
    }
    let &(w, h) = st.dims.get(&s.image_id).ok_or_else(|| ApiError::internal("image vanished from manifest"))?;
    let meta = TrackMeta::new(s.image_id.clone(), s.reader_id.clone(), grade, w, h);
    let track = GazeTrack::new(meta, s.samples.clone()).map_err(|e| ApiError::invalid(e.to_string()))?;
    save_track(&st.session_stem(s.session_id), &track).map_err(|e| ApiError::internal(format!("persisting session: {e}")))?;
    s.decision = Some(grade);
    s.track = Some(track);
    Ok(Json(Decided { session_id: s.session_id, grade, samples: s.samples.len() }))
}

#[derive(Deserialize)]
struct AttentionQuery {
    #[serde(default)]
    processed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub gamma_th: Option<f64>,
    pub kept_fraction: f64,
}

fn render(st: &AppState, id: &str, processed: bool) -> Result<(Vec<u8>, Sidecar), ApiError> {
    let s = st.session(id)?;
    let track = s.lock().unwrap().track.clone().ok_or_else(|| ApiError::conflict("session is still open"))?;
    let m = track.meta();
    let kernel = st.cfg.kernel.for_display(m.image_width.max(m.image_height) as f64, st.cfg.display_px);
    let gamma_th = st.gamma_th();
    let (map, kept_fraction) = if processed {
        let th = gamma_th.ok_or_else(|| ApiError::conflict("threshold is not calibrated"))?;
        let seg = segment(&track, &st.cfg.segment, th).map_err(|e| ApiError::invalid(e.to_string()))?;
        (track_map(&seg.filtered, &kernel), seg.mask.kept_fraction())
    } else {
        (track_map(&track, &kernel), 1.0)
    };
    Ok((encode_gamap(&map), Sidecar { gamma_th, kept_fraction }))
}

async fn attention(State(st): State<Arc<AppState>>, Path(id): Path<String>, Query(q): Query<AttentionQuery>) -> Result<Response, ApiError> {
    let (bytes, sidecar) = render(&st, &id, q.processed)?;
    let sidecar = HeaderValue::from_str(&serde_json::to_string(&sidecar).expect("sidecar serializes")).expect("JSON is a valid header");
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream")), (header::HeaderName::from_static(SIDECAR_HEADER), sidecar)],
        bytes,
    )
        .into_response())
}

async fn attention_sidecar(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<AttentionQuery>,
) -> Result<Json<Sidecar>, ApiError> {
    render(&st, &id, q.processed).map(|(_, s)| Json(s))
}

async fn image(State(st): State<Arc<AppState>>, Path(image_id): Path<String>) -> Result<Response, ApiError> {
    let entry = st.manifest.manifest.get(&image_id).ok_or_else(|| ApiError::not_found("image"))?;
    let bytes = tokio::fs::read(st.manifest.resolve(&entry.image_path))
        .await
        .map_err(|e| ApiError::internal(format!("reading image: {e}")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn manifest(State(st): State<Arc<AppState>>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], st.manifest.manifest.to_json()).into_response()
}

async fn recalibrate(State(st): State<Arc<AppState>>) -> Result<Json<Calibration>, ApiError> {
    st.calibrate().map(Json)
}

/// Serves until Ctrl-C.
pub async fn serve(state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(state.cfg.bind).await?;
    eprintln!("gaze-studio: listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
