//! HTTP sessions over the sequential solver.
//!
//! A session holds one [`PolySolveState`], an undo stack and the dual built
//! from the loaded model. Mutations of a session are serialized by its lock;
//! different sessions never block each other.
//!
//! Routes:
//! - `POST /sessions` (mesh document) -> `{id}`
//! - `GET /sessions/{id}`
//! - `POST /sessions/{id}/faces/{f}/analyze` (`{fixed_edges}`)
//! - `POST /sessions/{id}/faces/{f}/preview` (`{fixed_edges, target_area}`)
//! - `POST /sessions/{id}/faces/{f}/commit` (`{preview_id, root_index}`)
//! - `POST /sessions/{id}/undo`
//! - `GET /sessions/{id}/dual`

use std::collections::hash_map::{DefaultHasher, RandomState};
use std::collections::{BTreeMap, HashMap};
use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use polystatics_core::dual::{build_dual, update_member_forces, DualDiagram, DualDocument, MemberForce};
use polystatics_core::face_area::all_face_areas;
use polystatics_core::face_solver::{analyze_constraints, Cgdof, EdgeClassification};
use polystatics_core::model::{load_complex, MeshDocument, PolyhedralComplex};
use polystatics_core::poly_solver::{
    apply_step, preview_face, FacePreview, PolySolveState, RootChoice, StepRecord, StepRequest,
};
use polystatics_core::{Error, SolverConfig};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

pub const UNDO_DEPTH: usize = 32;

/// Error body: `{kind, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub kind: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ApiErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, detail: impl Into<String>) -> Self {
        Self {
            status,
            body: ApiErrorBody {
                kind: kind.into(),
                detail: detail.into(),
            },
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"))
    }

    fn conflict(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", detail)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = if e.is_constraint_failure() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::BAD_REQUEST
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_input", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct PendingPreview {
    version: u64,
    face: usize,
    target_area: f64,
    extra_fixed: BTreeMap<usize, f64>,
    roots: Vec<f64>,
}

pub struct Session {
    id: String,
    initial: PolyhedralComplex,
    state: PolySolveState,
    dual: Result<DualDiagram, String>,
    undo: Vec<PolySolveState>,
    version: u64,
    previews: HashMap<u64, PendingPreview>,
}

impl Session {
    fn new(id: String, complex: PolyhedralComplex, cfg: &SolverConfig) -> Self {
        let dual = build_dual(&complex, cfg).map_err(|e| e.to_string());
        Self {
            id,
            initial: complex.clone(),
            state: PolySolveState::new(complex),
            dual,
            undo: Vec::new(),
            version: 0,
            previews: HashMap::new(),
        }
    }

    fn push_state(&mut self, next: PolySolveState) {
        let prev = std::mem::replace(&mut self.state, next);
        self.undo.push(prev);
        if self.undo.len() > UNDO_DEPTH {
            self.undo.remove(0);
        }
        self.version += 1;
        self.previews.clear();
    }

    fn dual_view(&self, cfg: &SolverConfig) -> DualView {
        match &self.dual {
            Ok(dual) => match update_member_forces(&self.state.complex, dual, cfg) {
                Ok(d) => DualView {
                    members: d.members.clone(),
                    dual: Some(d.to_document()),
                    error: None,
                },
                Err(e) => DualView {
                    dual: None,
                    members: Vec::new(),
                    error: Some(e.to_string()),
                },
            },
            Err(e) => DualView {
                dual: None,
                members: Vec::new(),
                error: Some(e.clone()),
            },
        }
    }

    fn view(&self, cfg: &SolverConfig) -> SessionView {
        let complex = &self.state.complex;
        SessionView {
            id: self.id.clone(),
            version: self.version,
            primal: complex.to_document(),
            lengths: complex.lengths().iter().copied().collect(),
            face_areas: all_face_areas(complex, complex.lengths()).unwrap_or_default(),
            edge_count: complex.edge_count(),
            face_count: complex.face_count(),
            fixed_edges: self.state.fixed_edges.clone(),
            step_log: self.state.step_log.clone(),
            undo_depth: self.undo.len(),
            dual: self.dual_view(cfg),
        }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            id: self.id.clone(),
            version: self.version,
            initial: self.initial.to_document(),
            lengths: self.state.complex.lengths().iter().copied().collect(),
            fixed_edges: self.state.fixed_edges.clone(),
            step_log: self.state.step_log.clone(),
        }
    }
}

/// Persisted session. Signed lengths are stored next to the loaded model
/// because a document alone only carries unsigned lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub version: u64,
    pub initial: MeshDocument,
    pub lengths: Vec<f64>,
    pub fixed_edges: BTreeMap<usize, f64>,
    pub step_log: Vec<StepRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualView {
    pub dual: Option<DualDocument>,
    pub members: Vec<MemberForce>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub version: u64,
    pub primal: MeshDocument,
    pub lengths: Vec<f64>,
    pub face_areas: Vec<f64>,
    pub edge_count: usize,
    pub face_count: usize,
    pub fixed_edges: BTreeMap<usize, f64>,
    pub step_log: Vec<StepRecord>,
    pub undo_depth: usize,
    pub dual: DualView,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnalyzeBody {
    #[serde(default)]
    pub fixed_edges: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub face: usize,
    pub cgdof: Cgdof,
    /// Loop positions.
    pub classification: EdgeClassification,
    /// Global edge id of every loop position.
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewBody {
    #[serde(default)]
    pub fixed_edges: BTreeMap<usize, f64>,
    pub target_area: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreviewResponse {
    pub preview_id: u64,
    pub version: u64,
    #[serde(flatten)]
    pub preview: FacePreview,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommitBody {
    pub preview_id: u64,
    /// Index into the preview's roots; the default root when omitted.
    #[serde(default)]
    pub root_index: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreatedSession {
    pub id: String,
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    cfg: SolverConfig,
    state_dir: Option<PathBuf>,
    counter: AtomicU64,
    seed: u64,
}

impl AppState {
    pub fn new(cfg: SolverConfig, state_dir: Option<PathBuf>) -> Self {
        let seed = RandomState::new().build_hasher().finish();
        Self {
            sessions: RwLock::new(HashMap::new()),
            cfg,
            state_dir,
            counter: AtomicU64::new(0),
            seed,
        }
    }

    /// Loads every snapshot found in the state directory.
    pub fn restore(&self) -> std::io::Result<usize> {
        let Some(dir) = &self.state_dir else {
            return Ok(0);
        };
        if !dir.exists() {
            return Ok(0);
        }
        let mut count = 0;
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            match self.restore_one(&path) {
                Ok(()) => count += 1,
                Err(e) => tracing::warn!("skipping snapshot {}: {e}", path.display()),
            }
        }
        Ok(count)
    }

    fn restore_one(&self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let snap: Snapshot = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let initial = load_complex(&snap.initial, &self.cfg).map_err(|e| e.to_string())?;
        let lengths = nalgebra_vector(&snap.lengths);
        let current = initial.with_lengths(&lengths, &self.cfg).map_err(|e| e.to_string())?;
        let mut session = Session::new(snap.id.clone(), initial, &self.cfg);
        session.state = PolySolveState {
            complex: current,
            fixed_edges: snap.fixed_edges,
            step_log: snap.step_log,
        };
        session.version = snap.version;
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(snap.id, Arc::new(Mutex::new(session)));
        Ok(())
    }

    fn next_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let mut h = DefaultHasher::new();
        h.write_u64(self.seed ^ n);
        format!("{:016x}{:04x}", h.finish(), n & 0xffff)
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn persist(&self, session: &Session) {
        let Some(dir) = &self.state_dir else {
            return;
        };
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(dir)?;
            let tmp = dir.join(format!("{}.json.tmp", session.id));
            std::fs::write(&tmp, serde_json::to_vec(&session.snapshot())?)?;
            std::fs::rename(tmp, dir.join(format!("{}.json", session.id)))
        };
        if let Err(e) = write() {
            tracing::warn!("could not persist session {}: {e}", session.id);
        }
    }
}

fn nalgebra_vector(v: &[f64]) -> polystatics_core::nalgebra::DVector<f64> {
    polystatics_core::nalgebra::DVector::from_column_slice(v)
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/faces/{face}/analyze", post(analyze))
        .route("/sessions/{id}/faces/{face}/preview", post(preview))
        .route("/sessions/{id}/faces/{face}/commit", post(commit))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/dual", get(get_dual))
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, app: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Result<Json<MeshDocument>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<CreatedSession>)> {
    let Json(doc) = body?;
    let complex = load_complex(&doc, &app.cfg)?;
    let id = app.next_id();
    let session = Session::new(id.clone(), complex, &app.cfg);
    app.persist(&session);
    app.sessions
        .write()
        .expect("session map poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!("created session {id}");
    Ok((StatusCode::CREATED, Json(CreatedSession { id })))
}

async fn get_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(s.view(&app.cfg)))
}

fn check_face(s: &Session, face: usize) -> ApiResult<()> {
    if face >= s.state.complex.face_count() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no face {face} (session has {})", s.state.complex.face_count()),
        ));
    }
    Ok(())
}

async fn analyze(
    State(app): State<Arc<AppState>>,
    UrlPath((id, face)): UrlPath<(String, usize)>,
    body: Result<Json<AnalyzeBody>, JsonRejection>,
) -> ApiResult<Json<AnalyzeResponse>> {
    let Json(body) = body?;
    let session = app.session(&id)?;
    let s = session.lock().await;
    check_face(&s, face)?;
    let complex = &s.state.complex;
    let ids = complex.face_edge_ids(face);
    let mut fixed: BTreeMap<usize, f64> = s
        .state
        .fixed_edges
        .iter()
        .filter(|(e, _)| ids.contains(e))
        .map(|(&e, &l)| (e, l))
        .collect();
    fixed.extend(body.fixed_edges);
    let a = analyze_constraints(complex, face, &fixed, None, &app.cfg)?;
    Ok(Json(AnalyzeResponse {
        face,
        cgdof: a.classification.cgdof,
        edges: a.system.edges.clone(),
        classification: a.classification,
    }))
}

async fn preview(
    State(app): State<Arc<AppState>>,
    UrlPath((id, face)): UrlPath<(String, usize)>,
    body: Result<Json<PreviewBody>, JsonRejection>,
) -> ApiResult<Json<PreviewResponse>> {
    let Json(body) = body?;
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    check_face(&s, face)?;
    let preview = preview_face(&s.state, face, body.target_area, &body.fixed_edges, &app.cfg)?;
    // Identical requests map to the same id, so repeating a preview is
    // idempotent.
    let mut h = DefaultHasher::new();
    h.write_u64(app.seed);
    h.write_u64(s.version);
    h.write_usize(face);
    h.write_u64(body.target_area.to_bits());
    for (e, l) in &body.fixed_edges {
        h.write_usize(*e);
        h.write_u64(l.to_bits());
    }
    let preview_id = h.finish() >> 11;
    let version = s.version;
    s.previews.insert(
        preview_id,
        PendingPreview {
            version,
            face,
            target_area: body.target_area,
            extra_fixed: body.fixed_edges,
            roots: preview.roots.iter().map(|r| r.root).collect(),
        },
    );
    Ok(Json(PreviewResponse {
        preview_id,
        version,
        preview,
    }))
}

async fn commit(
    State(app): State<Arc<AppState>>,
    UrlPath((id, face)): UrlPath<(String, usize)>,
    body: Result<Json<CommitBody>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let Json(body) = body?;
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    check_face(&s, face)?;
    let pending = s
        .previews
        .get(&body.preview_id)
        .ok_or_else(|| ApiError::conflict(format!("unknown preview {}", body.preview_id)))?;
    if pending.version != s.version {
        return Err(ApiError::conflict("preview is stale; the session changed since"));
    }
    if pending.face != face {
        return Err(ApiError::conflict(format!(
            "preview {} belongs to face {}",
            body.preview_id, pending.face
        )));
    }
    let root = match body.root_index {
        None => RootChoice::Policy(app.cfg.root_policy),
        Some(i) => RootChoice::Value(*pending.roots.get(i).ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_input",
                format!("root index {i} out of range ({} roots)", pending.roots.len()),
            )
        })?),
    };
    let request = StepRequest {
        face,
        target_area: pending.target_area,
        root,
        extra_fixed: pending.extra_fixed.clone(),
    };
    let next = apply_step(&s.state, &request, &app.cfg)?;
    s.push_state(next);
    app.persist(&s);
    Ok(Json(s.view(&app.cfg)))
}

async fn undo(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    let prev = s.undo.pop().ok_or_else(|| ApiError::conflict("nothing to undo"))?;
    s.state = prev;
    s.version += 1;
    s.previews.clear();
    app.persist(&s);
    Ok(Json(s.view(&app.cfg)))
}

async fn get_dual(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<DualView>> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(s.dual_view(&app.cfg)))
}
