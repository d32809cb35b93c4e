//! HTTP API of the browser companion. Every number the UI shows comes from
//! these handlers; they call the same pipeline as the CLI.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use quasisym::imaging::{decode_image, encode_png};
use quasisym::pipeline::{analyze, session_to_json, write_json, AnalysisRequest, DEFAULT_THD};
use quasisym::spectral::{detect_peaks, fft_grid, refine_peak, render_heatmap, FftGrid, Peak, DEFAULT_RADIUS, DEFAULT_TOL};
use quasisym::{Error, Freq, Image};

use crate::exit::Status;

/// Upload size cap.
pub const MAX_UPLOAD: usize = 64 << 20;

struct StoredImage {
    name: String,
    image: Image,
    grid: OnceLock<FftGrid<f64>>,
}

impl StoredImage {
    fn grid(&self) -> &FftGrid<f64> {
        self.grid.get_or_init(|| fft_grid(&self.image))
    }
}

/// Uploaded images and finished sessions, kept in memory.
#[derive(Default)]
pub struct AppState {
    images: RwLock<HashMap<String, Arc<StoredImage>>>,
    sessions: RwLock<HashMap<String, Arc<String>>>,
    next_id: AtomicU64,
}

impl AppState {
    fn id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1)
    }

    fn image(&self, id: &str) -> Result<Arc<StoredImage>, ApiError> {
        self.images
            .read()
            .expect("image store poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no image `{id}`")))
    }
}

/// Error body: `{"error": code, "exit_code": n, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    exit_code: u8,
    message: String,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub exit_code: u8,
    pub message: String,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            exit_code: Status::Io.code(),
            message,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = Status::of(&e);
        let (http, code) = match status {
            Status::BadFlags => (StatusCode::BAD_REQUEST, "bad_request"),
            Status::Io => (StatusCode::BAD_REQUEST, "bad_input"),
            Status::Coverage => (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_coverage"),
            Status::Numeric | Status::Success => (StatusCode::INTERNAL_SERVER_ERROR, "numeric"),
        };
        Self {
            status: http,
            code,
            exit_code: status.code(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.to_string(),
            exit_code: self.exit_code,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON with 17 significant digits, as the CLI writes it.
fn json17<S: Serialize>(value: &S) -> ApiResult<Response> {
    let mut buf = Vec::new();
    write_json(value, &mut buf)?;
    Ok(json_bytes(buf))
}

fn json_bytes(body: impl Into<axum::body::Body>) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body.into()).into_response()
}

#[derive(Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: String,
    pub name: String,
    pub n: usize,
}

#[derive(Deserialize)]
struct NameQuery {
    name: Option<String>,
}

async fn upload(State(state): State<Arc<AppState>>, Query(q): Query<NameQuery>, body: Bytes) -> ApiResult<Response> {
    let image = tokio::task::spawn_blocking(move || decode_image::<f64>(&body))
        .await
        .map_err(join_error)??;
    let id = state.id("img");
    let name = q.name.unwrap_or_else(|| id.clone());
    let info = ImageInfo {
        id: id.clone(),
        name: name.clone(),
        n: image.n(),
    };
    let stored = StoredImage {
        name,
        image,
        grid: OnceLock::new(),
    };
    state.images.write().expect("image store poisoned").insert(id, Arc::new(stored));
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        exit_code: Status::Numeric.code(),
        message: e.to_string(),
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> quasisym::Result<T> + Send + 'static) -> ApiResult<T> {
    Ok(tokio::task::spawn_blocking(f).await.map_err(join_error)??)
}

#[derive(Deserialize)]
struct HeatmapQuery {
    log: Option<String>,
    thd: Option<f64>,
}

fn truthy(v: &str) -> bool {
    !matches!(v, "0" | "false" | "no" | "")
}

async fn heatmap(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HeatmapQuery>,
) -> ApiResult<Response> {
    let stored = state.image(&id)?;
    let log = q.log.as_deref().is_none_or(truthy);
    let thd = q.thd.unwrap_or(DEFAULT_THD);
    let png = blocking(move || encode_png(&render_heatmap(stored.grid(), thd, log)?)).await?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("image/png"))], png).into_response())
}

#[derive(Deserialize)]
struct PeaksQuery {
    thd: Option<f64>,
}

/// Body of `GET /images/{id}/peaks`.
#[derive(Serialize, Deserialize)]
pub struct PeaksResponse {
    pub n: usize,
    pub thd: f64,
    pub peaks: Vec<Peak<f64>>,
}

async fn peaks(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<PeaksQuery>,
) -> ApiResult<Response> {
    let stored = state.image(&id)?;
    let thd = q.thd.unwrap_or(DEFAULT_THD);
    let body = blocking(move || {
        Ok(PeaksResponse {
            n: stored.image.n(),
            thd,
            peaks: detect_peaks(stored.grid(), thd)?,
        })
    })
    .await?;
    json17(&body)
}

/// Body of `POST /images/{id}/refine`.
#[derive(Serialize, Deserialize)]
pub struct RefineRequest {
    pub guess: [f64; 2],
    pub radius: Option<f64>,
    pub tol: Option<f64>,
}

async fn refine(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<RefineRequest>,
) -> ApiResult<Response> {
    let stored = state.image(&id)?;
    let peak = blocking(move || {
        refine_peak(
            &stored.image,
            Freq::new(req.guess[0], req.guess[1]),
            req.radius.unwrap_or(DEFAULT_RADIUS),
            req.tol.unwrap_or(DEFAULT_TOL),
        )
    })
    .await?;
    json17(&peak)
}

async fn run_analysis(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<AnalysisRequest>,
) -> ApiResult<Response> {
    let stored = state.image(&id)?;
    let text = blocking(move || session_to_json(&analyze(&stored.image, &stored.name, &req)?)).await?;
    let sid = state.id("session");
    let text = Arc::new(text);
    state
        .sessions
        .write()
        .expect("session store poisoned")
        .insert(sid.clone(), text.clone());
    let location = HeaderValue::from_str(&format!("/sessions/{sid}")).expect("ascii id");
    let mut resp = json_bytes(text.as_str().to_owned());
    resp.headers_mut().insert(header::LOCATION, location);
    Ok(resp)
}

async fn session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = state
        .sessions
        .read()
        .expect("session store poisoned")
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))?;
    Ok(json_bytes(text.as_str().to_owned()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/images", post(upload))
        .route("/images/{id}/heatmap", get(heatmap))
        .route("/images/{id}/peaks", get(peaks))
        .route("/images/{id}/refine", post(refine))
        .route("/images/{id}/analyze", post(run_analysis))
        .route("/sessions/{id}", get(session))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

/// Serves until interrupted.
pub async fn serve(addr: SocketAddr) -> quasisym::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| Error::Io {
        path: addr.to_string().into(),
        source,
    })?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(Arc::new(AppState::default())))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| Error::Io {
            path: addr.to_string().into(),
            source,
        })
}
