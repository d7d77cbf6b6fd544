//! HTTP API over the library, with in-memory sessions.
//!
//! ```text
//! POST   /sessions                          multipart: depth, [depth_scale], [image], [masks], [intrinsics]
//! POST   /sessions/{id}/translate[?points&seed&k]   body: design JSON
//! GET    /sessions/{id}/bboxframe/{l}.png[?key=..]
//! GET    /sessions/{id}/preview/{l}.png[?key=..]
//! POST   /sessions/{id}/verify[?points&seed&k]      body: design JSON
//! DELETE /sessions/{id}
//! ```
//!
//! Frame routes serve the translation named by `key` (the `cache_key` of a
//! translate response) or, without it, the session's latest translation.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path as FsPath;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::multipart::MultipartError;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::bundle::{BoxesDoc, CoeffsDoc, TrackDoc};
use crate::codec::DEFAULT_K;
use crate::design::{parse_design, Canvas, IntrinsicsSpec};
use crate::error::Error;
use crate::io::{decode_mask, decode_rgb, encode_png, load_depth_bytes};
use crate::pipeline::{resolve_scene, translate, TranslateOptions, Translation};
use crate::types::{Intrinsics, SceneContext};
use crate::verify::verify_bundle;
use crate::warp::{render_preview_frame, DEFAULT_POINTS};

pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8787;
pub const DEFAULT_MAX_UPLOAD_MB: usize = 64;
pub const DEFAULT_SESSION_TTL_SECS: u64 = 3600;

#[derive(Debug, Clone, clap::Args)]
pub struct ServeArgs {
    #[arg(long, default_value = DEFAULT_HOST)]
    pub host: String,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    /// Origin allowed to call the API from a browser.
    #[arg(long)]
    pub cors_origin: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_UPLOAD_MB)]
    pub max_upload_mb: usize,
    #[arg(long, default_value_t = DEFAULT_SESSION_TTL_SECS)]
    pub session_ttl_secs: u64,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_upload_bytes: usize,
    pub session_ttl: Duration,
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_upload_bytes: DEFAULT_MAX_UPLOAD_MB << 20,
            session_ttl: Duration::from_secs(DEFAULT_SESSION_TTL_SECS),
            cors_origin: None,
        }
    }
}

/// A translation kept for serving its frames.
struct Cached {
    body: Bytes,
    translation: Translation,
    /// Scene with the design's intrinsics, when they differ from the session's.
    scene: Option<SceneContext>,
}

struct Session {
    ctx: SceneContext,
    image: Option<RgbImage>,
    last_used: Mutex<Instant>,
    cache: Mutex<HashMap<String, Arc<Cached>>>,
    latest: Mutex<Option<String>>,
}

struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl AppState {
    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sweep();
        let s = self
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))?;
        *s.last_used.lock().unwrap() = Instant::now();
        Ok(s)
    }

    fn sweep(&self) {
        let ttl = self.config.session_ttl;
        self.sessions
            .write()
            .unwrap()
            .retain(|_, s| s.last_used.lock().unwrap().elapsed() < ttl);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    path: Option<String>,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message,
            path: None,
        }
    }

    fn bad_request(message: String) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message,
            path: None,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let path = match &e {
            Error::Schema { path, .. } => Some(path.clone()),
            _ => None,
        };
        let status = match e {
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            message: e.to_string(),
            path,
        }
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        ApiError {
            status: e.status(),
            message: e.body_text(),
            path: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match self.path {
            Some(p) => json!({ "error": self.message, "path": p }),
            None => json!({ "error": self.message }),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
        path: None,
    })?
}

#[derive(Serialize)]
struct SessionCreated {
    session_id: String,
    width: u32,
    height: u32,
    intrinsics: Intrinsics,
}

async fn create_session(State(state): State<Arc<AppState>>, mut multipart: Multipart) -> ApiResult<Response> {
    let mut fields: HashMap<String, Bytes> = HashMap::new();
    while let Some(field) = multipart.next_field().await? {
        let name = field.name().unwrap_or_default().to_string();
        if !matches!(
            name.as_str(),
            "image" | "depth" | "depth_scale" | "masks" | "intrinsics"
        ) {
            return Err(ApiError::bad_request(format!("unexpected form field `{name}`")));
        }
        let data = field.bytes().await?;
        fields.insert(name, data);
    }
    let session = blocking(move || build_session(fields)).await?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created = SessionCreated {
        session_id: id.clone(),
        width: session.ctx.width,
        height: session.ctx.height,
        intrinsics: session.ctx.intrinsics0,
    };
    state.sweep();
    state.sessions.write().unwrap().insert(id, Arc::new(session));
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

fn text_field(fields: &HashMap<String, Bytes>, name: &str) -> ApiResult<Option<String>> {
    fields
        .get(name)
        .map(|b| {
            String::from_utf8(b.to_vec())
                .map(|s| s.trim().to_string())
                .map_err(|_| ApiError::bad_request(format!("`{name}` must be UTF-8 text")))
        })
        .transpose()
}

fn build_session(fields: HashMap<String, Bytes>) -> ApiResult<Session> {
    let depth_bytes = fields
        .get("depth")
        .ok_or_else(|| ApiError::bad_request("missing `depth` upload".into()))?;
    let scale = text_field(&fields, "depth_scale")?
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| ApiError::bad_request(format!("bad depth_scale `{s}`")))
        })
        .transpose()?;
    let depth = load_depth_bytes(depth_bytes, scale, FsPath::new("depth"), || {
        Err(Error::format("depth", "16-bit PNG depth needs a `depth_scale` field"))
    })?;
    let mask = fields
        .get("masks")
        .map(|b| decode_mask(b, FsPath::new("masks")))
        .transpose()?;
    let (w, h) = (depth.width() as u32, depth.height() as u32);
    let intrinsics = text_field(&fields, "intrinsics")?
        .map(|s| {
            let spec: IntrinsicsSpec =
                serde_json::from_str(&s).map_err(|e| ApiError::bad_request(format!("bad intrinsics: {e}")))?;
            Ok::<_, ApiError>(Intrinsics::new(spec.fx, spec.fy, spec.cx, spec.cy, w, h)?)
        })
        .transpose()?;
    let ctx = SceneContext::new(depth, mask, intrinsics)?;
    let image = fields
        .get("image")
        .map(|b| decode_rgb(b, FsPath::new("image")))
        .transpose()?;
    if let Some(img) = &image {
        if img.width() != w || img.height() != h {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{} but depth is {w}x{h}",
                img.width(),
                img.height()
            ))
            .into());
        }
    }
    Ok(Session {
        ctx,
        image,
        last_used: Mutex::new(Instant::now()),
        cache: Mutex::new(HashMap::new()),
        latest: Mutex::new(None),
    })
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct OptionsQuery {
    points: Option<usize>,
    seed: Option<u64>,
    k: Option<usize>,
}

impl OptionsQuery {
    fn options(&self) -> TranslateOptions {
        TranslateOptions {
            points: self.points.unwrap_or(DEFAULT_POINTS),
            seed: self.seed.unwrap_or(0),
            k: self.k.unwrap_or(DEFAULT_K),
        }
    }
}

/// JSON body of a translate response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslateResponse {
    pub cache_key: String,
    pub frame_count: usize,
    pub fps: u32,
    pub canvas: Canvas,
    pub tracks: Vec<TrackDoc>,
    pub boxes: Vec<BoxesDoc>,
    pub coeffs: Vec<CoeffsDoc>,
    pub warnings: Vec<String>,
    pub text_prompt: String,
    pub bbox_frames: Vec<String>,
    pub preview_frames: Vec<String>,
}

fn request_key(design: &[u8], opts: &TranslateOptions) -> String {
    let mut h = Sha256::new();
    h.update(design);
    h.update(format!("|points={}|seed={}|k={}", opts.points, opts.seed, opts.k).as_bytes());
    hex::encode(h.finalize())
}

fn run_translate(session: &Session, id: &str, design_text: &[u8], opts: TranslateOptions) -> ApiResult<Arc<Cached>> {
    let key = request_key(design_text, &opts);
    if let Some(hit) = session.cache.lock().unwrap().get(&key).cloned() {
        *session.latest.lock().unwrap() = Some(key);
        return Ok(hit);
    }
    let text = std::str::from_utf8(design_text).map_err(|_| ApiError::bad_request("design must be UTF-8".into()))?;
    let design = parse_design(text)?;
    let t = translate(&design, &session.ctx, &opts)?;
    let scene = match resolve_scene(&design, &session.ctx)? {
        std::borrow::Cow::Owned(s) => Some(s),
        std::borrow::Cow::Borrowed(_) => None,
    };
    let b = &t.bundle;
    let urls = |kind: &str| -> Vec<String> {
        (0..b.frame_count)
            .map(|l| format!("/sessions/{id}/{kind}/{l}.png?key={key}"))
            .collect()
    };
    let resp = TranslateResponse {
        cache_key: key.clone(),
        frame_count: b.frame_count,
        fps: b.fps,
        canvas: b.canvas,
        tracks: b.tracks_doc(),
        boxes: b.boxes_doc(),
        coeffs: b.coeffs_doc(),
        warnings: b.warnings.clone(),
        text_prompt: b.text_prompt.clone(),
        bbox_frames: urls("bboxframe"),
        preview_frames: if session.image.is_some() {
            urls("preview")
        } else {
            Vec::new()
        },
    };
    let cached = Arc::new(Cached {
        body: Bytes::from(serde_json::to_vec(&resp).expect("response serializes")),
        translation: t,
        scene,
    });
    session.cache.lock().unwrap().insert(key.clone(), cached.clone());
    *session.latest.lock().unwrap() = Some(key);
    Ok(cached)
}

async fn translate_route(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<OptionsQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let cached = blocking(move || run_translate(&session, &id, &body, q.options())).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], cached.body.clone()).into_response())
}

async fn verify_route(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<OptionsQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let report = blocking(move || {
        let cached = run_translate(&session, &id, &body, q.options())?;
        let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("design must be UTF-8".into()))?;
        let design = parse_design(text)?;
        Ok(verify_bundle(&cached.translation.bundle, &design, &session.ctx)?)
    })
    .await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
struct FrameQuery {
    key: Option<String>,
}

fn frame_index(file: &str, len: usize) -> ApiResult<usize> {
    file.strip_suffix(".png")
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&l| l < len)
        .ok_or_else(|| ApiError::not_found(format!("no frame `{file}`")))
}

fn pick_translation(session: &Session, key: Option<String>) -> ApiResult<Arc<Cached>> {
    let key = match key {
        Some(k) => k,
        None => session
            .latest
            .lock()
            .unwrap()
            .clone()
            .ok_or_else(|| ApiError::not_found("session has no translation yet".into()))?,
    };
    session
        .cache
        .lock()
        .unwrap()
        .get(&key)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown translation {key}")))
}

fn png_response(img: &RgbImage) -> ApiResult<Response> {
    let bytes = encode_png(img)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn bbox_frame(
    State(state): State<Arc<AppState>>,
    Path((id, file)): Path<(String, String)>,
    Query(q): Query<FrameQuery>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let cached = pick_translation(&session, q.key)?;
    let frames = &cached.translation.bundle.bbox_frames;
    let l = frame_index(&file, frames.len())?;
    png_response(&frames[l])
}

async fn preview_frame(
    State(state): State<Arc<AppState>>,
    Path((id, file)): Path<(String, String)>,
    Query(q): Query<FrameQuery>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    if session.image.is_none() {
        return Err(ApiError::not_found("session has no image".into()));
    }
    let cached = pick_translation(&session, q.key)?;
    let l = frame_index(&file, cached.translation.path.len())?;
    blocking(move || {
        let ctx = cached.scene.as_ref().unwrap_or(&session.ctx);
        let img = render_preview_frame(session.image.as_ref().unwrap(), ctx, &cached.translation.path, l)?;
        png_response(&img)
    })
    .await
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    match state.sessions.write().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(format!("unknown session {id}"))),
    }
}

pub fn router(config: ServiceConfig) -> Router {
    let limit = config.max_upload_bytes;
    let cors = config.cors_origin.as_deref().map(|origin| {
        let origin = HeaderValue::from_str(origin).unwrap_or(HeaderValue::from_static("null"));
        CorsLayer::new()
            .allow_origin(AllowOrigin::exact(origin))
            .allow_methods([Method::GET, Method::POST, Method::DELETE])
            .allow_headers([header::CONTENT_TYPE])
    });
    let state = Arc::new(AppState {
        config,
        sessions: RwLock::new(HashMap::new()),
    });
    let app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", delete(delete_session))
        .route("/sessions/{id}/translate", post(translate_route))
        .route("/sessions/{id}/verify", post(verify_route))
        .route("/sessions/{id}/preview/{file}", get(preview_frame))
        .route("/sessions/{id}/bboxframe/{file}", get(bbox_frame))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    match cors {
        Some(c) => app.layer(c),
        None => app,
    }
}

pub async fn serve(args: ServeArgs) -> crate::Result<()> {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| Error::Validation(format!("bad --host/--port: {e}")))?;
    let config = ServiceConfig {
        max_upload_bytes: args.max_upload_mb << 20,
        session_ttl: Duration::from_secs(args.session_ttl_secs),
        cors_origin: args.cors_origin,
    };
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, router(config))
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}

pub fn serve_blocking(args: ServeArgs) -> crate::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(serve(args))
}
