//! REST service behind the annotation tool.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/pages` | page list, annotated or inferred from images |
//! | GET | `/api/pages/{page_id}` | one `PageAnnotation` |
//! | GET | `/api/images/{path}` | mockup image bytes |
//! | GET | `/api/annotation` | the stored `task.annotation.json`, `ETag` = revision |
//! | PUT | `/api/annotation` | a full annotation document, `If-Match` = revision |
//!
//! Errors are JSON objects `{"error", "message", "location"?}`. Saves are
//! validated before anything touches disk and are serialized per service.

use std::io::Write;
use std::net::{SocketAddr, TcpListener};
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use clap::Args;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use speceval_core::{validate_task_annotation, ModelError, TaskAnnotation};

use crate::{environment, usage, CliResult, EXIT_OK};

pub const ANNOTATION_FILE: &str = "task.annotation.json";
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "webp"];

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Task directory holding mockup images and `task.annotation.json`.
    pub task_dir: PathBuf,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Static UI assets served under `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
    /// Where saves go; defaults to the task directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct Service {
    task_dir: PathBuf,
    save_path: PathBuf,
    ui_dir: Option<PathBuf>,
    write_lock: tokio::sync::Mutex<()>,
}

impl Service {
    pub fn new(task_dir: impl Into<PathBuf>, out_dir: Option<PathBuf>, ui_dir: Option<PathBuf>) -> Self {
        let task_dir = task_dir.into();
        let save_path = out_dir.unwrap_or_else(|| task_dir.clone()).join(ANNOTATION_FILE);
        Service { task_dir, save_path, ui_dir, write_lock: tokio::sync::Mutex::new(()) }
    }

    /// The file loads come from: the save location once it exists.
    fn load_path(&self) -> PathBuf {
        if self.save_path.exists() {
            self.save_path.clone()
        } else {
            self.task_dir.join(ANNOTATION_FILE)
        }
    }

    fn stored(&self) -> Option<Vec<u8>> {
        std::fs::read(self.load_path()).ok()
    }
}

pub fn revision(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": code, "message": message.into() }))).into_response()
}

fn validation_error(e: &ModelError) -> Response {
    let body = match e {
        ModelError::Invariant { location, message } => {
            json!({ "error": "validation", "kind": "invariant", "location": location, "message": message })
        }
        ModelError::Schema(m) => json!({ "error": "validation", "kind": "schema", "message": m }),
        other => json!({ "error": "validation", "kind": "invariant", "message": other.to_string() }),
    };
    (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response()
}

/// Joins a client-supplied relative path onto `root`, refusing anything
/// that could leave it.
fn safe_join(root: &Path, rel: &str) -> Option<PathBuf> {
    let rel = Path::new(rel);
    if rel.as_os_str().is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    Some(root.join(rel))
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

fn image_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_file() && is_image(p))
                .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(String::from))
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

fn stored_task(service: &Service) -> Result<Option<TaskAnnotation>, Response> {
    match service.stored() {
        None => Ok(None),
        Some(bytes) => validate_task_annotation(&String::from_utf8_lossy(&bytes))
            .map(Some)
            .map_err(|e| error(StatusCode::INTERNAL_SERVER_ERROR, "stored_annotation_invalid", e.to_string())),
    }
}

async fn list_pages(State(service): State<Arc<Service>>) -> Response {
    let task = match stored_task(&service) {
        Ok(t) => t,
        Err(r) => return r,
    };
    let images = image_files(&service.task_dir);
    let pages: Vec<Value> = match &task {
        Some(task) => task
            .pages
            .iter()
            .map(|p| {
                json!({
                    "page_id": p.page_id,
                    "mockup_image": p.mockup_image,
                    "image_available": safe_join(&service.task_dir, &p.mockup_image).is_some_and(|f| f.is_file()),
                    "targets": p.targets.len(),
                    "anchors": p.anchors.len(),
                    "annotated": true,
                })
            })
            .collect(),
        None => images
            .iter()
            .map(|name| {
                let stem = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name);
                json!({
                    "page_id": stem,
                    "mockup_image": name,
                    "image_available": true,
                    "targets": 0,
                    "anchors": 0,
                    "annotated": false,
                })
            })
            .collect(),
    };
    Json(json!({
        "task_name": task.as_ref().map(|t| t.task_name.clone()),
        "revision": service.stored().map(|b| revision(&b)),
        "pages": pages,
        "images": images,
    }))
    .into_response()
}

async fn get_page(State(service): State<Arc<Service>>, UrlPath(page_id): UrlPath<String>) -> Response {
    match stored_task(&service) {
        Err(r) => r,
        Ok(task) => match task.as_ref().and_then(|t| t.page(&page_id)) {
            Some(page) => Json(page).into_response(),
            None => error(StatusCode::NOT_FOUND, "not_found", format!("unknown page id `{page_id}`")),
        },
    }
}

fn file_response(path: &Path) -> Option<Response> {
    let bytes = std::fs::read(path).ok()?;
    Some(([(header::CONTENT_TYPE, content_type(path))], bytes).into_response())
}

async fn get_image(State(service): State<Arc<Service>>, UrlPath(rel): UrlPath<String>) -> Response {
    let Some(path) = safe_join(&service.task_dir, &rel).filter(|p| is_image(p)) else {
        return error(StatusCode::BAD_REQUEST, "bad_path", format!("`{rel}` is not an image path inside the task directory"));
    };
    file_response(&path).unwrap_or_else(|| error(StatusCode::NOT_FOUND, "not_found", format!("no image `{rel}`")))
}

fn etag(rev: &str) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{rev}\"")).expect("hex etag")
}

async fn get_annotation(State(service): State<Arc<Service>>) -> Response {
    match service.stored() {
        None => error(StatusCode::NOT_FOUND, "not_found", "no annotation saved yet"),
        Some(bytes) => {
            let rev = revision(&bytes);
            ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json")), (header::ETAG, etag(&rev))], bytes)
                .into_response()
        }
    }
}

fn missing_images(service: &Service, task: &TaskAnnotation) -> Option<ModelError> {
    task.pages.iter().find_map(|p| {
        let ok = safe_join(&service.task_dir, &p.mockup_image).is_some_and(|f| f.is_file());
        (!ok).then(|| ModelError::Invariant {
            location: format!("page `{}`", p.page_id),
            message: format!("mockup image `{}` not found in the task directory", p.mockup_image),
        })
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

async fn put_annotation(State(service): State<Arc<Service>>, headers: HeaderMap, body: Bytes) -> Response {
    let Ok(text) = std::str::from_utf8(&body) else {
        return validation_error(&ModelError::Schema("body is not UTF-8".into()));
    };
    let task = match validate_task_annotation(text) {
        Ok(t) => t,
        Err(e) => return validation_error(&e),
    };
    if let Some(e) = missing_images(&service, &task) {
        return validation_error(&e);
    }

    let _guard = service.write_lock.lock().await;
    let current = service.stored().map(|b| revision(&b));
    let expected = headers
        .get(header::IF_MATCH)
        .and_then(|v| v.to_str().ok())
        .map(|v| v.trim().trim_matches('"').to_string());
    let fresh = match (&current, &expected) {
        (None, None) => true,
        (Some(_), Some(e)) if e == "*" => true,
        (Some(c), Some(e)) => c == e,
        _ => false,
    };
    if !fresh {
        return (
            StatusCode::CONFLICT,
            Json(json!({
                "error": "conflict",
                "message": "the annotation changed since it was loaded; reload and reapply",
                "current_revision": current,
            })),
        )
            .into_response();
    }
    let mut bytes = task.to_json().into_bytes();
    bytes.push(b'\n');
    if let Err(e) = write_atomic(&service.save_path, &bytes) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string());
    }
    let rev = revision(&bytes);
    ([(header::ETAG, etag(&rev))], Json(json!({ "revision": rev }))).into_response()
}

async fn index(State(service): State<Arc<Service>>) -> Response {
    if let Some(r) = service.ui_dir.as_ref().and_then(|d| file_response(&d.join("index.html"))) {
        return r;
    }
    Json(json!({
        "service": "speceval annotate",
        "ui": service.ui_dir.is_some(),
        "endpoints": ["/api/pages", "/api/pages/{page_id}", "/api/images/{path}", "/api/annotation"],
    }))
    .into_response()
}

async fn static_file(State(service): State<Arc<Service>>, UrlPath(rel): UrlPath<String>) -> Response {
    service
        .ui_dir
        .as_ref()
        .and_then(|d| safe_join(d, &rel))
        .and_then(|p| file_response(&p))
        .unwrap_or_else(|| error(StatusCode::NOT_FOUND, "not_found", format!("no such path `/{rel}`")))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/pages", get(list_pages))
        .route("/api/pages/{page_id}", get(get_page))
        .route("/api/images/{*path}", get(get_image))
        .route("/api/annotation", get(get_annotation).put(put_annotation))
        .route("/{*path}", get(static_file))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(service)
}

pub fn bind(host: &str, port: u16) -> CliResult<TcpListener> {
    TcpListener::bind((host, port)).map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => environment(format!("port {port} is already in use")),
        _ => environment(format!("cannot listen on {host}:{port}: {e}")),
    })
}

/// Serves until the process ends.
pub fn serve(listener: TcpListener, service: Arc<Service>) -> CliResult<()> {
    listener.set_nonblocking(true).map_err(environment)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(environment)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener).map_err(environment)?;
        axum::serve(listener, router(service)).await.map_err(environment)
    })
}

pub fn run(args: &AnnotateArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CliResult<i32> {
    if !args.task_dir.is_dir() {
        return Err(usage(format!("{} is not a directory", args.task_dir.display())));
    }
    let listener = bind(&args.host, args.port)?;
    let addr: SocketAddr = listener.local_addr().map_err(environment)?;
    let service = Arc::new(Service::new(&args.task_dir, args.out.clone(), args.ui.clone()));
    let _ = writeln!(out, "annotation service listening on http://{addr}");
    let _ = out.flush();
    serve(listener, service)?;
    Ok(EXIT_OK)
}
