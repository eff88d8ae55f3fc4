//! HTTP service around the extrusion pipeline.
//!
//! Sessions hold one clipart, one guiding shape, annotations, the latest
//! solution and any number of drawing documents keyed by viewpoint. Every
//! mutation must carry the session revision in `If-Match`; responses carry
//! the new revision both in the body and as an `ETag`.

pub mod drawing;
pub mod error;
pub mod store;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clipscaffold::constraints::compile_constraints;
use clipscaffold::extrude::{solve, ExtrusionSolution, SolveConfig};
use clipscaffold::mask::DEFAULT_MASK_RESOLUTION;
use clipscaffold::model::{
    parse_annotations, parse_kind_overrides, validate_clipart, Clipart, PathKind, Rgba, Viewpoint,
};
use clipscaffold::render::{render, RenderConfig};
use clipscaffold::shape::{load_shape, prepare_shape, ShapeFormat};
use clipscaffold::svg::parse_clipart;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::drawing::{export_svg, DrawingDoc};
use crate::error::ApiError;
use crate::store::{SessionData, Store};

pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;
pub const MAX_RENDER_SIZE: usize = 4096;
pub const DATA_DIR_ENV: &str = "SCAFFOLD_DATA_DIR";

pub struct App {
    pub store: Store,
}

impl App {
    pub fn new(data_dir: Option<PathBuf>) -> std::io::Result<App> {
        Ok(App {
            store: Store::open(data_dir)?,
        })
    }

    /// Persists to `SCAFFOLD_DATA_DIR` when it is set.
    pub fn from_env() -> std::io::Result<App> {
        App::new(std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
    }
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/clipart", post(upload_clipart))
        .route("/sessions/{id}/kinds", post(put_kinds))
        .route("/sessions/{id}/shape", post(upload_shape))
        .route("/sessions/{id}/annotations", post(put_annotations).get(get_annotations))
        .route("/sessions/{id}/solve", post(solve_session))
        .route("/sessions/{id}/solution", get(get_solution))
        .route("/sessions/{id}/render", get(render_session))
        .route("/sessions/{id}/drawings/{view}", get(get_drawing).put(put_drawing))
        .route("/sessions/{id}/drawings/{view}/export.svg", get(export_drawing))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(app)
}

pub async fn serve(addr: SocketAddr, app: Arc<App>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app)).await
}

type AppState = State<Arc<App>>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PathRow {
    pub id: usize,
    pub layer: usize,
    pub kind: PathKind,
    pub fill: Rgba,
    pub vertices: usize,
    pub area: f64,
}

pub fn path_table(clipart: &Clipart) -> Vec<PathRow> {
    clipart
        .paths
        .iter()
        .map(|p| PathRow {
            id: p.id,
            layer: p.layer,
            kind: p.kind,
            fill: p.fill,
            vertices: p.polygon.len(),
            area: p.area(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PrismRow {
    pub path_id: usize,
    pub copy: usize,
    pub d: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolutionSummary {
    pub prisms: Vec<PrismRow>,
    pub cover_cost: f64,
    pub thickness_cost: f64,
    pub total_cost: f64,
}

impl SolutionSummary {
    pub fn of(solution: &ExtrusionSolution) -> Self {
        SolutionSummary {
            prisms: solution
                .prisms
                .iter()
                .map(|p| PrismRow {
                    path_id: p.path_id,
                    copy: p.copy,
                    d: p.d,
                    z: p.z,
                })
                .collect(),
            cover_cost: solution.cover_cost,
            thickness_cost: solution.thickness_cost,
            total_cost: solution.total_cost,
        }
    }
}

fn summary(s: &SessionData) -> Value {
    json!({
        "id": s.id,
        "revision": s.revision,
        "paths": s.clipart.as_ref().map(path_table),
        "shape_vertices": s.shape.as_ref().map(|g| g.vertices.len()),
        "annotations": s.annotations,
        "config": s.config,
        "solution": s.solution.as_ref().map(SolutionSummary::of),
        "drawings": s.drawings.keys().collect::<Vec<_>>(),
    })
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("ascii etag")
}

fn reply(status: StatusCode, revision: u64, body: Value) -> Response {
    let mut resp = (status, Json(body)).into_response();
    resp.headers_mut().insert(header::ETAG, etag(revision));
    resp
}

/// Reads the expected revision from `If-Match`; quotes and a weak prefix
/// are accepted.
fn expected_revision(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers
        .get(header::IF_MATCH)
        .ok_or(ApiError::RevisionRequired)?
        .to_str()
        .map_err(|_| ApiError::BadRequest("If-Match is not ASCII".into()))?;
    let tag = raw.trim().trim_start_matches("W/").trim_matches('"');
    tag.parse()
        .map_err(|_| ApiError::BadRequest(format!("If-Match {raw:?} is not a revision")))
}

fn parse_view(view: &str) -> Result<Viewpoint, ApiError> {
    Ok(Viewpoint::from_str(view)?)
}

fn need<'a, T>(value: &'a Option<T>, what: &str) -> Result<&'a T, ApiError> {
    value
        .as_ref()
        .ok_or_else(|| ApiError::MissingInput(format!("session has no {what} yet")))
}

async fn create_session(State(app): AppState) -> Result<Response, ApiError> {
    let s = app.store.create()?;
    Ok(reply(StatusCode::CREATED, s.revision, summary(&s)))
}

async fn session_summary(State(app): AppState, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = app.store.get(&id)?.snapshot();
    Ok(reply(StatusCode::OK, s.revision, summary(&s)))
}

async fn upload_clipart(
    State(app): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let text =
        String::from_utf8(body.to_vec()).map_err(|_| ApiError::BadRequest("clipart body is not UTF-8".into()))?;
    let ((rows, violations), s) = app
        .store
        .mutate(&id, expected, move |s| {
            let clipart = parse_clipart(text.as_bytes())?;
            let out = (path_table(&clipart), validate_clipart(&clipart).violations);
            s.clipart = Some(clipart);
            s.clipart_svg = Some(text);
            // Annotations name paths of the previous document.
            s.annotations.clear();
            s.invalidate_solution();
            Ok(out)
        })
        .await?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        json!({ "revision": s.revision, "paths": rows, "violations": violations }),
    ))
}

async fn put_kinds(
    State(app): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let overrides = parse_kind_overrides(&String::from_utf8_lossy(&body))?;
    let (rows, s) = app
        .store
        .mutate(&id, expected, move |s| {
            let mut clipart = need(&s.clipart, "clipart")?.clone();
            clipart.apply_kind_overrides(&overrides)?;
            let rows = path_table(&clipart);
            s.clipart = Some(clipart);
            s.invalidate_solution();
            Ok(rows)
        })
        .await?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        json!({ "revision": s.revision, "paths": rows }),
    ))
}

#[derive(Debug, Deserialize)]
struct ShapeQuery {
    format: Option<String>,
}

async fn upload_shape(
    State(app): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    query: Result<Query<ShapeQuery>, QueryRejection>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let format = ShapeFormat::from_str(q.format.as_deref().unwrap_or("obj"))?;
    let ((vertices, triangles), s) = app
        .store
        .mutate(&id, expected, move |s| {
            let shape = load_shape(&body, format)?;
            let out = (shape.vertices.len(), shape.triangles.as_ref().map_or(0, Vec::len));
            s.shape = Some(shape);
            s.invalidate_solution();
            Ok(out)
        })
        .await?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        json!({ "revision": s.revision, "vertices": vertices, "triangles": triangles }),
    ))
}

async fn put_annotations(
    State(app): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let annotations = parse_annotations(&String::from_utf8_lossy(&body))?;
    let (constraints, s) = app
        .store
        .mutate(&id, expected, move |s| {
            let clipart = need(&s.clipart, "clipart")?;
            let constraints = compile_constraints(clipart, &annotations, &s.config.constraint_config())?;
            s.annotations = annotations;
            s.invalidate_solution();
            Ok(constraints)
        })
        .await?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        json!({
            "revision": s.revision,
            "annotations": s.annotations,
            "volumes": constraints.volumes,
            "depth_classes": constraints.depth_classes,
            "thickness_classes": constraints.thickness_classes,
            "order_edges": constraints.order_edges,
        }),
    ))
}

async fn get_annotations(State(app): AppState, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = app.store.get(&id)?.snapshot();
    Ok(reply(StatusCode::OK, s.revision, json!(s.annotations)))
}

async fn solve_session(
    State(app): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let text = String::from_utf8_lossy(&body);
    let config = if text.trim().is_empty() {
        None
    } else {
        Some(SolveConfig::from_json(&text)?)
    };
    let (solution, s) = app
        .store
        .mutate(&id, expected, move |s| {
            let config = config.unwrap_or_else(|| s.config.clone());
            let clipart = need(&s.clipart, "clipart")?;
            let raw = need(&s.shape, "guiding shape")?;
            let shape = prepare_shape(raw, clipart, DEFAULT_MASK_RESOLUTION)?;
            let solution = solve(clipart, &shape, &s.annotations, &config)?;
            let out = SolutionSummary::of(&solution);
            s.solution = Some(solution);
            s.config = config;
            Ok(out)
        })
        .await?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        json!({ "revision": s.revision, "solution": solution }),
    ))
}

fn no_solution() -> ApiError {
    ApiError::Missing {
        code: "NO_SOLUTION",
        message: "session has not been solved since its last change".into(),
    }
}

async fn get_solution(State(app): AppState, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = app.store.get(&id)?.snapshot();
    let solution = s.solution.as_ref().ok_or_else(no_solution)?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        serde_json::to_value(solution).expect("solution serializes"),
    ))
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    view: Option<String>,
    width: Option<usize>,
    height: Option<usize>,
    outline: Option<bool>,
    bg: Option<String>,
}

async fn render_session(
    State(app): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    query: Result<Query<RenderQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let view = parse_view(q.view.as_deref().unwrap_or("front"))?;
    let mut config = RenderConfig::default();
    config.width = q.width.unwrap_or(config.width);
    config.height = q.height.unwrap_or(config.height);
    config.outline = q.outline.unwrap_or(config.outline);
    if let Some(bg) = &q.bg {
        let hex = if bg.starts_with('#') {
            bg.clone()
        } else {
            format!("#{bg}")
        };
        config.background = hex.parse()?;
    }
    for n in [config.width, config.height] {
        if n == 0 || n > MAX_RENDER_SIZE {
            return Err(ApiError::BadRequest(format!(
                "image size must lie in 1..={MAX_RENDER_SIZE}, got {n}"
            )));
        }
    }

    let handle = app.store.get(&id)?;
    let s = handle.snapshot();
    if s.solution.is_none() {
        return Err(no_solution());
    }
    let key = format!(
        "{}|{}|{}|{:?}|{}x{}|{}|{}",
        s.revision,
        view.azimuth,
        view.elevation,
        view.ortho_scale,
        config.width,
        config.height,
        config.outline,
        config.background
    );
    let mut hasher = DefaultHasher::new();
    key.hash(&mut hasher);
    let tag = format!("\"{}-{:016x}\"", s.revision, hasher.finish());
    if headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == tag))
    {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, tag)]).into_response());
    }

    let png = match handle.cached_render(&key) {
        Some(png) => png,
        None => {
            let snap = s.clone();
            let png = tokio::task::spawn_blocking(move || {
                let solution = snap.solution.as_ref().expect("checked above");
                render(solution, &view, &config)?.to_png()
            })
            .await
            .map_err(|e| ApiError::Internal(format!("render worker failed: {e}")))??;
            let png = Arc::new(png);
            handle.store_render(key, png.clone());
            png
        }
    };
    Ok((
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, "image/png".to_string()),
            (header::ETAG, tag),
            (header::CACHE_CONTROL, "private, max-age=0, must-revalidate".to_string()),
        ],
        png.as_ref().clone(),
    )
        .into_response())
}

fn no_drawing(view: &str) -> ApiError {
    ApiError::Missing {
        code: "NO_DRAWING",
        message: format!("no drawing for view {view:?}"),
    }
}

async fn put_drawing(
    State(app): AppState,
    Path((id, view)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    parse_view(&view)?;
    let invalid = |message: String| ApiError::Invalid {
        code: "INVALID_DRAWING",
        message,
    };
    let doc: DrawingDoc = serde_json::from_slice(&body).map_err(|e| invalid(e.to_string()))?;
    doc.validate().map_err(invalid)?;
    let elements = doc.layers.len();
    let (_, s) = app
        .store
        .mutate(&id, expected, move |s| {
            s.drawings.insert(view, doc);
            Ok(())
        })
        .await?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        json!({ "revision": s.revision, "elements": elements }),
    ))
}

async fn get_drawing(State(app): AppState, Path((id, view)): Path<(String, String)>) -> Result<Response, ApiError> {
    let s = app.store.get(&id)?.snapshot();
    let doc = s.drawings.get(&view).ok_or_else(|| no_drawing(&view))?;
    Ok(reply(
        StatusCode::OK,
        s.revision,
        serde_json::to_value(doc).expect("drawing serializes"),
    ))
}

async fn export_drawing(State(app): AppState, Path((id, view)): Path<(String, String)>) -> Result<Response, ApiError> {
    let s = app.store.get(&id)?.snapshot();
    let doc = s.drawings.get(&view).ok_or_else(|| no_drawing(&view))?;
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "image/svg+xml")],
        export_svg(doc),
    )
        .into_response())
}
