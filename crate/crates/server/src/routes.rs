use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use clueboard_core::board::{export_session, layout_board, render_summary, BoardEvent};
use clueboard_core::engine::{Engine, ExpandRequest, RefineRequest};
use clueboard_core::graph::{parse_graph, serialize_graph};
use clueboard_core::json::{from_slice_with_path, to_canonical_bytes};
use clueboard_core::monitor::BrushSelection;
use clueboard_core::{Error, FilterPredicate, SeriesKey};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::AppState;

type Shared = Arc<AppState>;
type ApiResult = Result<Response, ApiError>;

/// Canonical JSON response, the same bytes the documents use on disk.
pub fn json_body<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match to_canonical_bytes(value) {
        Ok(bytes) => raw_json(status, bytes),
        Err(e) => {
            let body = format!("{{\"code\":\"internal\",\"message\":{:?}}}\n", e.to_string());
            raw_json(StatusCode::INTERNAL_SERVER_ERROR, body.into_bytes())
        }
    }
}

fn raw_json(status: StatusCode, bytes: Vec<u8>) -> Response {
    Response::builder()
        .status(status)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(bytes))
        .expect("static response parts")
}

fn ok<T: Serialize>(value: &T) -> ApiResult {
    Ok(json_body(StatusCode::OK, value))
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    Ok(from_slice_with_path(bytes)?)
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::invalid(e.body_text()))
}

/// Runs CPU-bound engine work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> clueboard_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowQuery {
    from: Option<i64>,
    to: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IncidentQuery {
    from: Option<i64>,
    to: Option<i64>,
    /// `Filter=a|b;Other=c`
    filters: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KpiQuery {
    /// Comma-separated series keys; all primary KPIs when absent.
    keys: Option<String>,
    from: Option<i64>,
    to: Option<i64>,
    highlight: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyQuery {
    key: String,
    from: Option<i64>,
    to: Option<i64>,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct GraphAccepted {
    graph_version: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventOutcome {
    pub changed: bool,
    pub session: clueboard_core::board::InvestigationSession,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryBody {
    pub format: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionList {
    pub sessions: Vec<String>,
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/graph", get(get_graph).put(put_graph))
        .route("/datasets/current/meta", get(meta))
        .route("/incidents", get(incidents))
        .route("/kpis", get(kpis))
        .route("/alerts", get(alerts))
        .route("/changepoints", get(changepoints))
        .route("/expand", post(expand))
        .route("/expand/all", post(expand_all))
        .route("/refine", post(refine))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/import", post(import))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", post(post_event))
        .route("/sessions/{id}/expand", post(session_expand))
        .route("/sessions/{id}/refine", post(session_refine))
        .route("/sessions/{id}/layout", get(layout))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/summary", get(summary))
        .fallback(|| async { ApiError::from(Error::NotFound("no such endpoint".into())) })
        .with_state(state)
}

async fn health() -> ApiResult {
    ok(&Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
    })
}

async fn get_graph(State(s): State<Shared>) -> ApiResult {
    Ok(raw_json(StatusCode::OK, serialize_graph(s.engine().graph())?))
}

async fn put_graph(State(s): State<Shared>, bytes: Bytes) -> ApiResult {
    let graph = parse_graph(&bytes)?;
    let engine = s.replace_graph(graph)?;
    ok(&GraphAccepted {
        graph_version: engine.graph_version().to_string(),
    })
}

async fn meta(State(s): State<Shared>) -> ApiResult {
    ok(&s.engine().meta())
}

async fn incidents(State(s): State<Shared>, q: Result<Query<IncidentQuery>, QueryRejection>) -> ApiResult {
    let q = query(q)?;
    let engine = s.engine();
    let window = engine.window(q.from, q.to)?;
    let filters = q.filters.as_deref().map(str::parse::<FilterPredicate>).transpose()?;
    ok(&engine.incidents(&window, filters.as_ref()))
}

fn parse_keys(list: Option<&str>) -> Result<Vec<SeriesKey>, ApiError> {
    Ok(list
        .unwrap_or_default()
        .split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(str::parse)
        .collect::<clueboard_core::Result<_>>()?)
}

async fn kpis(State(s): State<Shared>, q: Result<Query<KpiQuery>, QueryRejection>) -> ApiResult {
    let q = query(q)?;
    let engine = s.engine();
    let window = engine.window(q.from, q.to)?;
    let keys = parse_keys(q.keys.as_deref())?;
    let highlight = q.highlight.as_deref().map(str::parse::<SeriesKey>).transpose()?;
    ok(&engine.kpis(&keys, &window, highlight.as_ref())?)
}

async fn alerts(State(s): State<Shared>, q: Result<Query<WindowQuery>, QueryRejection>) -> ApiResult {
    let q = query(q)?;
    let engine = s.engine();
    let window = engine.window(q.from, q.to)?;
    ok(&blocking(move || engine.alerts(&window)).await?)
}

async fn changepoints(State(s): State<Shared>, q: Result<Query<KeyQuery>, QueryRejection>) -> ApiResult {
    let q = query(q)?;
    let engine = s.engine();
    let window = engine.window(q.from, q.to)?;
    let key: SeriesKey = q.key.parse()?;
    ok(&blocking(move || engine.changepoints(&key, &window)).await?)
}

async fn expand(State(s): State<Shared>, bytes: Bytes) -> ApiResult {
    let req: ExpandRequest = body(&bytes)?;
    let engine = s.engine();
    ok(&blocking(move || engine.expand(&req, &BTreeSet::new())).await?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpandAllRequest {
    clue: clueboard_core::Clue,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    budget_ms: Option<u64>,
}

async fn expand_all(State(s): State<Shared>, bytes: Bytes) -> ApiResult {
    let req: ExpandAllRequest = body(&bytes)?;
    let engine = s.engine();
    ok(&blocking(move || engine.expand_all(&req.clue, req.k, req.budget_ms, &BTreeSet::new())).await?)
}

async fn refine(State(s): State<Shared>, bytes: Bytes) -> ApiResult {
    let req: RefineRequest = body(&bytes)?;
    let engine = s.engine();
    ok(&blocking(move || engine.refine(&req, &[])).await?)
}

async fn list_sessions(State(s): State<Shared>) -> ApiResult {
    ok(&SessionList { sessions: s.ids().await })
}

async fn create_session(State(s): State<Shared>, bytes: Bytes) -> ApiResult {
    let brush: BrushSelection = body(&bytes)?;
    Ok(json_body(StatusCode::CREATED, &s.create(&brush).await?))
}

async fn import(State(s): State<Shared>, bytes: Bytes) -> ApiResult {
    Ok(json_body(StatusCode::CREATED, &s.import(&bytes).await?))
}

async fn get_session(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    ok(&s.snapshot(&id).await?)
}

async fn post_event(State(s): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let event: BoardEvent = body(&bytes)?;
    let (changed, session) = s.apply(&id, event).await?;
    ok(&EventOutcome { changed, session })
}

async fn session_expand(State(s): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: ExpandRequest = body(&bytes)?;
    let session = s.snapshot(&id).await?;
    let engine: Arc<Engine> = s.engine();
    ok(&blocking(move || engine.expand_in_session(&session, &req)).await?)
}

async fn session_refine(State(s): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: RefineRequest = body(&bytes)?;
    let session = s.snapshot(&id).await?;
    let engine = s.engine();
    ok(&blocking(move || engine.refine_in_session(&session, &req)).await?)
}

async fn layout(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let session = s.snapshot(&id).await?;
    ok(&layout_board(&session, &session.meta.layout))
}

async fn export(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    Ok(raw_json(StatusCode::OK, export_session(&s.snapshot(&id).await?)?))
}

async fn summary(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let session = s.snapshot(&id).await?;
    ok(&SummaryBody {
        format: "markdown".into(),
        text: render_summary(&session),
    })
}
