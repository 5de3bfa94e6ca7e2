//! Thin async client for the clueboard HTTP service.

use clueboard_core::board::{BoardEvent, InvestigationSession, Position};
use clueboard_core::changepoint::ChangePointArray;
use clueboard_core::engine::{DatasetMeta, ExpandRequest, IncidentView, KpiSeries, RefineRequest};
use clueboard_core::expand::ExpansionResult;
use clueboard_core::graph::KnowledgeGraph;
use clueboard_core::monitor::{AlertReport, BrushSelection};
use clueboard_core::refine::RefineResult;
use clueboard_core::{Clue, ErrorCode, FilterPredicate, SeriesKey};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Error body sent by the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub path: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{status}: {}", body.message)]
    Api { status: u16, body: ApiErrorBody },
    #[error("unexpected {status} response: {text}")]
    Unexpected { status: u16, text: String },
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("cannot decode response: {0}")]
    Decode(#[from] serde_json::Error),
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Api { body, .. } => Some(body.code),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone, Deserialize)]
pub struct EventOutcome {
    pub changed: bool,
    pub session: InvestigationSession,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

fn window_query(from: Option<i64>, to: Option<i64>) -> Vec<(&'static str, String)> {
    let mut q = Vec::new();
    if let Some(f) = from {
        q.push(("from", f.to_string()));
    }
    if let Some(t) = to {
        q.push(("to", t.to_string()));
    }
    q
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    /// Sends a request and returns the raw success body.
    pub async fn raw(&self, method: Method, path: &str, query: &[(&str, String)], body: Option<Vec<u8>>) -> Result<Vec<u8>> {
        let mut req = self.http.request(method, format!("{}{path}", self.base)).query(query);
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        let bytes = resp.bytes().await?.to_vec();
        if status.is_success() {
            return Ok(bytes);
        }
        match serde_json::from_slice::<ApiErrorBody>(&bytes) {
            Ok(body) => Err(ClientError::Api { status: status.as_u16(), body }),
            Err(_) => Err(ClientError::Unexpected {
                status: status.as_u16(),
                text: String::from_utf8_lossy(&bytes).into_owned(),
            }),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str, query: &[(&str, String)]) -> Result<T> {
        Ok(serde_json::from_slice(&self.raw(Method::GET, path, query, None).await?)?)
    }

    async fn send<B: Serialize, T: DeserializeOwned>(&self, method: Method, path: &str, body: &B) -> Result<T> {
        let bytes = serde_json::to_vec(body)?;
        Ok(serde_json::from_slice(&self.raw(method, path, &[], Some(bytes)).await?)?)
    }

    pub async fn health(&self) -> Result<serde_json::Value> {
        self.get("/health", &[]).await
    }

    pub async fn graph(&self) -> Result<KnowledgeGraph> {
        self.get("/graph", &[]).await
    }

    pub async fn put_graph(&self, graph: &KnowledgeGraph) -> Result<serde_json::Value> {
        self.send(Method::PUT, "/graph", graph).await
    }

    pub async fn meta(&self) -> Result<DatasetMeta> {
        self.get("/datasets/current/meta", &[]).await
    }

    pub async fn incidents(&self, from: Option<i64>, to: Option<i64>, filters: Option<&FilterPredicate>) -> Result<Vec<IncidentView>> {
        let mut q = window_query(from, to);
        if let Some(f) = filters {
            q.push(("filters", f.to_string()));
        }
        self.get("/incidents", &q).await
    }

    pub async fn kpis(&self, keys: &[SeriesKey], from: Option<i64>, to: Option<i64>, highlight: Option<&SeriesKey>) -> Result<Vec<KpiSeries>> {
        let mut q = window_query(from, to);
        if !keys.is_empty() {
            let list: Vec<String> = keys.iter().map(ToString::to_string).collect();
            q.push(("keys", list.join(",")));
        }
        if let Some(h) = highlight {
            q.push(("highlight", h.to_string()));
        }
        self.get("/kpis", &q).await
    }

    pub async fn alerts(&self, from: Option<i64>, to: Option<i64>) -> Result<AlertReport> {
        self.get("/alerts", &window_query(from, to)).await
    }

    pub async fn changepoints(&self, key: &SeriesKey, from: Option<i64>, to: Option<i64>) -> Result<ChangePointArray> {
        let mut q = window_query(from, to);
        q.push(("key", key.to_string()));
        self.get("/changepoints", &q).await
    }

    pub async fn expand(&self, req: &ExpandRequest) -> Result<ExpansionResult> {
        self.send(Method::POST, "/expand", req).await
    }

    pub async fn expand_all(&self, clue: &Clue, k: Option<usize>, budget_ms: Option<u64>) -> Result<Vec<ExpansionResult>> {
        let body = serde_json::json!({ "clue": clue, "k": k, "budget_ms": budget_ms });
        self.send(Method::POST, "/expand/all", &body).await
    }

    pub async fn refine(&self, req: &RefineRequest) -> Result<RefineResult> {
        self.send(Method::POST, "/refine", req).await
    }

    pub async fn sessions(&self) -> Result<Vec<String>> {
        #[derive(Deserialize)]
        struct List {
            sessions: Vec<String>,
        }
        Ok(self.get::<List>("/sessions", &[]).await?.sessions)
    }

    pub async fn create_session(&self, brush: &BrushSelection) -> Result<InvestigationSession> {
        self.send(Method::POST, "/sessions", brush).await
    }

    pub async fn import_session(&self, document: &[u8]) -> Result<InvestigationSession> {
        let bytes = self.raw(Method::POST, "/sessions/import", &[], Some(document.to_vec())).await?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub async fn session(&self, id: &str) -> Result<InvestigationSession> {
        self.get(&format!("/sessions/{id}"), &[]).await
    }

    pub async fn apply(&self, id: &str, event: &BoardEvent) -> Result<EventOutcome> {
        self.send(Method::POST, &format!("/sessions/{id}/events"), event).await
    }

    pub async fn session_expand(&self, id: &str, req: &ExpandRequest) -> Result<ExpansionResult> {
        self.send(Method::POST, &format!("/sessions/{id}/expand"), req).await
    }

    pub async fn session_refine(&self, id: &str, req: &RefineRequest) -> Result<RefineResult> {
        self.send(Method::POST, &format!("/sessions/{id}/refine"), req).await
    }

    pub async fn layout(&self, id: &str) -> Result<BTreeMap<String, Position>> {
        self.get(&format!("/sessions/{id}/layout"), &[]).await
    }

    /// The canonical session document, byte for byte.
    pub async fn export(&self, id: &str) -> Result<Vec<u8>> {
        self.raw(Method::GET, &format!("/sessions/{id}/export"), &[], None).await
    }

    pub async fn summary(&self, id: &str) -> Result<String> {
        #[derive(Deserialize)]
        struct Summary {
            text: String,
        }
        Ok(self.get::<Summary>(&format!("/sessions/{id}/summary"), &[]).await?.text)
    }
}

pub use reqwest::Method;
