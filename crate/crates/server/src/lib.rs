//! HTTP/JSON service over the investigation engine.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clueboard_core::engine::{Engine, EngineConfig};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub mod error;
pub mod routes;
pub mod state;

pub use error::ApiError;
pub use routes::{router, EventOutcome, SessionList, SummaryBody};
pub use state::AppState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    pub dataset: PathBuf,
    /// Graph document; `<dataset>/graph.json` when absent.
    #[serde(default)]
    pub graph: Option<PathBuf>,
    /// Where sessions and uploaded graphs are persisted; in-memory only
    /// when absent.
    #[serde(default)]
    pub state_dir: Option<PathBuf>,
    #[serde(default)]
    pub engine: EngineConfig,
}

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

impl ServiceConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        Self {
            bind: default_bind(),
            dataset: dataset.into(),
            graph: None,
            state_dir: None,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("cannot load engine: {0}")]
    Engine(#[from] clueboard_core::Error),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

/// A bound, not yet serving, service.
pub struct Service {
    listener: TcpListener,
    state: Arc<AppState>,
}

impl Service {
    pub async fn bind(config: &ServiceConfig) -> Result<Self, StartError> {
        let engine = Engine::load(&config.dataset, config.graph.as_deref(), config.engine.clone())?;
        let state = Arc::new(AppState::open(engine, config.state_dir.clone())?);
        let listener = TcpListener::bind(config.bind)
            .await
            .map_err(|source| StartError::Bind { addr: config.bind, source })?;
        Ok(Self { listener, state })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn state(&self) -> Arc<AppState> {
        self.state.clone()
    }

    pub async fn run(self) -> std::io::Result<()> {
        axum::serve(self.listener, router(self.state)).await
    }

    pub async fn run_until(self, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await
    }

    /// Serves in a background task; returns the address.
    pub fn spawn(self) -> SocketAddr {
        let addr = self.local_addr();
        tokio::spawn(async move {
            if let Err(e) = self.run().await {
                tracing::error!("service stopped: {e}");
            }
        });
        addr
    }
}
