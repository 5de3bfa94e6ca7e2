//! Shared engine handle and the persisted session registry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use clueboard_core::board::{export_session, import_session, BoardEvent, InvestigationSession};
use clueboard_core::engine::Engine;
use clueboard_core::graph::serialize_graph;
use clueboard_core::monitor::BrushSelection;
use clueboard_core::{Error, Result};
use tokio::sync::Mutex;

type Slot = Arc<Mutex<InvestigationSession>>;

pub struct AppState {
    engine: RwLock<Arc<Engine>>,
    sessions: Mutex<BTreeMap<String, Slot>>,
    dir: Option<PathBuf>,
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes via a sibling temp file and a rename, so readers never see a torn
/// document.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes).map_err(|e| io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io(path, e))
}

impl AppState {
    /// Restores every session under `dir` by replaying its history. A graph
    /// saved there by an earlier `PUT /graph` takes precedence over the
    /// engine's.
    pub fn open(engine: Engine, dir: Option<PathBuf>) -> Result<Self> {
        let mut engine = engine;
        let mut sessions = BTreeMap::new();
        if let Some(d) = &dir {
            std::fs::create_dir_all(d.join("sessions")).map_err(|e| io(d, e))?;
            let saved = d.join("graph.json");
            if saved.exists() {
                let bytes = std::fs::read(&saved).map_err(|e| io(&saved, e))?;
                engine = engine.with_graph(clueboard_core::graph::parse_graph(&bytes)?)?;
            }
            let mut files: Vec<PathBuf> = std::fs::read_dir(d.join("sessions"))
                .map_err(|e| io(d, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            for f in files {
                let bytes = std::fs::read(&f).map_err(|e| io(&f, e))?;
                let s = import_session(&bytes, engine.env()).map_err(|e| match e {
                    Error::Schema { path, message } => Error::Schema {
                        path: format!("{}#{path}", f.display()),
                        message,
                    },
                    other => other,
                })?;
                sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(Self {
            engine: RwLock::new(Arc::new(engine)),
            sessions: Mutex::new(sessions),
            dir,
        })
    }

    pub fn engine(&self) -> Arc<Engine> {
        self.engine.read().map(|e| e.clone()).unwrap_or_else(|p| p.into_inner().clone())
    }

    pub fn replace_graph(&self, graph: clueboard_core::graph::KnowledgeGraph) -> Result<Arc<Engine>> {
        let next = Arc::new(self.engine().with_graph(graph)?);
        if let Some(d) = &self.dir {
            write_atomic(&d.join("graph.json"), &serialize_graph(next.graph())?)?;
        }
        match self.engine.write() {
            Ok(mut e) => *e = next.clone(),
            Err(p) => *p.into_inner() = next.clone(),
        }
        Ok(next)
    }

    fn persist(&self, session: &InvestigationSession) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join("sessions").join(format!("{}.json", session.id()));
            write_atomic(&path, &export_session(session)?)?;
        }
        Ok(())
    }

    pub async fn slot(&self, id: &str) -> Result<Slot> {
        self.sessions
            .lock()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session `{id}`")))
    }

    pub async fn ids(&self) -> Vec<String> {
        self.sessions.lock().await.keys().cloned().collect()
    }

    pub async fn snapshot(&self, id: &str) -> Result<InvestigationSession> {
        Ok(self.slot(id).await?.lock().await.clone())
    }

    async fn insert(&self, session: InvestigationSession) -> Result<InvestigationSession> {
        let mut map = self.sessions.lock().await;
        if map.contains_key(session.id()) {
            return Err(Error::AlreadyExists(format!("session `{}`", session.id())));
        }
        self.persist(&session)?;
        map.insert(session.id().to_string(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    pub async fn create(&self, brush: &BrushSelection) -> Result<InvestigationSession> {
        let id = uuid::Uuid::new_v4().to_string();
        let session = self.engine().open_session(&id, brush)?;
        self.insert(session).await
    }

    pub async fn import(&self, bytes: &[u8]) -> Result<InvestigationSession> {
        let session = import_session(bytes, self.engine().env())?;
        self.insert(session).await
    }

    /// Applies one event under the session's lock and persists the result
    /// before it becomes visible.
    pub async fn apply(&self, id: &str, event: BoardEvent) -> Result<(bool, InvestigationSession)> {
        let slot = self.slot(id).await?;
        let mut guard = slot.lock().await;
        let engine = self.engine();
        let mut next = guard.clone();
        let changed = next.apply(engine.env(), event)?;
        if changed {
            self.persist(&next)?;
            *guard = next;
        }
        Ok((changed, guard.clone()))
    }
}
