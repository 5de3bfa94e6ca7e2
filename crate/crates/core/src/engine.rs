//! One dataset and graph behind a uniform set of operations, shared by the
//! HTTP service and the embedded CLI path. Also defines the wire bodies.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::board::{BoardEnv, InvestigationSession, LayoutConfig};
use crate::changepoint::{ChangePointArray, ChangePointCache};
use crate::clue::{Clue, FilterPredicate, SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::expand::{Direction, ExpandConfig, ExpansionResult, Expander};
use crate::graph::{graph_version, parse_graph, validate_graph, KnowledgeGraph};
use crate::monitor::{self, AlertReport, BrushSelection, MonitorConfig};
use crate::refine::{self, RefineConfig, RefineResult, Selection};
use crate::store::{ClueData, IncidentLog, TelemetryStore};

/// Defaults applied when a request leaves a setting out.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub expand: ExpandConfig,
    pub refine: RefineConfig,
    pub monitor: MonitorConfig,
    pub layout: LayoutConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub window: TimeRange,
    pub step: i64,
    pub graph_version: String,
    /// Instance count per concept.
    pub instances: std::collections::BTreeMap<String, usize>,
    pub series: usize,
    pub events: usize,
    pub incidents: usize,
}

/// An incident with the KPI it is charted against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentView {
    #[serde(flatten)]
    pub incident: IncidentLog,
    pub kpi: Option<SeriesKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSeries {
    pub key: SeriesKey,
    pub data: ClueData,
    pub highlighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandRequest {
    pub clue: Clue,
    pub direction: Direction,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub budget_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineRequest {
    pub clue: Clue,
    /// Filter id to chosen options; an empty list means every option.
    pub selection: Selection,
    #[serde(default)]
    pub config: Option<RefineConfig>,
}

#[derive(Debug)]
pub struct Engine {
    graph: KnowledgeGraph,
    store: Arc<TelemetryStore>,
    cache: ChangePointCache,
    config: EngineConfig,
    version: String,
}

impl Engine {
    /// Refuses graphs that fail validation.
    pub fn new(graph: KnowledgeGraph, store: Arc<TelemetryStore>, config: EngineConfig) -> Result<Self> {
        let report = validate_graph(&graph);
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report));
        }
        config.expand.detector.validate()?;
        config.refine.validate()?;
        config.monitor.validate()?;
        let graph = graph.canonical();
        Ok(Self {
            version: graph_version(&graph),
            graph,
            store,
            cache: ChangePointCache::new(),
            config,
        })
    }

    /// Loads a dataset directory and a graph document (default
    /// `<dataset>/graph.json`).
    pub fn load(dataset: &Path, graph: Option<&Path>, config: EngineConfig) -> Result<Self> {
        let store = TelemetryStore::load(dataset)?;
        let path = graph.map(Path::to_path_buf).unwrap_or_else(|| dataset.join("graph.json"));
        let bytes = std::fs::read(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::new(parse_graph(&bytes)?, Arc::new(store), config)
    }

    /// A new engine over the same store with `graph` swapped in.
    pub fn with_graph(&self, graph: KnowledgeGraph) -> Result<Self> {
        Self::new(graph, self.store.clone(), self.config.clone())
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn store(&self) -> &TelemetryStore {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn graph_version(&self) -> &str {
        &self.version
    }

    pub fn env(&self) -> BoardEnv<'_> {
        BoardEnv {
            graph: &self.graph,
            store: &self.store,
        }
    }

    /// `[from, to)` clipped to the dataset; either bound defaults to the
    /// dataset's.
    pub fn window(&self, from: Option<i64>, to: Option<i64>) -> Result<TimeRange> {
        let w = self.store.window();
        let asked = TimeRange::new(from.unwrap_or(w.start), to.unwrap_or(w.end))?;
        asked
            .intersect(&w)
            .ok_or_else(|| Error::invalid(format!("range {asked} lies outside the dataset window {w}")))
    }

    pub fn meta(&self) -> DatasetMeta {
        let m = self.store.manifest();
        DatasetMeta {
            name: m.name.clone(),
            window: m.window,
            step: m.step,
            graph_version: self.version.clone(),
            instances: m.instances.iter().map(|(c, i)| (c.clone(), i.len())).collect(),
            series: m.series.len(),
            events: m.events.len(),
            incidents: self.store.incidents().len(),
        }
    }

    pub fn incidents(&self, window: &TimeRange, filters: Option<&FilterPredicate>) -> Vec<IncidentView> {
        self.store
            .query_incidents(window, filters)
            .into_iter()
            .map(|incident| IncidentView {
                kpi: monitor::link_incident_to_kpi(&self.store, &self.graph, &incident).ok(),
                incident,
            })
            .collect()
    }

    /// Series for `keys`, or every primary KPI when `keys` is empty.
    pub fn kpis(&self, keys: &[SeriesKey], window: &TimeRange, highlight: Option<&SeriesKey>) -> Result<Vec<KpiSeries>> {
        let keys = if keys.is_empty() {
            monitor::kpi_keys(&self.store, &self.graph)
        } else {
            keys.to_vec()
        };
        keys.into_iter()
            .map(|key| {
                Ok(KpiSeries {
                    data: self.store.query_clue(&self.graph, &key, window)?,
                    highlighted: highlight == Some(&key),
                    key,
                })
            })
            .collect()
    }

    pub fn alerts(&self, window: &TimeRange) -> Result<AlertReport> {
        let keys = monitor::kpi_keys(&self.store, &self.graph);
        monitor::detect_anomalies(&self.store, &self.graph, &keys, window, &self.config.monitor)
    }

    pub fn changepoints(&self, key: &SeriesKey, window: &TimeRange) -> Result<ChangePointArray> {
        let cp = self
            .cache
            .changepoints(&self.store, &self.graph, key, window, &self.config.expand.detector)?;
        Ok((*cp).clone())
    }

    fn expander(&self, k: Option<usize>, budget_ms: Option<u64>) -> Expander<'_> {
        let mut config = self.config.expand.clone();
        if let Some(k) = k {
            config.k = k;
        }
        if budget_ms.is_some() {
            config.budget_ms = budget_ms;
        }
        Expander::new(&self.store, &self.graph, &self.cache, config)
    }

    /// One direction over the clue's own window.
    pub fn expand(&self, req: &ExpandRequest, exclude: &BTreeSet<SeriesKey>) -> Result<ExpansionResult> {
        self.expander(req.k, req.budget_ms)
            .expand(&req.clue, &req.clue.window, req.direction, exclude)
    }

    pub fn expand_all(&self, clue: &Clue, k: Option<usize>, budget_ms: Option<u64>, exclude: &BTreeSet<SeriesKey>) -> Result<Vec<ExpansionResult>> {
        self.expander(k, budget_ms).expand_all(clue, &clue.window, exclude)
    }

    pub fn refine(&self, req: &RefineRequest, evidence: &[Clue]) -> Result<RefineResult> {
        let config = req.config.clone().unwrap_or_else(|| self.config.refine.clone());
        refine::refine_clue(
            &self.store,
            &self.graph,
            &self.cache,
            &req.clue,
            &req.selection,
            evidence,
            &req.clue.window,
            &config,
        )
    }

    pub fn open_session(&self, id: &str, brush: &BrushSelection) -> Result<InvestigationSession> {
        monitor::open_investigation(&self.store, &self.graph, id, brush, self.config.layout.clone())
    }

    /// Session-scoped expansion: the clue must lie in the session window and
    /// clues already on the board are never recommended.
    pub fn expand_in_session(&self, session: &InvestigationSession, req: &ExpandRequest) -> Result<ExpansionResult> {
        check_in_session(session, &req.clue)?;
        self.expand(req, &session.board_keys())
    }

    /// Session-scoped refinement scored against the board's validated evidence.
    pub fn refine_in_session(&self, session: &InvestigationSession, req: &RefineRequest) -> Result<RefineResult> {
        check_in_session(session, &req.clue)?;
        let evidence: Vec<Clue> = session
            .cards
            .iter()
            .flat_map(|c| c.attributes.iter())
            .filter(|a| a.state == crate::board::CardState::Evidence && a.clue.key != req.clue.key)
            .map(|a| Clue::new(a.clue.key.clone(), req.clue.window))
            .collect();
        self.refine(req, &evidence)
    }
}

fn check_in_session(session: &InvestigationSession, clue: &Clue) -> Result<()> {
    if !session.meta.window.contains_range(&clue.window) {
        return Err(Error::invalid(format!(
            "clue window {} lies outside the session window {}",
            clue.window, session.meta.window
        )));
    }
    Ok(())
}
