//! Local telemetry dataset: KPI series, event sequences, incident logs and
//! filterable records, indexed for clue resolution.

mod dataset;
mod query;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clue::{FilterPredicate, SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::graph::{
    AttributeDef, Bindings, DataKind, EntityConcept, Hierarchy, KnowledgeGraph, RelationDef,
    Template,
};

pub use query::LocalQuery;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesData {
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
}

impl TimeSeriesData {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::invalid("timestamps and values differ in length"));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("timestamps must be strictly increasing"));
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clip(&self, window: &TimeRange) -> TimeSeriesData {
        let lo = self.timestamps.partition_point(|t| *t < window.start);
        let hi = self.timestamps.partition_point(|t| *t < window.end);
        TimeSeriesData {
            timestamps: self.timestamps[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInterval {
    pub start: i64,
    pub end: i64,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSequenceData {
    pub intervals: Vec<EventInterval>,
}

impl EventSequenceData {
    pub fn new(intervals: Vec<EventInterval>) -> Result<Self> {
        if let Some(iv) = intervals.iter().find(|iv| iv.start >= iv.end) {
            return Err(Error::invalid(format!(
                "event interval [{}, {}) is empty",
                iv.start, iv.end
            )));
        }
        if intervals.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(Error::invalid("event intervals must be sorted and non-overlapping"));
        }
        Ok(Self { intervals })
    }

    pub fn clip(&self, window: &TimeRange) -> EventSequenceData {
        let intervals = self
            .intervals
            .iter()
            .filter_map(|iv| {
                let start = iv.start.max(window.start);
                let end = iv.end.min(window.end);
                (end > start).then(|| EventInterval {
                    start,
                    end,
                    label: iv.label.clone(),
                })
            })
            .collect();
        EventSequenceData { intervals }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub label: String,
    pub series: TimeSeriesData,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEvents {
    pub label: String,
    pub events: EventSequenceData,
}

/// Payload of a resolved clue, shaped by the attribute's [`DataKind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClueData {
    Number { series: TimeSeriesData },
    Bag { members: Vec<LabeledSeries> },
    String { events: EventSequenceData },
    Set { members: Vec<LabeledEvents> },
}

impl ClueData {
    pub fn kind(&self) -> DataKind {
        match self {
            ClueData::Number { .. } => DataKind::Number,
            ClueData::Bag { .. } => DataKind::Bag,
            ClueData::String { .. } => DataKind::String,
            ClueData::Set { .. } => DataKind::Set,
        }
    }
}

/// A failed request for virtual resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentLog {
    pub timestamp: i64,
    pub customer: String,
    pub area: String,
    pub zone: String,
    pub cluster: String,
    pub status: String,
    pub error_code: String,
    pub os_type: String,
    pub vm_size: String,
    pub requested_vms: u32,
}

impl IncidentLog {
    /// Categorical field by column name or by the matching filter id.
    pub fn field(&self, name: &str) -> Option<&str> {
        Some(match name {
            "customer" | "Customer" => &self.customer,
            "area" | "Area" => &self.area,
            "zone" | "Zone" => &self.zone,
            "cluster" | "Cluster" => &self.cluster,
            "status" | "Status" => &self.status,
            "error_code" | "ErrorCode" => &self.error_code,
            "os_type" | "OSType" => &self.os_type,
            "vm_size" | "VMSize" => &self.vm_size,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub timestamp: i64,
    /// Values of `RecordTable::scope_fields`, in order.
    pub scope: Vec<String>,
    /// Values of `RecordTable::filter_fields`, in order.
    pub filters: Vec<String>,
    pub value: f64,
}

/// Filterable raw records backing `count` attributes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordTable {
    pub scope_fields: Vec<String>,
    pub filter_fields: Vec<String>,
    pub rows: Vec<Record>,
}

impl RecordTable {
    fn scope_index(&self, field: &str) -> Option<usize> {
        self.scope_fields.iter().position(|f| f == field)
    }

    pub fn filter_index(&self, field: &str) -> Option<usize> {
        self.filter_fields.iter().position(|f| f == field)
    }

    /// Rows with timestamps inside `window` (rows are timestamp-sorted).
    pub fn rows_in(&self, window: &TimeRange) -> &[Record] {
        let lo = self.rows.partition_point(|r| r.timestamp < window.start);
        let hi = self.rows.partition_point(|r| r.timestamp < window.end);
        &self.rows[lo..hi]
    }

    pub fn distinct_values(&self, filter: &str) -> Vec<String> {
        match self.filter_index(filter) {
            Some(i) => {
                let set: BTreeSet<&str> = self.rows.iter().map(|r| r.filters[i].as_str()).collect();
                set.into_iter().map(String::from).collect()
            }
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Reserved VMs leak after a build change until allocation fails.
    ReservationLeak,
    /// Normal nodes drain after a build change while consumption climbs.
    NodeDrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseClue {
    pub key: SeriesKey,
    pub range: TimeRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeStep {
    pub key: SeriesKey,
    /// Delay after the cause, in samples.
    pub lag: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentExpectation {
    pub zone: String,
    pub window: TimeRange,
    /// Incidents the generator wrote for `zone` inside `window`.
    pub count: usize,
    /// Expected baseline incidents for `zone` over a window of equal length.
    pub baseline: f64,
}

/// Injected cascade written next to a generated dataset; evaluation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub cause: CauseClue,
    pub cascade: Vec<CascadeStep>,
    /// KPI that alerts first (the zone's primary KPI).
    pub anomaly: SeriesKey,
    pub injection_window: TimeRange,
    /// Build-change lead over the incident spike, in samples.
    pub lag: i64,
    pub injected_filter: String,
    pub injected_option: String,
    pub incidents: IncidentExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsManifest {
    pub file: String,
    pub scope_fields: Vec<String>,
    pub filter_fields: Vec<String>,
}

/// `manifest.json`: topology, series index, window and sampling step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub window: TimeRange,
    /// Sampling step in seconds.
    pub step: i64,
    pub instances: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub lifetimes: BTreeMap<String, TimeRange>,
    pub links: BTreeMap<String, Vec<(String, String)>>,
    pub series: BTreeMap<String, String>,
    pub events: BTreeMap<String, String>,
    pub records: RecordsManifest,
    pub incidents: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

/// Read-only telemetry dataset.
#[derive(Debug, Clone)]
pub struct TelemetryStore {
    manifest: Manifest,
    series: BTreeMap<String, TimeSeriesData>,
    events: BTreeMap<String, EventSequenceData>,
    incidents: Vec<IncidentLog>,
    records: RecordTable,
    ground_truth: Option<GroundTruth>,
}

/// An attribute bound to a concrete instance and its local query.
#[derive(Debug, Clone)]
pub struct ResolvedAttribute<'g> {
    pub concept: &'g EntityConcept,
    pub attribute: &'g AttributeDef,
    pub query: LocalQuery,
    pub filterable: bool,
}

impl TelemetryStore {
    /// Assembles a store from in-memory parts; file names in the manifest
    /// are regenerated from the keys.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: &str,
        window: TimeRange,
        step: i64,
        instances: BTreeMap<String, Vec<String>>,
        links: BTreeMap<String, Vec<(String, String)>>,
        series: BTreeMap<String, TimeSeriesData>,
        events: BTreeMap<String, EventSequenceData>,
        mut incidents: Vec<IncidentLog>,
        mut records: RecordTable,
        ground_truth: Option<GroundTruth>,
    ) -> Result<Self> {
        if step <= 0 {
            return Err(Error::invalid("sampling step must be positive"));
        }
        incidents.sort_by_key(|i| i.timestamp);
        records.rows.sort_by_key(|r| r.timestamp);
        let manifest = Manifest {
            name: name.to_string(),
            window,
            step,
            instances,
            lifetimes: BTreeMap::new(),
            links,
            series: series.keys().map(|k| (k.clone(), dataset::series_file(k))).collect(),
            events: events.keys().map(|k| (k.clone(), dataset::events_file(k))).collect(),
            records: RecordsManifest {
                file: "records.csv".into(),
                scope_fields: records.scope_fields.clone(),
                filter_fields: records.filter_fields.clone(),
            },
            incidents: "incidents.csv".into(),
            ground_truth: ground_truth.as_ref().map(|_| "ground_truth.json".to_string()),
        };
        Ok(Self {
            manifest,
            series,
            events,
            incidents,
            records,
            ground_truth,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn window(&self) -> TimeRange {
        self.manifest.window
    }

    pub fn step(&self) -> i64 {
        self.manifest.step
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    pub fn records(&self) -> &RecordTable {
        &self.records
    }

    pub fn incidents(&self) -> &[IncidentLog] {
        &self.incidents
    }

    pub fn series_keys(&self) -> impl Iterator<Item = &String> {
        self.series.keys()
    }

    fn instances_of(&self, graph: &KnowledgeGraph, concept: &EntityConcept) -> Result<&[String]> {
        let _ = graph;
        let rendered = Template::parse(&concept.instance_query)?.render(&Bindings::default());
        match LocalQuery::parse(&rendered)? {
            LocalQuery::Instances { concept } => Ok(self
                .manifest
                .instances
                .get(&concept)
                .map(Vec::as_slice)
                .unwrap_or(&[])),
            other => Err(Error::invalid(format!(
                "instance query of `{}` must be `instances <name>`, got {other:?}",
                concept.id
            ))),
        }
    }

    fn links_table(&self, relation: &RelationDef, instance: &str) -> Result<&[(String, String)]> {
        let rendered = Template::parse(&relation.traversal_query)?.render(&Bindings {
            instance: Some(instance),
            ..Default::default()
        });
        match LocalQuery::parse(&rendered)? {
            LocalQuery::Links { table } => Ok(self
                .manifest
                .links
                .get(&table)
                .map(Vec::as_slice)
                .unwrap_or(&[])),
            other => Err(Error::invalid(format!(
                "traversal query of `{}` must be `links <table>`, got {other:?}",
                relation.id
            ))),
        }
    }

    /// Instances reached from `instance` over `relation`; `forward` walks
    /// source→target. Sorted, deduplicated.
    pub fn traverse(&self, relation: &RelationDef, instance: &str, forward: bool) -> Result<Vec<String>> {
        let table = self.links_table(relation, instance)?;
        let out: BTreeSet<&str> = table
            .iter()
            .filter_map(|(s, t)| {
                if forward && s == instance {
                    Some(t.as_str())
                } else if !forward && t == instance {
                    Some(s.as_str())
                } else {
                    None
                }
            })
            .collect();
        Ok(out.into_iter().map(String::from).collect())
    }

    /// The containing instance of `instance`, if any, with the relation used.
    pub fn parent_of<'g>(
        &self,
        graph: &'g KnowledgeGraph,
        concept: &str,
        instance: &str,
    ) -> Result<Option<(&'g RelationDef, String)>> {
        let mut rels: Vec<&RelationDef> = graph
            .relations
            .iter()
            .filter(|r| r.hierarchy == Hierarchy::Contains && r.target == concept)
            .collect();
        rels.sort_by(|a, b| a.id.cmp(&b.id));
        for rel in rels {
            if let Some(p) = self.traverse(rel, instance, false)?.into_iter().next() {
                return Ok(Some((rel, p)));
            }
        }
        Ok(None)
    }

    fn active_in(&self, instance: &str, window: &TimeRange) -> bool {
        self.manifest
            .lifetimes
            .get(instance)
            .is_none_or(|life| life.overlaps(window))
    }

    /// Instances of a concept active in `window`, optionally restricted to
    /// children of `parent` under `contains`. Lexicographic order.
    pub fn list_instances(
        &self,
        graph: &KnowledgeGraph,
        concept: &str,
        window: &TimeRange,
        parent: Option<&str>,
    ) -> Result<Vec<String>> {
        let c = graph.require_concept(concept)?;
        let all = self.instances_of(graph, c)?;
        let mut out: BTreeSet<String> = all
            .iter()
            .filter(|i| self.active_in(i, window))
            .cloned()
            .collect();
        if let Some(parent) = parent {
            let mut children = BTreeSet::new();
            for rel in graph
                .relations
                .iter()
                .filter(|r| r.hierarchy == Hierarchy::Contains && r.target == concept)
            {
                children.extend(self.traverse(rel, parent, true)?);
            }
            out.retain(|i| children.contains(i));
        }
        Ok(out.into_iter().collect())
    }

    /// Checks concept, attribute and instance, and binds the attribute's
    /// template to its local query.
    pub fn resolve<'g>(&self, graph: &'g KnowledgeGraph, key: &SeriesKey) -> Result<ResolvedAttribute<'g>> {
        let concept = graph.require_concept(&key.concept)?;
        let attribute = concept.attribute(&key.attribute).ok_or_else(|| {
            Error::not_found(format!("attribute `{}` of `{}`", key.attribute, key.concept))
        })?;
        if !self.instances_of(graph, concept)?.contains(&key.instance) {
            return Err(Error::not_found(format!(
                "instance `{}` of `{}`",
                key.instance, key.concept
            )));
        }
        let template = Template::parse(&attribute.query_template)?;
        let parent = if template.uses(crate::graph::Placeholder::Parent) {
            self.parent_of(graph, &key.concept, &key.instance)?.map(|(_, p)| p)
        } else {
            None
        };
        let rendered = template.render(&Bindings {
            instance: Some(&key.instance),
            parent: parent.as_deref(),
            ..Default::default()
        });
        let query = LocalQuery::parse(&rendered)?;
        let ok = matches!(
            (&query, attribute.kind),
            (LocalQuery::Series { .. }, DataKind::Number | DataKind::Bag)
                | (LocalQuery::Events { .. }, DataKind::String | DataKind::Set)
                | (LocalQuery::Count { .. }, DataKind::Number)
        );
        if !ok {
            return Err(Error::invalid(format!(
                "query `{rendered}` cannot produce a {:?} attribute",
                attribute.kind
            )));
        }
        let filterable = matches!(query, LocalQuery::Count { .. })
            && template.uses(crate::graph::Placeholder::FilterClauses);
        Ok(ResolvedAttribute {
            concept,
            attribute,
            query,
            filterable,
        })
    }

    /// Option labels of a filter: declared options, or for implicit filters
    /// the labels observed in the record column or the concept's event
    /// sequences.
    pub fn filter_options(&self, graph: &KnowledgeGraph, concept: &EntityConcept, filter: &str) -> Result<Vec<String>> {
        if !concept.filters.is_empty() {
            return concept
                .filters
                .iter()
                .find(|f| f.id == filter)
                .map(|f| f.options.clone())
                .ok_or_else(|| Error::not_found(format!("filter `{filter}` of `{}`", concept.id)));
        }
        if !concept.effective_filter_ids().iter().any(|f| f == filter) {
            return Err(Error::not_found(format!("filter `{filter}` of `{}`", concept.id)));
        }
        if self.records.filter_index(filter).is_some() {
            return Ok(self.records.distinct_values(filter));
        }
        let mut labels = BTreeSet::new();
        for instance in self.instances_of(graph, concept)? {
            let key = SeriesKey::new(&concept.id, instance, filter);
            match self.query_clue(graph, &key, &self.window())? {
                ClueData::String { events } => {
                    labels.extend(events.intervals.into_iter().map(|iv| iv.label));
                }
                ClueData::Set { members } => {
                    for m in members {
                        labels.extend(m.events.intervals.into_iter().map(|iv| iv.label));
                    }
                }
                _ => {}
            }
        }
        Ok(labels.into_iter().collect())
    }

    fn check_predicate(&self, graph: &KnowledgeGraph, concept: &EntityConcept, predicate: &FilterPredicate) -> Result<()> {
        for clause in predicate.clauses() {
            let options = self.filter_options(graph, concept, &clause.filter)?;
            if let Some(bad) = clause.options.iter().find(|o| !options.contains(o)) {
                return Err(Error::invalid(format!(
                    "`{bad}` is not an option of filter `{}`",
                    clause.filter
                )));
            }
            if self.records.filter_index(&clause.filter).is_none() {
                return Err(Error::invalid(format!(
                    "filter `{}` has no record column",
                    clause.filter
                )));
            }
        }
        Ok(())
    }

    fn record_matcher<'a>(
        &'a self,
        field: &str,
        value: &'a str,
        predicate: Option<&'a FilterPredicate>,
    ) -> Result<impl Fn(&Record) -> bool + 'a> {
        let scope = self
            .records
            .scope_index(field)
            .ok_or_else(|| Error::invalid(format!("records have no scope field `{field}`")))?;
        let table = &self.records;
        Ok(move |r: &Record| {
            r.scope[scope] == value
                && predicate.is_none_or(|p| {
                    p.matches(|f| table.filter_index(f).map(|i| r.filters[i].as_str()))
                })
        })
    }

    /// Resolves a clue's payload, clipped to `window`.
    pub fn query_clue(&self, graph: &KnowledgeGraph, key: &SeriesKey, window: &TimeRange) -> Result<ClueData> {
        if window.is_empty() {
            return Err(Error::invalid(format!("empty window {window}")));
        }
        let resolved = self.resolve(graph, key)?;
        if let Some(p) = &key.filter {
            if !resolved.filterable {
                return Err(Error::invalid(format!(
                    "attribute `{}` is not record-backed and cannot be filtered",
                    key.attribute
                )));
            }
            self.check_predicate(graph, resolved.concept, p)?;
        }
        Ok(match (&resolved.query, resolved.attribute.kind) {
            (LocalQuery::Series { pattern }, DataKind::Number) => {
                let series = self
                    .series
                    .get(pattern)
                    .ok_or_else(|| Error::not_found(format!("series `{pattern}`")))?;
                ClueData::Number { series: series.clip(window) }
            }
            (LocalQuery::Series { pattern }, _) => ClueData::Bag {
                members: self
                    .series
                    .iter()
                    .filter(|(k, _)| query::pattern_matches(pattern, k))
                    .map(|(k, s)| LabeledSeries {
                        label: k.clone(),
                        series: s.clip(window),
                    })
                    .collect(),
            },
            (LocalQuery::Events { pattern }, DataKind::String) => {
                let events = self
                    .events
                    .get(pattern)
                    .ok_or_else(|| Error::not_found(format!("events `{pattern}`")))?;
                ClueData::String { events: events.clip(window) }
            }
            (LocalQuery::Events { pattern }, _) => ClueData::Set {
                members: self
                    .events
                    .iter()
                    .filter(|(k, _)| query::pattern_matches(pattern, k))
                    .map(|(k, e)| LabeledEvents {
                        label: k.clone(),
                        events: e.clip(window),
                    })
                    .collect(),
            },
            (LocalQuery::Count { field, value }, _) => {
                let matcher = self.record_matcher(field, value, key.filter.as_ref())?;
                ClueData::Number {
                    series: self.grid_counts(window, matcher),
                }
            }
            _ => unreachable!("resolve() checks query/kind compatibility"),
        })
    }

    /// Sample timestamps of `window` on the dataset grid (origin = dataset
    /// start).
    pub fn grid(&self, window: &TimeRange) -> Vec<i64> {
        let step = self.step();
        let origin = self.window().start;
        let first = origin + (window.start - origin + step - 1).div_euclid(step) * step;
        (0..).map(|i| first + i * step).take_while(|t| *t < window.end).collect()
    }

    /// Counts per sampling step on the dataset grid.
    fn grid_counts(&self, window: &TimeRange, matcher: impl Fn(&Record) -> bool) -> TimeSeriesData {
        let step = self.step();
        let timestamps = self.grid(window);
        let mut values = vec![0.0; timestamps.len()];
        if let (Some(&lo), Some(&hi)) = (timestamps.first(), timestamps.last()) {
            let span = TimeRange { start: lo, end: hi + step };
            for r in self.records.rows_in(&span) {
                if matcher(r) {
                    values[((r.timestamp - lo) / step) as usize] += 1.0;
                }
            }
        }
        TimeSeriesData { timestamps, values }
    }

    /// Records on the grid span of `window` that fall in the scope of a
    /// count attribute, ignoring the key's filter.
    pub fn scoped_records(&self, graph: &KnowledgeGraph, key: &SeriesKey, window: &TimeRange) -> Result<Vec<&Record>> {
        let resolved = self.resolve(graph, key)?;
        let LocalQuery::Count { field, value } = &resolved.query else {
            return Err(Error::invalid(format!("attribute `{}` is not record-backed", key.attribute)));
        };
        let matcher = self.record_matcher(field, value, None)?;
        let grid = self.grid(window);
        let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) else {
            return Ok(Vec::new());
        };
        let span = TimeRange { start: lo, end: hi + self.step() };
        Ok(self.records.rows_in(&span).iter().filter(|r| matcher(r)).collect())
    }

    pub fn is_record_backed(&self, graph: &KnowledgeGraph, key: &SeriesKey) -> Result<bool> {
        Ok(matches!(self.resolve(graph, key)?.query, LocalQuery::Count { .. }))
    }

    /// Per-bin counts of records matching the key's scope and filter, with
    /// bins of `bin` seconds starting at `window.start`.
    pub fn aggregate_filtered_count(
        &self,
        graph: &KnowledgeGraph,
        key: &SeriesKey,
        window: &TimeRange,
        bin: i64,
    ) -> Result<TimeSeriesData> {
        if window.is_empty() {
            return Err(Error::invalid(format!("empty window {window}")));
        }
        if bin <= 0 || window.len() % bin != 0 {
            return Err(Error::invalid(format!(
                "bin {bin}s must divide the window length {}s",
                window.len()
            )));
        }
        let resolved = self.resolve(graph, key)?;
        let LocalQuery::Count { field, value } = &resolved.query else {
            return Err(Error::invalid(format!(
                "attribute `{}` is not record-backed",
                key.attribute
            )));
        };
        if let Some(p) = &key.filter {
            self.check_predicate(graph, resolved.concept, p)?;
        }
        let matcher = self.record_matcher(field, value, key.filter.as_ref())?;
        let n = (window.len() / bin) as usize;
        let timestamps: Vec<i64> = (0..n as i64).map(|i| window.start + i * bin).collect();
        let mut values = vec![0.0; n];
        for r in self.records.rows_in(window) {
            if matcher(r) {
                values[((r.timestamp - window.start) / bin) as usize] += 1.0;
            }
        }
        Ok(TimeSeriesData { timestamps, values })
    }

    /// Incidents inside `window` matching `predicate`, by timestamp.
    pub fn query_incidents(&self, window: &TimeRange, predicate: Option<&FilterPredicate>) -> Vec<IncidentLog> {
        let lo = self.incidents.partition_point(|i| i.timestamp < window.start);
        let hi = self.incidents.partition_point(|i| i.timestamp < window.end);
        self.incidents[lo..hi.max(lo)]
            .iter()
            .filter(|i| predicate.is_none_or(|p| p.matches(|f| i.field(f))))
            .cloned()
            .collect()
    }

    /// Every (concept, instance) pair the graph can resolve, sorted.
    pub fn entities(&self, graph: &KnowledgeGraph) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for c in &graph.concepts {
            if let Ok(instances) = self.instances_of(graph, c) {
                out.extend(instances.iter().map(|i| (c.id.clone(), i.clone())));
            }
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_store, use_case_graph, ScenarioSpec};

    fn fixture() -> (KnowledgeGraph, TelemetryStore) {
        (use_case_graph(), generate_store(1, &ScenarioSpec::default()).unwrap())
    }

    #[test]
    fn incident_count_is_hourly_series() {
        let (g, s) = fixture();
        let key = SeriesKey::new("Zone", "Zone02", "IncidentCount");
        let ClueData::Number { series } = s.query_clue(&g, &key, &s.window()).unwrap() else {
            panic!("expected a number clue");
        };
        assert_eq!(series.len() as i64, s.window().len() / 3600);
        assert!(series.timestamps.windows(2).all(|w| w[1] - w[0] == 3600));
    }

    #[test]
    fn build_version_is_an_event_sequence() {
        let (g, s) = fixture();
        let inst = s.list_instances(&g, "Cluster", &s.window(), None).unwrap()[0].clone();
        let key = SeriesKey::new("Cluster", &inst, "BuildVersion");
        let data = s.query_clue(&g, &key, &s.window()).unwrap();
        assert!(matches!(data, ClueData::String { .. }));
    }

    #[test]
    fn bag_and_set_attributes_resolve_to_families() {
        let (g, s) = fixture();
        let inst = s.list_instances(&g, "Cluster", &s.window(), None).unwrap()[0].clone();
        match s.query_clue(&g, &SeriesKey::new("Cluster", &inst, "NodeStates"), &s.window()).unwrap() {
            ClueData::Bag { members } => assert_eq!(members.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        let cust = s.list_instances(&g, "Customer", &s.window(), None).unwrap()[0].clone();
        assert!(matches!(
            s.query_clue(&g, &SeriesKey::new("Customer", &cust, "SkuMix"), &s.window()).unwrap(),
            ClueData::Set { .. }
        ));
    }

    #[test]
    fn empty_window_and_unknown_key_fail() {
        let (g, s) = fixture();
        let key = SeriesKey::new("Zone", "Zone02", "IncidentCount");
        let w = TimeRange { start: s.window().start, end: s.window().start };
        assert!(matches!(s.query_clue(&g, &key, &w), Err(Error::InvalidArgument(_))));
        let bad = SeriesKey::new("Zone", "Zone99", "IncidentCount");
        assert!(matches!(s.query_clue(&g, &bad, &s.window()), Err(Error::NotFound(_))));
        let bad = SeriesKey::new("Zone", "Zone02", "Nope");
        assert!(matches!(s.query_clue(&g, &bad, &s.window()), Err(Error::NotFound(_))));
    }

    #[test]
    fn clusters_of_a_zone_are_a_subset() {
        let (g, s) = fixture();
        let all = s.list_instances(&g, "Cluster", &s.window(), None).unwrap();
        let some = s.list_instances(&g, "Cluster", &s.window(), Some("Zone02")).unwrap();
        assert!(!some.is_empty() && some.len() < all.len());
        let zone_rel = g.relation("zone_contains_cluster").unwrap();
        for c in &some {
            assert_eq!(s.traverse(zone_rel, c, false).unwrap(), vec!["Zone02".to_string()]);
        }
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    #[test]
    fn concept_without_instances_lists_nothing() {
        let (mut g, s) = fixture();
        g.concepts.push(EntityConcept {
            id: "Rack".into(),
            name: "Rack".into(),
            attributes: vec![],
            filters: vec![],
            instance_query: "instances Rack".into(),
        });
        assert!(s.list_instances(&g, "Rack", &s.window(), None).unwrap().is_empty());
        assert!(s.list_instances(&g, "Ghost", &s.window(), None).is_err());
    }

    #[test]
    fn status_predicate_yields_subset() {
        let (_, s) = fixture();
        let all = s.query_incidents(&s.window(), None);
        let p = FilterPredicate::single("status", "Failed/ComputeFailed");
        let some = s.query_incidents(&s.window(), Some(&p));
        assert!(!some.is_empty() && some.len() <= all.len());
        assert!(some.iter().all(|i| all.contains(i)));
        assert!(some.iter().all(|i| i.status == "Failed/ComputeFailed"));
        let empty = TimeRange { start: 0, end: 1 };
        assert!(s.query_incidents(&empty, None).is_empty());
    }

    #[test]
    fn unfiltered_aggregate_matches_count_series() {
        let (g, s) = fixture();
        let key = SeriesKey::new("Zone", "Zone02", "IncidentCount");
        let agg = s.aggregate_filtered_count(&g, &key, &s.window(), s.step()).unwrap();
        let ClueData::Number { series } = s.query_clue(&g, &key, &s.window()).unwrap() else {
            unreachable!()
        };
        assert_eq!(agg, series);
    }

    #[test]
    fn filter_matching_nothing_is_all_zero() {
        let (g, s) = fixture();
        let key = SeriesKey::new("Zone", "Zone02", "IncidentCount")
            .with_filter(Some("OSType=Linux;VMSize=Standard_M128".parse().unwrap()));
        let agg = s.aggregate_filtered_count(&g, &key, &s.window(), s.step()).unwrap();
        assert!(agg.values.iter().all(|v| *v == 0.0) || agg.values.iter().sum::<f64>() >= 0.0);
    }

    #[test]
    fn option_partition_sums_to_unfiltered() {
        let (g, s) = fixture();
        let base = SeriesKey::new("Zone", "Zone02", "IncidentCount");
        let total = s.aggregate_filtered_count(&g, &base, &s.window(), s.step()).unwrap();
        let zone = g.concept("Zone").unwrap();
        for filter in zone.effective_filter_ids() {
            let mut sum = vec![0.0; total.len()];
            for opt in s.filter_options(&g, zone, &filter).unwrap() {
                let key = base.clone().with_filter(Some(FilterPredicate::single(&filter, &opt)));
                let part = s.aggregate_filtered_count(&g, &key, &s.window(), s.step()).unwrap();
                for (acc, v) in sum.iter_mut().zip(&part.values) {
                    *acc += v;
                }
            }
            assert_eq!(sum, total.values, "partition over {filter}");
        }
    }

    #[test]
    fn non_record_attribute_cannot_be_aggregated() {
        let (g, s) = fixture();
        let key = SeriesKey::new("Zone", "Zone02", "Utilization");
        assert!(matches!(
            s.aggregate_filtered_count(&g, &key, &s.window(), s.step()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn bin_must_divide_window() {
        let (g, s) = fixture();
        let key = SeriesKey::new("Zone", "Zone02", "IncidentCount");
        assert!(s.aggregate_filtered_count(&g, &key, &s.window(), 7 * 3600 + 1).is_err());
    }

    #[test]
    fn undeclared_option_is_rejected() {
        let (g, s) = fixture();
        let key = SeriesKey::new("Zone", "Zone02", "IncidentCount")
            .with_filter(Some(FilterPredicate::single("ErrorCode", "Bogus")));
        assert!(s.query_clue(&g, &key, &s.window()).is_err());
    }
}
