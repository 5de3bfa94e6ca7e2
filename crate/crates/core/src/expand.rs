//! The expanding model: candidate clues in five hypothesis directions, ranked
//! by relevance to a baseline clue.
//!
//! Directional search is hop-by-hop. Entities whose clues enter the running
//! top-k are expanded first; other reached entities are deferred and
//! expanded once the promising ones are exhausted, so an unlimited budget
//! covers every entity reachable in the direction. `stop_on_stall` ends the
//! search instead as soon as a hop promotes nothing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::changepoint::{ChangePointCache, DetectorConfig};
use crate::clue::{Clue, SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::graph::{GraphDirection, Hierarchy, KnowledgeGraph, RelationDef};
use crate::relevance::{relevance, sort_ranked};
use crate::store::TelemetryStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    In,
}

impl Direction {
    pub const ALL: [Direction; 5] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
        Direction::In,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::In => "in",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown direction `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityRef {
    pub concept: String,
    pub instance: String,
}

impl EntityRef {
    pub fn new(concept: &str, instance: &str) -> Self {
        Self {
            concept: concept.to_string(),
            instance: instance.to_string(),
        }
    }

    pub fn of(key: &SeriesKey) -> Self {
        Self::new(&key.concept, &key.instance)
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.concept, self.instance)
    }
}

/// One relation traversal. `forward` is true when walking source→target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathHop {
    pub relation: String,
    pub from: EntityRef,
    pub to: EntityRef,
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionEntry {
    pub clue: Clue,
    pub score: f64,
    pub path: Vec<PathHop>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionStats {
    pub candidates_scored: usize,
    pub hops: usize,
    pub elapsed_ms: f64,
    /// Slowest single candidate scoring.
    pub max_scoring_ms: f64,
    /// Lowest score in the running top-k after each scoring, once full.
    #[serde(skip)]
    pub floor_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    pub direction: Direction,
    pub entries: Vec<ExpansionEntry>,
    pub visited: Vec<EntityRef>,
    pub truncated_by_budget: bool,
    pub stats: ExpansionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpandConfig {
    pub k: usize,
    /// Per-direction wall-clock budget; `None` is unlimited.
    pub budget_ms: Option<u64>,
    /// Left expansion ranges over every instance of the concept instead of
    /// those sharing a parent.
    pub global_siblings: bool,
    pub stop_on_stall: bool,
    pub detector: DetectorConfig,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        Self {
            k: 5,
            budget_ms: Some(2000),
            global_siblings: false,
            stop_on_stall: false,
            detector: DetectorConfig::default(),
        }
    }
}

struct Reached {
    entity: EntityRef,
    path: Vec<PathHop>,
}

/// Expansion over one store and graph with a shared change-point cache.
pub struct Expander<'a> {
    pub store: &'a TelemetryStore,
    pub graph: &'a KnowledgeGraph,
    pub cache: &'a ChangePointCache,
    pub config: ExpandConfig,
}

struct Search<'s> {
    baseline: Vec<f64>,
    window: TimeRange,
    n: usize,
    k: usize,
    deadline: Option<Instant>,
    exclude: &'s BTreeSet<SeriesKey>,
    top: Vec<(String, f64)>,
    entries: BTreeMap<String, ExpansionEntry>,
    stats: ExpansionStats,
    truncated: bool,
}

impl Search<'_> {
    fn out_of_time(&mut self) -> bool {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.truncated = true;
        }
        self.truncated
    }

    /// Inserts a scored candidate into the running top-k; returns whether it
    /// was kept.
    fn offer(&mut self, entry: ExpansionEntry) -> bool {
        let id = entry.clue.id();
        self.top.push((id.clone(), entry.score));
        sort_ranked(&mut self.top);
        let kept = self.top.iter().take(self.k).any(|(i, _)| *i == id);
        if self.top.len() > self.k {
            if let Some((dropped, _)) = self.top.pop() {
                self.entries.remove(&dropped);
            }
        }
        if kept {
            self.entries.insert(id, entry);
        }
        if self.top.len() == self.k {
            self.stats.floor_trace.push(self.top[self.k - 1].1);
        }
        kept
    }
}

impl<'a> Expander<'a> {
    pub fn new(store: &'a TelemetryStore, graph: &'a KnowledgeGraph, cache: &'a ChangePointCache, config: ExpandConfig) -> Self {
        Self { store, graph, cache, config }
    }

    fn offsets(&self, key: &SeriesKey, window: &TimeRange) -> Result<Vec<f64>> {
        let cp = self.cache.changepoints(self.store, self.graph, key, window, &self.config.detector)?;
        Ok(cp.offsets(window.start, self.store.step()))
    }

    /// Scores the candidates of one entity; returns whether any entered the
    /// top-k. Stops early when the budget runs out.
    fn score_entity(&self, search: &mut Search<'_>, origin: &SeriesKey, reached: &Reached, same_attribute: bool) -> Result<bool> {
        let concept = self.graph.require_concept(&reached.entity.concept)?;
        let mut promoted = false;
        for attr in &concept.attributes {
            if same_attribute && attr.id != origin.attribute {
                continue;
            }
            let key = SeriesKey::new(&concept.id, &reached.entity.instance, &attr.id);
            if key == origin.unfiltered() || *origin == key || search.exclude.contains(&key) {
                continue;
            }
            if search.out_of_time() {
                return Ok(promoted);
            }
            let started = Instant::now();
            let cp = match self.offsets(&key, &search.window) {
                Ok(cp) => cp,
                Err(Error::NotFound(_)) => continue,
                Err(e) => return Err(e),
            };
            let score = relevance(&search.baseline, &cp, search.n);
            search.stats.candidates_scored += 1;
            let ms = started.elapsed().as_secs_f64() * 1000.0;
            search.stats.max_scoring_ms = search.stats.max_scoring_ms.max(ms);
            promoted |= search.offer(ExpansionEntry {
                clue: Clue::new(key, search.window),
                score,
                path: reached.path.clone(),
            });
        }
        Ok(promoted)
    }

    /// Entities one hop from `from` in `direction`, ordered by relation id
    /// then instance id.
    fn step(&self, from: &Reached, direction: Direction) -> Result<Vec<Reached>> {
        let e = &from.entity;
        let mut out = Vec::new();
        let extend = |rel: &RelationDef, to_concept: &str, forward: bool, out: &mut Vec<Reached>| -> Result<()> {
            for inst in self.store.traverse(rel, &e.instance, forward)? {
                let to = EntityRef::new(to_concept, &inst);
                let mut path = from.path.clone();
                path.push(PathHop {
                    relation: rel.id.clone(),
                    from: e.clone(),
                    to: to.clone(),
                    forward,
                });
                out.push(Reached { entity: to, path });
            }
            Ok(())
        };
        match direction {
            Direction::Up => {
                for (rel, c) in self.graph.neighbors(&e.concept, GraphDirection::Up)? {
                    extend(rel, &c.id, false, &mut out)?;
                }
            }
            Direction::Down => {
                for (rel, c) in self.graph.neighbors(&e.concept, GraphDirection::Down)? {
                    extend(rel, &c.id, true, &mut out)?;
                }
            }
            Direction::Right => {
                for (rel, _) in self.graph.neighbors(&e.concept, GraphDirection::Right)? {
                    if rel.source == e.concept {
                        extend(rel, &rel.target, true, &mut out)?;
                    }
                    if rel.target == e.concept {
                        extend(rel, &rel.source, false, &mut out)?;
                    }
                }
            }
            Direction::Left => {
                if self.config.global_siblings {
                    let all = self.store.list_instances(self.graph, &e.concept, &self.store.window(), None)?;
                    for inst in all.into_iter().filter(|i| *i != e.instance) {
                        out.push(Reached {
                            entity: EntityRef::new(&e.concept, &inst),
                            path: from.path.clone(),
                        });
                    }
                } else {
                    for (rel, parent) in self.graph.neighbors(&e.concept, GraphDirection::Up)? {
                        for p in self.store.traverse(rel, &e.instance, false)? {
                            let parent_ref = EntityRef::new(&parent.id, &p);
                            for sib in self.store.traverse(rel, &p, true)? {
                                if sib == e.instance {
                                    continue;
                                }
                                let to = EntityRef::new(&e.concept, &sib);
                                let mut path = from.path.clone();
                                path.push(PathHop {
                                    relation: rel.id.clone(),
                                    from: e.clone(),
                                    to: parent_ref.clone(),
                                    forward: false,
                                });
                                path.push(PathHop {
                                    relation: rel.id.clone(),
                                    from: parent_ref.clone(),
                                    to: to.clone(),
                                    forward: true,
                                });
                                out.push(Reached { entity: to, path });
                            }
                        }
                    }
                }
            }
            Direction::In => {}
        }
        Ok(out)
    }

    /// Ranked candidates for `clue` in one direction over `window`.
    /// `exclude` lists keys never to recommend (typically clues already on
    /// the board).
    pub fn expand(&self, clue: &Clue, window: &TimeRange, direction: Direction, exclude: &BTreeSet<SeriesKey>) -> Result<ExpansionResult> {
        if self.config.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let started = Instant::now();
        self.store.resolve(self.graph, &clue.key)?;
        let baseline = self.offsets(&clue.key, window)?;
        let mut search = Search {
            baseline,
            window: *window,
            n: window.samples(self.store.step()),
            k: self.config.k,
            deadline: self.config.budget_ms.map(|ms| started + Duration::from_millis(ms)),
            exclude,
            top: Vec::new(),
            entries: BTreeMap::new(),
            stats: ExpansionStats::default(),
            truncated: false,
        };
        let origin = Reached {
            entity: EntityRef::of(&clue.key),
            path: Vec::new(),
        };
        let mut visited: BTreeSet<EntityRef> = BTreeSet::from([origin.entity.clone()]);
        let mut order = Vec::new();

        if direction == Direction::In {
            self.score_entity(&mut search, &clue.key, &origin, false)?;
        } else {
            let same_attribute = direction == Direction::Left;
            let mut frontier = vec![origin];
            let mut deferred: VecDeque<Reached> = VecDeque::new();
            'search: loop {
                let mut promoted = Vec::new();
                search.stats.hops += 1;
                for from in &frontier {
                    for reached in self.step(from, direction)? {
                        if !visited.insert(reached.entity.clone()) {
                            continue;
                        }
                        order.push(reached.entity.clone());
                        let kept = self.score_entity(&mut search, &clue.key, &reached, same_attribute)?;
                        if search.truncated {
                            break 'search;
                        }
                        if kept {
                            promoted.push(reached);
                        } else {
                            deferred.push_back(reached);
                        }
                    }
                }
                if promoted.is_empty() {
                    if self.config.stop_on_stall || deferred.is_empty() {
                        break;
                    }
                    frontier = deferred.drain(..).collect();
                } else {
                    frontier = promoted;
                }
            }
        }

        let mut entries: Vec<ExpansionEntry> = search
            .top
            .iter()
            .filter_map(|(id, _)| search.entries.remove(id))
            .collect();
        entries.truncate(self.config.k);
        search.stats.elapsed_ms = started.elapsed().as_secs_f64() * 1000.0;
        Ok(ExpansionResult {
            direction,
            entries,
            visited: order,
            truncated_by_budget: search.truncated,
            stats: search.stats,
        })
    }

    /// All five directions, each with its own budget, run concurrently.
    pub fn expand_all(&self, clue: &Clue, window: &TimeRange, exclude: &BTreeSet<SeriesKey>) -> Result<Vec<ExpansionResult>> {
        std::thread::scope(|scope| {
            let handles: Vec<_> = Direction::ALL
                .iter()
                .map(|d| scope.spawn(move || self.expand(clue, window, *d, exclude)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("expansion thread panicked".into()))))
                .collect()
        })
    }
}

/// Same-entity attributes ranked against `clue`.
pub fn expand_inward(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    clue: &Clue,
    window: &TimeRange,
    config: &ExpandConfig,
    exclude: &BTreeSet<SeriesKey>,
) -> Result<ExpansionResult> {
    let cache = ChangePointCache::new();
    Expander::new(store, graph, &cache, config.clone()).expand(clue, window, Direction::In, exclude)
}

/// Multi-hop expansion in one of up/down/left/right.
pub fn expand_directional(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    clue: &Clue,
    direction: Direction,
    window: &TimeRange,
    config: &ExpandConfig,
) -> Result<ExpansionResult> {
    if direction == Direction::In {
        return Err(Error::invalid("use expand_inward for the inward direction"));
    }
    let cache = ChangePointCache::new();
    Expander::new(store, graph, &cache, config.clone()).expand(clue, window, direction, &BTreeSet::new())
}

/// The five directional results for `clue`.
pub fn expand_all(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    clue: &Clue,
    window: &TimeRange,
    config: &ExpandConfig,
) -> Result<Vec<ExpansionResult>> {
    let cache = ChangePointCache::new();
    Expander::new(store, graph, &cache, config.clone()).expand_all(clue, window, &BTreeSet::new())
}

/// Whether a relation may appear on a path for `direction`.
pub fn hop_is_legal(graph: &KnowledgeGraph, direction: Direction, hop: &PathHop, index: usize) -> bool {
    let Some(rel) = graph.relation(&hop.relation) else {
        return false;
    };
    match direction {
        Direction::Up => rel.hierarchy == Hierarchy::Contains && !hop.forward,
        Direction::Down => rel.hierarchy == Hierarchy::Contains && hop.forward,
        Direction::Right => rel.hierarchy == Hierarchy::Lateral,
        // Sibling paths climb to the shared parent and come back down.
        Direction::Left => rel.hierarchy == Hierarchy::Contains && hop.forward == (index % 2 == 1),
        Direction::In => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_store, use_case_graph, ScenarioSpec};

    fn setup() -> (KnowledgeGraph, TelemetryStore) {
        (use_case_graph(), generate_store(1, &ScenarioSpec::default()).unwrap())
    }

    fn unlimited() -> ExpandConfig {
        ExpandConfig { budget_ms: None, ..Default::default() }
    }

    fn anomaly(store: &TelemetryStore) -> Clue {
        let gt = store.ground_truth().unwrap();
        let w = gt.injection_window;
        let step = store.step();
        let window = TimeRange::new(w.start - 72 * step, (w.end + 24 * step).min(store.window().end)).unwrap();
        Clue::new(gt.anomaly.clone(), window)
    }

    #[test]
    fn up_from_cluster_reaches_its_zone() {
        let (g, s) = setup();
        let gt = s.ground_truth().unwrap();
        let clue = anomaly(&s);
        let start = Clue::new(SeriesKey::new("Cluster", &gt.cause.key.instance, "UnusedReservedVMs"), clue.window);
        let r = expand_directional(&s, &g, &start, Direction::Up, &clue.window, &unlimited()).unwrap();
        assert!(!r.entries.is_empty());
        assert_eq!(r.entries.len(), 5);
        let zone = gt.anomaly.instance.clone();
        assert!(r.entries.iter().any(|e| e.clue.key.concept == "Zone" && e.clue.key.instance == zone));
        for e in &r.entries {
            for (i, hop) in e.path.iter().enumerate() {
                assert!(hop_is_legal(&g, Direction::Up, hop, i));
            }
        }
    }

    #[test]
    fn up_from_root_is_empty() {
        let (g, s) = setup();
        let clue = Clue::new(SeriesKey::new("Area", "Area01", "IncidentCount"), s.window());
        let r = expand_directional(&s, &g, &clue, Direction::Up, &s.window(), &unlimited()).unwrap();
        assert!(r.entries.is_empty());
    }

    #[test]
    fn left_from_only_child_is_empty() {
        let (g, _) = setup();
        let spec = ScenarioSpec { clusters_per_zone: 1, ..Default::default() };
        let s = generate_store(4, &spec).unwrap();
        let clue = Clue::new(SeriesKey::new("Cluster", "Cluster01", "UnusedReservedVMs"), s.window());
        let r = expand_directional(&s, &g, &clue, Direction::Left, &s.window(), &unlimited()).unwrap();
        assert!(r.entries.is_empty());
    }

    #[test]
    fn left_keeps_the_attribute_and_parent() {
        let (g, s) = setup();
        let clue = anomaly(&s);
        let r = expand_directional(&s, &g, &clue, Direction::Left, &clue.window, &unlimited()).unwrap();
        let zone_rel = g.relation("area_contains_zone").unwrap();
        let parent = s.traverse(zone_rel, &clue.key.instance, false).unwrap();
        for e in &r.entries {
            assert_eq!(e.clue.key.attribute, clue.key.attribute);
            assert_ne!(e.clue.key.instance, clue.key.instance);
            assert_eq!(s.traverse(zone_rel, &e.clue.key.instance, false).unwrap(), parent);
        }
        let global = ExpandConfig { global_siblings: true, k: 50, ..unlimited() };
        let all = expand_directional(&s, &g, &clue, Direction::Left, &clue.window, &global).unwrap();
        assert_eq!(all.entries.len(), s.manifest().instances["Zone"].len() - 1);
    }

    #[test]
    fn inward_ranks_the_cascade_attributes() {
        let (g, s) = setup();
        let clue = anomaly(&s);
        let r = expand_inward(&s, &g, &clue, &clue.window, &unlimited(), &BTreeSet::new()).unwrap();
        let top: Vec<&str> = r.entries.iter().take(3).map(|e| e.clue.key.attribute.as_str()).collect();
        for a in ["UnusedReservedVMs", "ErrorCodeCount", "AllocableNodes"] {
            assert!(top.contains(&a), "{a} missing from {top:?}");
        }
        let excluded = BTreeSet::from([SeriesKey::new("Zone", &clue.key.instance, "AllocableNodes")]);
        let r = expand_inward(&s, &g, &clue, &clue.window, &unlimited(), &excluded).unwrap();
        assert!(r.entries.iter().all(|e| e.clue.key.attribute != "AllocableNodes"));
    }

    #[test]
    fn k_beyond_attribute_count_returns_all() {
        let (g, s) = setup();
        let clue = anomaly(&s);
        let cfg = ExpandConfig { k: 50, ..unlimited() };
        let r = expand_inward(&s, &g, &clue, &clue.window, &cfg, &BTreeSet::new()).unwrap();
        assert_eq!(r.entries.len(), g.concept("Zone").unwrap().attributes.len() - 1);
        assert!(r.entries.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn expand_all_is_deterministic_and_finds_the_cause() {
        let (g, s) = setup();
        let clue = anomaly(&s);
        let a = expand_all(&s, &g, &clue, &clue.window, &unlimited()).unwrap();
        let b = expand_all(&s, &g, &clue, &clue.window, &unlimited()).unwrap();
        let strip = |v: &[ExpansionResult]| v.iter().map(|r| (r.entries.clone(), r.visited.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let cause = &s.ground_truth().unwrap().cause.key;
        assert!(a.iter().any(|r| r.entries.iter().any(|e| e.clue.key == *cause)));
    }

    #[test]
    fn floor_never_decreases() {
        let (g, s) = setup();
        let clue = anomaly(&s);
        for d in [Direction::Down, Direction::Right] {
            let r = expand_directional(&s, &g, &clue, d, &clue.window, &unlimited()).unwrap();
            assert!(r.stats.floor_trace.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn matches_exhaustive_ranking_on_random_worlds() {
        use crate::oracle::expansion_top_k;
        use crate::world::{pick_key, random_world, WorldSpec};
        for seed in 0..20 {
            let (g, s) = random_world(seed, &WorldSpec::default()).unwrap();
            let window = s.window();
            for global in [false, true] {
                let cfg = ExpandConfig { global_siblings: global, ..unlimited() };
                let cache = ChangePointCache::new();
                let ex = Expander::new(&s, &g, &cache, cfg.clone());
                for probe in 0..3 {
                    let key = pick_key(seed * 7 + probe, &g, &s);
                    let clue = Clue::new(key.clone(), window);
                    for d in Direction::ALL {
                        let got = ex.expand(&clue, &window, d, &BTreeSet::new()).unwrap();
                        let want = expansion_top_k(&s, &g, &key, &window, d, 5, &cfg.detector, global).unwrap();
                        let got: Vec<(String, f64)> = got.entries.iter().map(|e| (e.clue.id(), e.score)).collect();
                        assert_eq!(got, want, "seed {seed} {key} {d} global={global}");
                    }
                }
            }
        }
    }

    #[test]
    fn stall_stop_visits_no_more_than_full_search() {
        let (g, s) = setup();
        let clue = anomaly(&s);
        let full = expand_directional(&s, &g, &clue, Direction::Down, &clue.window, &unlimited()).unwrap();
        let cfg = ExpandConfig { stop_on_stall: true, ..unlimited() };
        let stalled = expand_directional(&s, &g, &clue, Direction::Down, &clue.window, &cfg).unwrap();
        assert!(stalled.visited.len() <= full.visited.len());
        assert!(stalled.visited.iter().all(|e| full.visited.contains(e)));
    }

    #[test]
    fn budget_bounds_wall_clock() {
        use crate::world::{pick_key, random_world, WorldSpec};
        let (g, s) = random_world(3, &WorldSpec::large(500)).unwrap();
        let key = pick_key(1, &g, &s);
        let clue = Clue::new(key, s.window());
        let cfg = ExpandConfig { budget_ms: Some(0), ..Default::default() };
        for d in Direction::ALL {
            let r = expand_directional(&s, &g, &clue, d, &s.window(), &cfg).unwrap_or_else(|_| {
                expand_inward(&s, &g, &clue, &s.window(), &cfg, &BTreeSet::new()).unwrap()
            });
            assert_eq!(r.stats.candidates_scored, 0);
        }
    }

    #[test]
    fn unknown_clue_is_not_found() {
        let (g, s) = setup();
        let clue = Clue::new(SeriesKey::new("Zone", "Nowhere", "IncidentCount"), s.window());
        assert!(matches!(
            expand_directional(&s, &g, &clue, Direction::Up, &s.window(), &unlimited()),
            Err(Error::NotFound(_))
        ));
    }
}
