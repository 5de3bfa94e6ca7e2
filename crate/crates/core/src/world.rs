//! Seeded random graphs with matching stores, for property tests and
//! budget measurements.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clue::TimeRange;
use crate::error::{Error, Result};
use crate::graph::{AttributeDef, DataKind, EntityConcept, FilterDef, Hierarchy, KnowledgeGraph, RelationDef};
use crate::store::{EventInterval, EventSequenceData, RecordTable, TelemetryStore, TimeSeriesData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub max_concepts: usize,
    pub max_attributes: usize,
    /// Children per parent instance, and instances of each root concept.
    pub max_fanout: usize,
    pub max_lateral: usize,
    /// Bounds on the number of (instance, attribute) clues.
    pub min_clues: usize,
    pub max_clues: usize,
    pub samples: usize,
    pub step: i64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            max_concepts: 6,
            max_attributes: 3,
            max_fanout: 3,
            max_lateral: 2,
            min_clues: 0,
            max_clues: 40,
            samples: 120,
            step: 60,
        }
    }
}

impl WorldSpec {
    /// A wide world with between `clues` and 1.5 × `clues` candidate clues.
    pub fn large(clues: usize) -> Self {
        Self {
            max_concepts: 6,
            max_attributes: 5,
            max_fanout: 6,
            max_lateral: 3,
            min_clues: clues,
            max_clues: clues + clues / 2,
            samples: 240,
            step: 60,
        }
    }
}

pub const WORLD_START: i64 = 1_000_000;

/// A random concept graph: a containment forest plus a few lateral
/// relations. Every attribute is a series or event sequence named after its
/// key.
pub fn random_graph(rng: &mut impl Rng, spec: &WorldSpec) -> KnowledgeGraph {
    let n = rng.random_range(2..=spec.max_concepts.max(2));
    let mut concepts = Vec::new();
    let mut relations = Vec::new();
    for i in 0..n {
        let id = format!("C{i}");
        let attrs = rng.random_range(1..=spec.max_attributes.max(1));
        let attributes = (0..attrs)
            .map(|a| {
                let events = rng.random_bool(0.2);
                AttributeDef {
                    id: format!("A{a}"),
                    name: format!("Attribute {a}"),
                    kind: if events { DataKind::String } else { DataKind::Number },
                    query_template: format!(
                        "{} {id}/{{instance}}/A{a} during {{t_start}}..{{t_end}}",
                        if events { "events" } else { "series" }
                    ),
                    primary_kpi: a == 0,
                }
            })
            .collect();
        let filters = if rng.random_bool(0.3) {
            vec![FilterDef {
                id: "Mode".into(),
                name: "Mode".into(),
                options: vec!["on".into(), "off".into()],
            }]
        } else {
            Vec::new()
        };
        concepts.push(EntityConcept {
            id: id.clone(),
            name: format!("Concept {i}"),
            attributes,
            filters,
            instance_query: format!("instances {id}"),
        });
        if i > 0 && rng.random_bool(0.75) {
            let parent = rng.random_range(0..i);
            let rid = format!("c{parent}_contains_c{i}");
            relations.push(RelationDef {
                id: rid.clone(),
                source: format!("C{parent}"),
                target: id,
                semantic: "contains".into(),
                hierarchy: Hierarchy::Contains,
                traversal_query: format!("links {rid}"),
            });
        }
    }
    for l in 0..rng.random_range(0..=spec.max_lateral) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let rid = format!("c{a}_near_c{b}_{l}");
        relations.push(RelationDef {
            id: rid.clone(),
            source: format!("C{a}"),
            target: format!("C{b}"),
            semantic: "is near".into(),
            hierarchy: Hierarchy::Lateral,
            traversal_query: format!("links {rid}"),
        });
    }
    KnowledgeGraph { concepts, relations }.canonical()
}

fn step_signal(rng: &mut ChaCha8Rng, samples: usize) -> Vec<f64> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut level: f64 = rng.random_range(-5.0..5.0);
    let mut cuts: Vec<usize> = (0..rng.random_range(0..=3))
        .map(|_| rng.random_range(10..samples - 10))
        .collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        if cuts.contains(&i) {
            level += if rng.random_bool(0.5) { 6.0 } else { -6.0 };
        }
        out.push(((level + noise.sample(rng)) * 1000.0).round() / 1000.0);
    }
    out
}

fn label_sequence(rng: &mut ChaCha8Rng, start: i64, end: i64, step: i64) -> EventSequenceData {
    let mut cuts: Vec<i64> = (0..rng.random_range(0..=2))
        .map(|_| start + step * rng.random_range(5..(end - start) / step - 5))
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut bounds = vec![start];
    bounds.extend(cuts);
    bounds.push(end);
    let intervals = bounds
        .windows(2)
        .enumerate()
        .map(|(i, w)| EventInterval {
            start: w[0],
            end: w[1],
            label: format!("v{i}"),
        })
        .collect();
    EventSequenceData::new(intervals).expect("ordered intervals")
}

/// A random graph and a store populated to match it. Retries with fresh
/// draws until the clue count fits the spec's bounds.
pub fn random_world(seed: u64, spec: &WorldSpec) -> Result<(KnowledgeGraph, TelemetryStore)> {
    if spec.samples < 30 || spec.step <= 0 {
        return Err(Error::invalid("worlds need at least 30 samples and a positive step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let graph = random_graph(&mut rng, spec);
        if let Some(world) = populate(&mut rng, graph, spec)? {
            return Ok(world);
        }
    }
    Err(Error::invalid("no world fits the clue bound"))
}

fn populate(rng: &mut ChaCha8Rng, graph: KnowledgeGraph, spec: &WorldSpec) -> Result<Option<(KnowledgeGraph, TelemetryStore)>> {
    let mut instances: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut links: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    let order = graph
        .hierarchy_order()
        .ok_or_else(|| Error::Internal("random graph has a containment cycle".into()))?;
    let mut counter = 0usize;
    for cid in &order {
        let parent_rel = graph
            .relations
            .iter()
            .find(|r| r.hierarchy == Hierarchy::Contains && r.target == *cid);
        let mut mine = Vec::new();
        let mut fresh = |mine: &mut Vec<String>| {
            counter += 1;
            let id = format!("{cid}I{counter:03}");
            mine.push(id.clone());
            id
        };
        match parent_rel {
            Some(rel) => {
                let parents = instances.get(&rel.source).cloned().unwrap_or_default();
                for p in parents {
                    for _ in 0..rng.random_range(1..=spec.max_fanout.max(1)) {
                        let child = fresh(&mut mine);
                        links.entry(rel.id.clone()).or_default().push((p.clone(), child));
                    }
                }
            }
            None => {
                for _ in 0..rng.random_range(1..=spec.max_fanout.max(1)) {
                    fresh(&mut mine);
                }
            }
        }
        instances.insert(cid.clone(), mine);
    }
    let clues: usize = graph
        .concepts
        .iter()
        .map(|c| c.attributes.len() * instances[&c.id].len())
        .sum();
    if clues < spec.min_clues || clues > spec.max_clues {
        return Ok(None);
    }
    for rel in graph.relations.iter().filter(|r| r.hierarchy == Hierarchy::Lateral) {
        let table = links.entry(rel.id.clone()).or_default();
        for s in &instances[&rel.source] {
            for t in &instances[&rel.target] {
                if s != t && rng.random_bool(0.4) {
                    table.push((s.clone(), t.clone()));
                }
            }
        }
    }

    let start = WORLD_START;
    let end = start + spec.step * spec.samples as i64;
    let timestamps: Vec<i64> = (0..spec.samples as i64).map(|i| start + i * spec.step).collect();
    let mut series = BTreeMap::new();
    let mut events = BTreeMap::new();
    for c in &graph.concepts {
        for inst in &instances[&c.id] {
            for a in &c.attributes {
                let key = format!("{}/{inst}/{}", c.id, a.id);
                if a.kind == DataKind::String {
                    events.insert(key, label_sequence(rng, start, end, spec.step));
                } else {
                    series.insert(key, TimeSeriesData::new(timestamps.clone(), step_signal(rng, spec.samples))?);
                }
            }
        }
    }
    let records = RecordTable {
        scope_fields: Vec::new(),
        filter_fields: Vec::new(),
        rows: Vec::new(),
    };
    let store = TelemetryStore::from_parts(
        "random-world",
        TimeRange::new(start, end)?,
        spec.step,
        instances,
        links,
        series,
        events,
        Vec::new(),
        records,
        None,
    )?;
    Ok(Some((graph, store)))
}

/// Picks a seeded (concept, instance, attribute) from the world.
pub fn pick_key(seed: u64, graph: &KnowledgeGraph, store: &TelemetryStore) -> crate::clue::SeriesKey {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let concept = graph.concepts.choose(&mut rng).expect("non-empty graph");
    let instance = store.manifest().instances[&concept.id]
        .choose(&mut rng)
        .expect("every concept has instances");
    let attribute = concept.attributes.choose(&mut rng).expect("every concept has attributes");
    crate::clue::SeriesKey::new(&concept.id, instance, &attribute.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_graph;

    #[test]
    fn worlds_are_valid_and_bounded() {
        for seed in 0..20 {
            let spec = WorldSpec::default();
            let (g, s) = random_world(seed, &spec).unwrap();
            let report = validate_graph(&g);
            assert!(report.is_valid(), "{:?}", report.findings);
            let mut clues = 0;
            for c in &g.concepts {
                for inst in &s.manifest().instances[&c.id] {
                    for a in &c.attributes {
                        let key = crate::clue::SeriesKey::new(&c.id, inst, &a.id);
                        s.query_clue(&g, &key, &s.window()).unwrap();
                        clues += 1;
                    }
                }
            }
            assert!(clues <= spec.max_clues);
        }
    }

    #[test]
    fn same_seed_same_world() {
        let (g1, s1) = random_world(9, &WorldSpec::default()).unwrap();
        let (g2, s2) = random_world(9, &WorldSpec::default()).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(s1.manifest(), s2.manifest());
    }
}
