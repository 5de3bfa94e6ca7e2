//! Oracle-backed checks shared by the acceptance suite and `clueboard
//! verify`. Every check compares the engine against an independent
//! reference from [`crate::oracle`] or against generator ground truth.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::board::{
    card_boxes, export_session, import_session, layout_board, random_session, render_collection_note,
    render_filter_note, BoardEnv,
};
use crate::changepoint::{detect_indices, standardized, ChangePointCache, DetectorConfig};
use crate::clue::{Clue, FilterClause, FilterPredicate, TimeRange};
use crate::error::Result;
use crate::expand::{Direction, EntityRef, ExpandConfig, Expander, PathHop};
use crate::graph::{parse_graph, serialize_graph, KnowledgeGraph};
use crate::monitor::{detect_anomalies, kpi_keys, MonitorConfig};
use crate::oracle;
use crate::refine::{refine_clue, search_space, CountSpace, Objective, RefineConfig, SearchOutcome, Selection, TrendMeasure};
use crate::relevance;
use crate::scenario::{generate_store, use_case_graph, ScenarioSpec};
use crate::store::TelemetryStore;
use crate::world::{pick_key, random_graph, random_world, WorldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: f64,
}

impl Check {
    fn new(name: &str, started: Instant, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
            elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
        }
    }

    fn failed(name: &str, started: Instant, e: impl std::fmt::Display) -> Self {
        Self::new(name, started, false, format!("error: {e}"))
    }

    /// One line: `PASS name (detail)`.
    pub fn line(&self) -> String {
        format!(
            "{} {} ({}; {:.0} ms)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed_ms
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn finish(name: &str, started: Instant, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check::new(name, started, passed, detail),
        Err(e) => Check::failed(name, started, e),
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let len = rng.random_range(1..=10);
    let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(0..n) as f64).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Engine relevance against the brute-force definition on random pairs.
pub fn relevance_oracle(pairs: usize, n: usize, seed: u64) -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = random_points(&mut rng, n);
        let b = random_points(&mut rng, n);
        worst = worst.max((relevance::relevance(&a, &b, n) - oracle::relevance(&a, &b, n)).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    Check::new(
        "relevance matches brute force",
        started,
        worst <= 1e-9 && secs < 1.0,
        format!("{pairs} pairs, N={n}, max |diff| {worst:.2e}, {secs:.3}s < 1s"),
    )
}

/// Symmetry, identity, bounds and the empty-set convention on generated
/// arrays.
pub fn relevance_invariants(cases: usize, n: usize, seed: u64) -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut broken = Vec::new();
    for i in 0..cases {
        let a = random_points(&mut rng, n);
        let b = random_points(&mut rng, n);
        let r = relevance::relevance(&a, &b, n);
        let ok = r == relevance::relevance(&b, &a, n)
            && (0.0..=1.0).contains(&r)
            && relevance::relevance(&a, &a, n) == 1.0
            && relevance::relevance(&a, &[], n) == 0.0
            && relevance::relevance(&[], &b, n) == 0.0;
        if !ok {
            broken.push(i);
        }
    }
    Check::new(
        "relevance invariants",
        started,
        broken.is_empty(),
        format!("{cases} cases, violations {broken:?}"),
    )
}

/// Seeded step signal: returns values and the injected change indices.
pub fn step_signal(seed: u64, samples: usize, min_ratio: f64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let count = rng.random_range(1..=3);
    let mut points: Vec<usize> = Vec::new();
    while points.len() < count {
        let p = rng.random_range(20..samples - 20);
        if points.iter().all(|q| q.abs_diff(p) >= 25) {
            points.push(p);
        }
    }
    points.sort_unstable();
    let mut level = rng.random_range(-10.0..10.0);
    let mut values = Vec::with_capacity(samples);
    for i in 0..samples {
        if points.contains(&i) {
            let h = rng.random_range(min_ratio..2.0 * min_ratio);
            level += if rng.random_bool(0.5) { h } else { -h };
        }
        values.push(level + noise.sample(&mut rng));
    }
    (values, points)
}

/// On standardized input, as the engine sees it: recall within ±3 samples and the share of runs with a point more than 10
/// samples from every injected change.
pub fn changepoint_recovery(signals: usize, seed: u64) -> Check {
    let started = Instant::now();
    let config = DetectorConfig::default();
    let (mut injected, mut recovered, mut spurious_runs) = (0, 0, 0);
    for i in 0..signals {
        let (values, truth) = step_signal(seed + i as u64, 200, 4.0);
        let found = standardized(&values).map_or_else(Vec::new, |v| detect_indices(&v, &config));
        injected += truth.len();
        recovered += truth.iter().filter(|t| found.iter().any(|f| f.abs_diff(**t) <= 3)).count();
        if found.iter().any(|f| truth.iter().all(|t| f.abs_diff(*t) > 10)) {
            spurious_runs += 1;
        }
    }
    let recall = recovered as f64 / injected as f64;
    let spurious = spurious_runs as f64 / signals as f64;
    let secs = started.elapsed().as_secs_f64();
    Check::new(
        "change points recovered",
        started,
        recall >= 0.95 && spurious <= 0.05 && secs < 10.0,
        format!(
            "recall {recovered}/{injected} = {:.1}% (≥95%), spurious runs {:.1}% (≤5%), {secs:.2}s < 10s",
            recall * 100.0,
            spurious * 100.0
        ),
    )
}

fn unlimited() -> ExpandConfig {
    ExpandConfig {
        budget_ms: None,
        ..ExpandConfig::default()
    }
}

/// Directional top-5 with no budget equals exhaustive enumeration plus
/// ranking, on small random worlds.
pub fn expansion_brute_force(worlds: usize, seed: u64) -> Check {
    let started = Instant::now();
    let outcome = (|| -> Result<(bool, String)> {
        let mut compared = 0;
        let mut mismatches = Vec::new();
        for w in 0..worlds as u64 {
            let (g, s) = random_world(seed + w, &WorldSpec::default())?;
            let window = s.window();
            let cfg = unlimited();
            let cache = ChangePointCache::new();
            let ex = Expander::new(&s, &g, &cache, cfg.clone());
            let key = pick_key(seed + w, &g, &s);
            let clue = Clue::new(key.clone(), window);
            for d in Direction::ALL {
                let got = ex.expand(&clue, &window, d, &BTreeSet::new())?;
                let want = oracle::expansion_top_k(&s, &g, &key, &window, d, cfg.k, &cfg.detector, cfg.global_siblings)?;
                let got: Vec<(String, f64)> = got.entries.iter().map(|e| (e.clue.id(), e.score)).collect();
                compared += 1;
                let same = got.len() == want.len()
                    && got.iter().zip(&want).all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-12);
                if !same {
                    mismatches.push(format!("world {w} {key} {d}"));
                }
            }
        }
        Ok((
            mismatches.is_empty(),
            format!("{compared} directional top-5 lists over {worlds} worlds, {} mismatches {mismatches:?}", mismatches.len()),
        ))
    })();
    finish("expansion equals brute force", started, outcome)
}

/// Wall clock of budgeted expansions on a large world stays within the
/// budget plus the slowest single scoring.
pub fn expansion_budget(clues: usize, budget_ms: u64, seed: u64) -> Check {
    let started = Instant::now();
    let outcome = (|| -> Result<(bool, String)> {
        let (g, s) = random_world(seed, &WorldSpec::large(clues))?;
        let total: usize = g
            .concepts
            .iter()
            .map(|c| c.attributes.len() * s.manifest().instances[&c.id].len())
            .sum();
        let cfg = ExpandConfig {
            budget_ms: Some(budget_ms),
            global_siblings: true,
            ..ExpandConfig::default()
        };
        let mut ok = true;
        let mut parts = Vec::new();
        for probe in 0..3 {
            let key = pick_key(seed + probe, &g, &s);
            let clue = Clue::new(key, s.window());
            for d in Direction::ALL {
                let cache = ChangePointCache::new();
                let ex = Expander::new(&s, &g, &cache, cfg.clone());
                let t0 = Instant::now();
                let r = ex.expand(&clue, &s.window(), d, &BTreeSet::new())?;
                let wall = t0.elapsed().as_secs_f64() * 1000.0;
                let bound = budget_ms as f64 + r.stats.max_scoring_ms;
                if wall > bound {
                    ok = false;
                }
                if r.truncated_by_budget {
                    parts.push(format!("{d}: {wall:.1}ms ≤ {bound:.1}ms, {} scored", r.stats.candidates_scored));
                }
            }
        }
        let truncated = parts.len();
        Ok((
            ok && truncated > 0,
            format!("{total} clues, budget {budget_ms}ms, {truncated} truncated runs: {}", parts.join("; ")),
        ))
    })();
    finish("expansion respects budget", started, outcome)
}

/// A seeded count space with `shape[f]` options per filter, biased so some
/// options trend upward.
pub fn random_space(seed: u64, shape: &[usize], bins: usize) -> Result<CountSpace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let options: Vec<Vec<String>> = shape
        .iter()
        .enumerate()
        .map(|(f, m)| (0..*m).map(|o| format!("f{f}o{o}")).collect())
        .collect();
    let rows: Vec<(Vec<usize>, usize)> = (0..rng.random_range(100..600))
        .map(|_| {
            let t: Vec<usize> = options.iter().map(|o| rng.random_range(0..o.len())).collect();
            let bias = t.iter().sum::<usize>() as f64 / 3.0;
            let u: f64 = rng.random();
            (t, ((u.powf(1.0 / (1.0 + bias))) * bins as f64) as usize)
        })
        .collect();
    CountSpace::new((0..shape.len()).map(|f| format!("F{f}")).collect(), options, bins, rows)
}

fn space_score(outcome: &SearchOutcome) -> Option<f64> {
    match outcome {
        SearchOutcome::Found { trend_score, .. } => Some(*trend_score),
        SearchOutcome::NoFeasibleCombination => None,
    }
}

/// Exact optimum on small spaces and near-optimal results on larger ones.
pub fn refinement_optimality(small: usize, large: usize, seed: u64) -> Check {
    let started = Instant::now();
    let outcome = (|| -> Result<(bool, String)> {
        const SMALL: [&[usize]; 5] = [&[5], &[2, 2], &[3, 2], &[2, 2, 2], &[4]];
        const LARGE: [&[usize]; 5] = [&[8], &[4, 4], &[3, 3, 2], &[5, 3], &[2, 2, 2, 2]];
        let poisson = RefineConfig::default().trend == TrendMeasure::CountZ;
        let mut exact = 0;
        for i in 0..small as u64 {
            let space = random_space(seed + i, SMALL[i as usize % SMALL.len()], 48)?;
            let cfg = RefineConfig { seed: seed + i, ..RefineConfig::default() };
            let mut all = true;
            for (objective, maximize) in [(Objective::Maximize, true), (Objective::Minimize, false)] {
                let got = space_score(&search_space(&space, objective, &cfg)?);
                let want = oracle::refine_optimum(&space, maximize, cfg.min_support, poisson);
                all &= match (got, want) {
                    (Some(a), Some(b)) => (a - b).abs() <= 1e-9,
                    (None, None) => true,
                    _ => false,
                };
            }
            exact += usize::from(all);
        }
        let mut near = 0;
        for i in 0..large as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000 + i);
            let shape = LARGE[rng.random_range(0..LARGE.len())];
            let space = random_space(seed + 1000 + i, shape, 48)?;
            let cfg = RefineConfig { seed: seed + i, ..RefineConfig::default() };
            let got = space_score(&search_space(&space, Objective::Maximize, &cfg)?);
            let want = oracle::refine_optimum(&space, true, cfg.min_support, poisson);
            near += usize::from(match (got, want) {
                (Some(a), Some(b)) => (a - b).abs() <= 0.05 * b.abs(),
                (None, None) => true,
                _ => false,
            });
        }
        let secs = started.elapsed().as_secs_f64();
        Ok((
            exact == small && near as f64 >= 0.9 * large as f64 && secs < 30.0,
            format!("exact {exact}/{small} (all), within 5% {near}/{large} (≥90%), {secs:.2}s < 30s"),
        ))
    })();
    finish("refinement optimality", started, outcome)
}

/// Result of running the investigation on one generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub seed: u64,
    pub alerted: bool,
    /// Direction and 1-based rank of the cause clue, if recommended.
    pub cause: Option<(Direction, usize)>,
    pub refined: Option<String>,
    pub refine_hit: bool,
}

/// Samples brushed before and after the alert.
pub const BRUSH_BEFORE: i64 = 72;
pub const BRUSH_AFTER: i64 = 24;

/// Alert on the anomaly KPI, brush around it, expand in all directions, and
/// refine the anomaly over the injected filter.
pub fn run_scenario(store: &TelemetryStore, graph: &KnowledgeGraph) -> Result<Option<ScenarioRun>> {
    let Some(gt) = store.ground_truth().cloned() else {
        return Ok(None);
    };
    let step = store.step();
    let report = detect_anomalies(store, graph, &kpi_keys(store, graph), &store.window(), &MonitorConfig::default())?;
    let alert = report.alerts.iter().find(|a| a.key == gt.anomaly && a.window.overlaps(&gt.injection_window));
    let mut run = ScenarioRun {
        seed: gt.seed,
        alerted: alert.is_some(),
        cause: None,
        refined: None,
        refine_hit: false,
    };
    let Some(alert) = alert else {
        return Ok(Some(run));
    };
    let brush = TimeRange::new(alert.window.start - BRUSH_BEFORE * step, alert.window.end + BRUSH_AFTER * step)?;
    let window = brush.intersect(&store.window()).unwrap_or(store.window());
    let clue = Clue::new(gt.anomaly.clone(), window);
    let cache = ChangePointCache::new();
    let ex = Expander::new(store, graph, &cache, unlimited());
    for r in ex.expand_all(&clue, &window, &BTreeSet::new())? {
        if let Some(pos) = r.entries.iter().position(|e| e.clue.key == gt.cause.key) {
            if run.cause.is_none_or(|(_, best)| pos + 1 < best) {
                run.cause = Some((r.direction, pos + 1));
            }
        }
    }
    let selection = Selection::from([(gt.injected_filter.clone(), Vec::new())]);
    let refined = refine_clue(store, graph, &cache, &clue, &selection, &[], &window, &RefineConfig::default())?;
    if let Some(w) = refined.increasing.winner() {
        let p = w.predicate.to_string();
        run.refine_hit = p == format!("{}={}", gt.injected_filter, gt.injected_option);
        run.refined = Some(p);
    }
    Ok(Some(run))
}

/// Ground-truth recovery over generated scenarios.
pub fn scenario_ground_truth(seeds: std::ops::Range<u64>) -> Vec<Check> {
    let started = Instant::now();
    let graph = use_case_graph();
    let mut runs = Vec::new();
    for seed in seeds.clone() {
        match generate_store(seed, &ScenarioSpec::default()).and_then(|s| run_scenario(&s, &graph)) {
            Ok(Some(r)) => runs.push(r),
            Ok(None) => {}
            Err(e) => return vec![Check::failed("scenario ground truth", started, e)],
        }
    }
    let n = seeds.end - seeds.start;
    let found = runs.iter().filter(|r| r.cause.is_some()).count();
    let refined = runs.iter().filter(|r| r.refine_hit).count();
    let misses: Vec<u64> = runs.iter().filter(|r| r.cause.is_none()).map(|r| r.seed).collect();
    let wrong: Vec<String> = runs
        .iter()
        .filter(|r| !r.refine_hit)
        .map(|r| format!("{}:{}", r.seed, r.refined.as_deref().unwrap_or("none")))
        .collect();
    vec![
        Check::new(
            "scenario cause in expansion top-5",
            started,
            found as f64 >= 0.8 * n as f64,
            format!("{found}/{n} scenarios (≥80%), missed seeds {misses:?}"),
        ),
        Check::new(
            "scenario refinement isolates injected option",
            started,
            refined as f64 >= 0.8 * n as f64,
            format!("{refined}/{n} scenarios (≥80%), misses {wrong:?}"),
        ),
    ]
}

/// Layout invariants over random sessions.
pub fn layout_properties(env: BoardEnv<'_>, sessions: usize, max_cards: usize, seed: u64) -> Check {
    let started = Instant::now();
    let outcome = (|| -> Result<(bool, String)> {
        let (mut overlaps, mut inversions, mut unstable, mut cards) = (0, 0, 0, 0);
        for i in 0..sessions as u64 {
            let s = random_session(seed + i, env, max_cards, 4 * max_cards)?;
            cards += s.cards.len();
            let boxes: Vec<_> = card_boxes(&s).into_iter().collect();
            for (a, (_, ba)) in boxes.iter().enumerate() {
                overlaps += boxes[a + 1..].iter().filter(|(_, bb)| ba.overlaps(bb)).count();
            }
            let by_id: std::collections::BTreeMap<_, _> = boxes.iter().cloned().collect();
            for l in &s.links {
                if let Some((p, c)) = l.hierarchy() {
                    if by_id[p].y >= by_id[c].y {
                        inversions += 1;
                    }
                }
            }
            let again = crate::json::to_canonical_bytes(&layout_board(&s, &s.meta.layout))?;
            let first = crate::json::to_canonical_bytes(&layout_board(&s, &s.meta.layout))?;
            unstable += usize::from(again != first);
        }
        Ok((
            overlaps == 0 && inversions == 0 && unstable == 0,
            format!("{sessions} sessions, {cards} cards: {overlaps} overlaps, {inversions} parent-below-child, {unstable} unstable"),
        ))
    })();
    finish("layout properties", started, outcome)
}

/// parse∘serialize identity for graphs and import∘export for sessions.
pub fn round_trips(env: BoardEnv<'_>, count: usize, seed: u64) -> Check {
    let started = Instant::now();
    let outcome = (|| -> Result<(bool, String)> {
        let mut failures = Vec::new();
        for i in 0..count as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + i);
            let g = random_graph(&mut rng, &WorldSpec::default());
            let bytes = serialize_graph(&g)?;
            let back = parse_graph(&bytes)?;
            if back != g.canonical() || serialize_graph(&back)? != bytes {
                failures.push(format!("graph {i}"));
            }
            let s = random_session(seed + i, env, 12, 40)?;
            let doc = export_session(&s)?;
            let restored = import_session(&doc, env)?;
            if restored != s || export_session(&restored)? != doc {
                failures.push(format!("session {i}"));
            }
        }
        Ok((
            failures.is_empty(),
            format!("{count} graphs and {count} sessions, failures {failures:?}"),
        ))
    })();
    finish("document round trips", started, outcome)
}

fn hop(relation: &str, from: (&str, &str), to: (&str, &str), forward: bool) -> PathHop {
    PathHop {
        relation: relation.into(),
        from: EntityRef::new(from.0, from.1),
        to: EntityRef::new(to.0, to.1),
        forward,
    }
}

fn predicate(clauses: &[(&str, &[&str])]) -> Result<FilterPredicate> {
    FilterPredicate::new(clauses.iter().map(|(f, opts)| FilterClause {
        filter: f.to_string(),
        options: opts.iter().map(|o| o.to_string()).collect(),
    }))
}

/// Expected note strings for a fixed table of paths and predicates.
pub fn note_templates() -> Check {
    let started = Instant::now();
    let outcome = (|| -> Result<(bool, String)> {
        let g = use_case_graph();
        let paths: Vec<(Vec<PathHop>, &str)> = vec![
            (vec![hop("zone_contains_cluster", ("Zone", "Zone02"), ("Cluster", "Cluster25"), true)], "Zone Zone02 contains Cluster Cluster25"),
            (vec![hop("zone_contains_cluster", ("Cluster", "Cluster25"), ("Zone", "Zone02"), false)], "Zone Zone02 contains Cluster Cluster25"),
            (vec![hop("customer_reserves_cluster", ("Customer", "Customer80"), ("Cluster", "Cluster25"), true)], "Customer Customer80 reserves Cluster Cluster25"),
            (vec![hop("customer_reserves_cluster", ("Cluster", "Cluster25"), ("Customer", "Customer80"), false)], "Customer Customer80 reserves Cluster Cluster25"),
            (vec![hop("area_contains_zone", ("Area", "Area01"), ("Zone", "Zone02"), true)], "Area Area01 contains Zone Zone02"),
            (
                vec![
                    hop("area_contains_zone", ("Zone", "Zone02"), ("Area", "Area01"), false),
                    hop("area_contains_zone", ("Area", "Area01"), ("Zone", "Zone03"), true),
                ],
                "Area Area01 contains Zone Zone02 Zone03",
            ),
            (
                vec![
                    hop("area_contains_zone", ("Area", "Area01"), ("Zone", "Zone02"), true),
                    hop("zone_contains_cluster", ("Zone", "Zone02"), ("Cluster", "Cluster07"), true),
                ],
                "Area Area01 contains Zone Zone02; Zone Zone02 contains Cluster Cluster07",
            ),
            (vec![hop("cluster_hosts_allocation", ("Cluster", "Cluster07"), ("Allocation", "Alloc003"), true)], "Cluster Cluster07 hosts Allocation Alloc003"),
            (vec![hop("allocation_placed_in_zone", ("Allocation", "Alloc003"), ("Zone", "Zone01"), true)], "Allocation Alloc003 is placed in Zone Zone01"),
            (vec![hop("customer_deploys_in_zone", ("Zone", "Zone01"), ("Customer", "Customer05"), false)], "Customer Customer05 deploys in Zone Zone01"),
        ];
        let filters: Vec<(FilterPredicate, &str)> = vec![
            (predicate(&[("ErrorCode", &["TypeError"]), ("OSType", &["Linux"])])?, "Filtered by ErrorCode: TypeError; OSType: Linux"),
            (predicate(&[("OSType", &["Linux"]), ("ErrorCode", &["TypeError"])])?, "Filtered by ErrorCode: TypeError; OSType: Linux"),
            (predicate(&[("X", &["a"])])?, "Filtered by X: a"),
            (predicate(&[("OSType", &["Windows", "Linux"])])?, "Filtered by OSType: Linux, Windows"),
            (predicate(&[("VMSize", &["Large", "Small", "Medium"])])?, "Filtered by VMSize: Large, Medium, Small"),
            (predicate(&[("ErrorCode", &["Timeout"]), ("Status", &["Failed"]), ("OSType", &["Linux"])])?, "Filtered by ErrorCode: Timeout; OSType: Linux; Status: Failed"),
            (predicate(&[("Zone", &["Zone02"])])?, "Filtered by Zone: Zone02"),
            (predicate(&[("ErrorCode", &["AllocationFailed", "TypeError"])])?, "Filtered by ErrorCode: AllocationFailed, TypeError"),
            (predicate(&[("B", &["2"]), ("A", &["1"])])?, "Filtered by A: 1; B: 2"),
            (predicate(&[])?, "Unfiltered"),
        ];
        let mut wrong = Vec::new();
        for (path, want) in &paths {
            let got = render_collection_note(&g, path)?;
            if got != *want {
                wrong.push(format!("{got:?} != {want:?}"));
            }
        }
        for (p, want) in &filters {
            let got = render_filter_note(p);
            if got != *want {
                wrong.push(format!("{got:?} != {want:?}"));
            }
        }
        Ok((
            wrong.is_empty(),
            format!("{} fixtures, mismatches {wrong:?}", paths.len() + filters.len()),
        ))
    })();
    finish("note templates", started, outcome)
}

/// Checks runnable against one dataset: its graph's round trip, the
/// scenario outcome when ground truth is present, and layout and document
/// properties on sessions over its data, plus the data-independent oracles.
pub fn verify_dataset(store: &TelemetryStore, graph: &KnowledgeGraph) -> VerifyReport {
    let env = BoardEnv { graph, store };
    let mut checks = vec![
        relevance_oracle(100, 200, 1),
        relevance_invariants(1000, 200, 1),
        changepoint_recovery(100, 1),
        expansion_brute_force(20, 1),
        refinement_optimality(20, 50, 1),
        note_templates(),
    ];
    let started = Instant::now();
    checks.push(finish(
        "dataset graph round trip",
        started,
        serialize_graph(graph).and_then(|b| Ok((parse_graph(&b)? == graph.canonical(), format!("{} bytes", b.len())))),
    ));
    if let Some(gt) = store.ground_truth() {
        let started = Instant::now();
        let outcome = run_scenario(store, graph).map(|r| match r {
            Some(r) => (
                r.alerted && r.cause.is_some() && r.refine_hit,
                format!(
                    "alerted {}, cause {} at {:?}, refined {:?} (want {}={})",
                    r.alerted, gt.cause.key, r.cause, r.refined, gt.injected_filter, gt.injected_option
                ),
            ),
            None => (false, "no ground truth".into()),
        });
        checks.push(finish("dataset ground truth", started, outcome));
    }
    checks.push(layout_properties(env, 20, 30, 1));
    checks.push(round_trips(env, 20, 1));
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_signals_are_seeded_and_spaced() {
        let (a, pa) = step_signal(3, 200, 4.0);
        let (b, pb) = step_signal(3, 200, 4.0);
        assert_eq!((a, pa.clone()), (b, pb));
        assert!(pa.windows(2).all(|w| w[1] - w[0] >= 25));
    }

    #[test]
    fn note_fixtures_pass() {
        let c = note_templates();
        assert!(c.passed, "{}", c.line());
    }

    #[test]
    fn relevance_check_passes() {
        assert!(relevance_oracle(100, 200, 9).passed);
    }

    #[test]
    fn changepoint_check_passes_on_other_seeds() {
        let c = changepoint_recovery(50, 700);
        assert!(c.passed, "{}", c.line());
    }
}
