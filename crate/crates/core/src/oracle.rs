//! Independent brute-force reference implementations used by the test
//! suites and by `verify`. They favour obviousness over speed and share no
//! code with the engine paths they check.

use std::collections::BTreeSet;

use statrs::function::gamma::ln_gamma;

use crate::changepoint::{changepoints_of, DetectorConfig};
use crate::clue::{SeriesKey, TimeRange};
use crate::error::Result;
use crate::expand::Direction;
use crate::graph::{Hierarchy, KnowledgeGraph};
use crate::refine::CountSpace;
use crate::relevance::rank_candidates;
use crate::store::TelemetryStore;

/// Directed distance by scanning every target point for each source point.
pub fn directed_distance(s: &[f64], t: &[f64]) -> f64 {
    let mut total = 0.0;
    for x in s {
        let mut best = f64::INFINITY;
        for y in t {
            let d = (x - y).abs();
            if d < best {
                best = d;
            }
        }
        total += best;
    }
    total
}

/// Relevance straight from its definition, with the empty-array convention.
pub fn relevance(s1: &[f64], s2: &[f64], window_len: usize) -> f64 {
    if s1.is_empty() || s2.is_empty() {
        return 0.0;
    }
    let n = window_len as f64;
    let a = directed_distance(s1, s2) / s1.len() as f64;
    let b = directed_distance(s2, s1) / s2.len() as f64;
    1.0 - (1.0 / (2.0 * n)) * (a + b)
}

/// Scores every candidate, then repeatedly extracts the best remaining one
/// (highest score, smallest id).
pub fn top_k(baseline: &[f64], candidates: &[(String, Vec<f64>)], window_len: usize, k: usize) -> Vec<(String, f64)> {
    let mut pool: Vec<(String, f64)> = candidates
        .iter()
        .map(|(id, cp)| (id.clone(), relevance(baseline, cp, window_len)))
        .collect();
    let mut out = Vec::new();
    while out.len() < k && !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (id, score) = &pool[i];
            let (bid, bscore) = &pool[best];
            if score > bscore || (score == bscore && id < bid) {
                best = i;
            }
        }
        out.push(pool.remove(best));
    }
    out
}

fn segment_log_marginal(x: &[f64], config: &DetectorConfig) -> f64 {
    let p = &config.prior;
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let kappa_n = p.kappa0 + m;
    let alpha_n = p.alpha0 + m / 2.0;
    let beta_n = p.beta0 + 0.5 * ss + p.kappa0 * m * (mean - p.mu0).powi(2) / (2.0 * kappa_n);
    ln_gamma(alpha_n) - ln_gamma(p.alpha0) + p.alpha0 * p.beta0.ln() - alpha_n * beta_n.ln()
        + 0.5 * (p.kappa0.ln() - kappa_n.ln())
        - m / 2.0 * (2.0 * std::f64::consts::PI).ln()
}

/// Exact maximum-a-posteriori segmentation under the detector's model:
/// independent Normal–Inverse-Gamma segments and a constant hazard. Returns
/// the start index of every segment after the first.
pub fn map_segmentation(values: &[f64], config: &DetectorConfig) -> Vec<usize> {
    let n = values.len();
    let (log_h, log_1mh) = (config.hazard.ln(), (1.0 - config.hazard).ln());
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut from = vec![0usize; n + 1];
    best[0] = 0.0;
    for j in 1..=n {
        for i in 0..j {
            let boundary = if i == 0 { 0.0 } else { log_h };
            let score = best[i]
                + boundary
                + (j - i - 1) as f64 * log_1mh
                + segment_log_marginal(&values[i..j], config);
            if score > best[j] {
                best[j] = score;
                from[j] = i;
            }
        }
    }
    let mut cuts = Vec::new();
    let mut j = n;
    while j > 0 {
        let i = from[j];
        if i > 0 {
            cuts.push(i);
        }
        j = i;
    }
    cuts.reverse();
    cuts
}

/// Label-change timestamps by walking a per-second timeline between the
/// window edges. Only suitable for small integer windows.
pub fn event_boundaries(intervals: &[(i64, i64, String)], window: (i64, i64)) -> Vec<i64> {
    let label_at = |t: i64| {
        intervals
            .iter()
            .find(|(s, e, _)| *s <= t && t < *e)
            .map(|(_, _, l)| l.as_str())
    };
    ((window.0 + 1)..window.1)
        .filter(|t| label_at(t - 1) != label_at(*t))
        .collect()
}

/// Greedy merge by repeated scans: the smallest unassigned point becomes a
/// representative and absorbs every point within `tolerance` of it.
pub fn pool(arrays: &[Vec<i64>], tolerance: i64) -> Vec<i64> {
    let mut rest: Vec<i64> = arrays.iter().flatten().copied().collect();
    let mut out = Vec::new();
    while let Some(&rep) = rest.iter().min() {
        out.push(rep);
        rest.retain(|p| *p - rep > tolerance);
    }
    out
}

/// Entities one step away in `direction`, read straight off the link tables.
fn one_step(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    (concept, instance): (&str, &str),
    direction: Direction,
    global_siblings: bool,
) -> Vec<(String, String)> {
    let links = |id: &str| store.manifest().links.get(id).cloned().unwrap_or_default();
    let mut out = Vec::new();
    for rel in &graph.relations {
        let table = links(&rel.id);
        match (direction, rel.hierarchy) {
            (Direction::Up, Hierarchy::Contains) if rel.target == concept => {
                out.extend(table.iter().filter(|(_, t)| t == instance).map(|(s, _)| (rel.source.clone(), s.clone())));
            }
            (Direction::Down, Hierarchy::Contains) if rel.source == concept => {
                out.extend(table.iter().filter(|(s, _)| s == instance).map(|(_, t)| (rel.target.clone(), t.clone())));
            }
            (Direction::Right, Hierarchy::Lateral) => {
                if rel.source == concept {
                    out.extend(table.iter().filter(|(s, _)| s == instance).map(|(_, t)| (rel.target.clone(), t.clone())));
                }
                if rel.target == concept {
                    out.extend(table.iter().filter(|(_, t)| t == instance).map(|(s, _)| (rel.source.clone(), s.clone())));
                }
            }
            (Direction::Left, Hierarchy::Contains) if rel.target == concept && !global_siblings => {
                for (p, _) in table.iter().filter(|(_, t)| t == instance) {
                    out.extend(
                        table
                            .iter()
                            .filter(|(s, t)| s == p && t != instance)
                            .map(|(_, t)| (concept.to_string(), t.clone())),
                    );
                }
            }
            _ => {}
        }
    }
    if direction == Direction::Left && global_siblings {
        if let Some(all) = store.manifest().instances.get(concept) {
            out.extend(all.iter().filter(|i| *i != instance).map(|i| (concept.to_string(), i.clone())));
        }
    }
    out
}

/// Every clue an expansion in `direction` may recommend for `origin`: the
/// transitive closure of same-direction steps, excluding the origin entity.
/// Inward yields the origin entity's other attributes.
pub fn expansion_candidates(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    origin: &SeriesKey,
    direction: Direction,
    global_siblings: bool,
) -> Vec<SeriesKey> {
    let start = (origin.concept.clone(), origin.instance.clone());
    let mut reached: BTreeSet<(String, String)> = BTreeSet::new();
    if direction == Direction::In {
        reached.insert(start.clone());
    } else {
        let mut seen = BTreeSet::from([start.clone()]);
        let mut stack = vec![start.clone()];
        while let Some((c, i)) = stack.pop() {
            for next in one_step(store, graph, (&c, &i), direction, global_siblings) {
                if seen.insert(next.clone()) {
                    reached.insert(next.clone());
                    stack.push(next);
                }
            }
        }
    }
    let mut out = Vec::new();
    for (c, i) in reached {
        let Some(concept) = graph.concept(&c) else { continue };
        for a in &concept.attributes {
            if direction == Direction::Left && a.id != origin.attribute {
                continue;
            }
            let key = SeriesKey::new(&c, &i, &a.id);
            if key != origin.unfiltered() {
                out.push(key);
            }
        }
    }
    out
}

/// Exhaustive expansion: score every candidate and rank the lot.
#[allow(clippy::too_many_arguments)]
pub fn expansion_top_k(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    origin: &SeriesKey,
    window: &TimeRange,
    direction: Direction,
    k: usize,
    detector: &DetectorConfig,
    global_siblings: bool,
) -> Result<Vec<(String, f64)>> {
    let offsets = |key: &SeriesKey| -> Result<Vec<f64>> {
        let data = store.query_clue(graph, key, window)?;
        Ok(changepoints_of(&data, window, detector, store.step())?.offsets(window.start, store.step()))
    };
    let baseline = offsets(origin)?;
    let mut candidates = Vec::new();
    for key in expansion_candidates(store, graph, origin, direction, global_siblings) {
        candidates.push((key.to_string(), offsets(&key)?));
    }
    rank_candidates(&baseline, &candidates, window.samples(store.step()), k)
}

/// Slope of value on index over sample standard deviation, by the textbook
/// formulas.
pub fn trend(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = values.iter().sum::<f64>() / n;
    let sxy: f64 = values.iter().enumerate().map(|(i, y)| (i as f64 - mx) * (y - my)).sum();
    let sxx: f64 = (0..values.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    let sd = (values.iter().map(|y| (y - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    sxy / sxx / (sd + 1e-9)
}

/// Slope over its Poisson standard error: `sum(d*y) / sqrt(sum(d^2*|y|))`
/// with `d` the centred index.
pub fn count_z(values: &[f64]) -> f64 {
    let mx = (values.len() as f64 - 1.0) / 2.0;
    let num: f64 = values.iter().enumerate().map(|(i, y)| (i as f64 - mx) * y).sum();
    let den: f64 = values.iter().enumerate().map(|(i, y)| (i as f64 - mx).powi(2) * y.abs()).sum();
    num / (den.sqrt() + 1e-9)
}

/// Best trend over every combination of non-empty option subsets, or `None`
/// when no combination reaches `min_support` records. `poisson` selects
/// [`count_z`] over [`trend`].
pub fn refine_optimum(space: &CountSpace, maximize: bool, min_support: usize, poisson: bool) -> Option<f64> {
    let counts = space.option_counts();
    let total: usize = counts.iter().map(|m| (1usize << m) - 1).product();
    let mut best: Option<f64> = None;
    for index in 0..total {
        let mut rest = index;
        let mut keep: Vec<Vec<bool>> = Vec::new();
        for m in &counts {
            let subsets = (1usize << m) - 1;
            let mask = rest % subsets + 1;
            rest /= subsets;
            keep.push((0..*m).map(|o| mask >> o & 1 == 1).collect());
        }
        let mut series = vec![0.0; space.bins];
        let mut support = 0.0;
        for (tuple, bins) in space.cells() {
            if tuple.iter().enumerate().all(|(f, o)| keep[f][*o]) {
                for (i, c) in bins.iter().enumerate() {
                    series[i] += c;
                    support += c;
                }
            }
        }
        if support < min_support as f64 {
            continue;
        }
        let t = if poisson { count_z(&series) } else { trend(&series) };
        let t = if maximize { t } else { -t };
        if best.is_none_or(|b| t > b) {
            best = Some(t);
        }
    }
    best.map(|b| if maximize { b } else { -b })
}
