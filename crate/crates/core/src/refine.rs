//! The refining model: simulated annealing over filter-option combinations
//! for the strongest increasing or decreasing trend in a record-backed
//! attribute.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::board::render_filter_note;
use crate::changepoint::{ChangePointArray, ChangePointCache, DetectorConfig};
use crate::clue::{Clue, FilterClause, FilterPredicate, SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::relevance::relevance;
use crate::store::{TelemetryStore, TimeSeriesData};

const EPSILON: f64 = 1e-9;

/// Least-squares slope of value against sample index over the sample
/// standard deviation. Reversing the series negates the score exactly.
pub fn trend_score(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("trend needs at least two samples"));
    }
    let centre = (n as f64 - 1.0) / 2.0;
    let (mut cov, mut ss, mut sum) = (0.0, 0.0, 0.0);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let d = i as f64 - centre;
        cov += d * (values[i] - values[j]);
        ss += 2.0 * d * d;
        sum += values[i] + values[j];
    }
    if n % 2 == 1 {
        sum += values[n / 2];
    }
    let mean = sum / n as f64;
    let mut var = 0.0;
    for i in 0..n / 2 {
        let j = n - 1 - i;
        var += (values[i] - mean).powi(2) + (values[j] - mean).powi(2);
    }
    if n % 2 == 1 {
        var += (values[n / 2] - mean).powi(2);
    }
    let std = (var / (n as f64 - 1.0)).sqrt();
    Ok(cov / ss / (std + EPSILON))
}

/// Least-squares slope over its standard error when every sample is a
/// Poisson count, i.e. the z statistic of a linear trend in event counts.
/// Trendless additions such as unrelated record populations raise the error
/// more than the slope. Reversal negates the score exactly.
pub fn count_trend_z(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("trend needs at least two samples"));
    }
    let centre = (n as f64 - 1.0) / 2.0;
    let (mut cov, mut var) = (0.0, 0.0);
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let d = i as f64 - centre;
        cov += d * (values[i] - values[j]);
        var += d * d * (values[i].abs() + values[j].abs());
    }
    Ok(cov / (var.sqrt() + EPSILON))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendMeasure {
    /// [`trend_score`].
    NormalizedSlope,
    /// [`count_trend_z`].
    #[default]
    CountZ,
}

impl TrendMeasure {
    pub fn score(self, values: &[f64]) -> Result<f64> {
        match self {
            TrendMeasure::NormalizedSlope => trend_score(values),
            TrendMeasure::CountZ => count_trend_z(values),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Minimum number of matching records for a combination to count.
    pub min_support: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub initial_temperature: f64,
    /// Geometric cooling factor applied after every iteration.
    pub cooling_rate: f64,
    pub seed: u64,
    pub trend: TrendMeasure,
    pub detector: DetectorConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            min_support: 5,
            max_iters: 500,
            restarts: 8,
            initial_temperature: 0.05,
            cooling_rate: 0.99,
            seed: 0,
            trend: TrendMeasure::default(),
            detector: DetectorConfig::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_support < 1 {
            return Err(Error::invalid("min_support must be at least 1"));
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(Error::invalid("cooling_rate must lie in (0, 1)"));
        }
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return Err(Error::invalid("initial_temperature must be positive"));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::invalid("restarts and max_iters must be positive"));
        }
        Ok(())
    }
}

/// Per filter, a bit mask over its options; bit `o` set means option `o` is
/// kept.
pub type Masks = Vec<u32>;

/// Number of states: the product over filters of `2^options - 1`.
pub fn combination_count(options: &[usize]) -> u128 {
    options.iter().map(|m| (1u128 << m) - 1).product()
}

fn better(a: f64, a_label: &str, b: f64, b_label: &str) -> bool {
    match a.total_cmp(&b) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a_label < b_label,
    }
}

/// Maximizes `value` over states with every mask non-empty. `value` returns
/// `None` for infeasible states. Ties between equal values go to the state
/// with the smallest `label`. Deterministic for a fixed seed.
pub fn anneal(
    options: &[usize],
    config: &RefineConfig,
    mut value: impl FnMut(&[u32]) -> Option<f64>,
    label: impl Fn(&[u32]) -> String,
) -> Option<(Masks, f64)> {
    if options.is_empty() || options.iter().any(|m| *m == 0 || *m > 31) {
        return None;
    }
    let mut memo: HashMap<Masks, f64> = HashMap::new();
    let mut eval = |s: &Masks| -> f64 {
        *memo
            .entry(s.clone())
            .or_insert_with(|| value(s).unwrap_or(f64::NEG_INFINITY))
    };
    let mut best: Option<(Masks, f64, String)> = None;
    let consider = |s: &Masks, v: f64, best: &mut Option<(Masks, f64, String)>| {
        if v == f64::NEG_INFINITY {
            return;
        }
        let l = label(s);
        if best.as_ref().is_none_or(|(_, bv, bl)| better(v, &l, *bv, bl)) {
            *best = Some((s.clone(), v, l));
        }
    };

    for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart as u64));
        let mut state: Masks = if restart == 0 {
            options.iter().map(|m| (1u32 << m) - 1).collect()
        } else {
            options.iter().map(|m| rng.random_range(1..(1u32 << m))).collect()
        };
        let mut current = eval(&state);
        consider(&state, current, &mut best);
        let mut temperature = config.initial_temperature;
        for _ in 0..config.max_iters {
            let moves: Vec<(usize, usize)> = options
                .iter()
                .enumerate()
                .flat_map(|(f, m)| (0..*m).map(move |o| (f, o)))
                .filter(|(f, o)| state[*f] ^ (1 << o) != 0)
                .collect();
            if moves.is_empty() {
                break;
            }
            let (f, o) = moves[rng.random_range(0..moves.len())];
            let mut next = state.clone();
            next[f] ^= 1 << o;
            let v = eval(&next);
            let accept = if v >= current || current == f64::NEG_INFINITY {
                true
            } else if v == f64::NEG_INFINITY {
                false
            } else {
                rng.random::<f64>() < ((v - current) / temperature).exp()
            };
            if accept {
                state = next;
                current = v;
                consider(&state, current, &mut best);
            }
            temperature *= config.cooling_rate;
        }
    }
    best.map(|(s, v, _)| (s, v))
}

/// The option space of a record-backed attribute: per-bin record counts for
/// every distinct option tuple of the selected filters.
#[derive(Debug, Clone)]
pub struct CountSpace {
    pub filters: Vec<String>,
    pub options: Vec<Vec<String>>,
    pub bins: usize,
    /// Distinct option tuples and their per-bin counts.
    cells: Vec<(Vec<usize>, Vec<f64>)>,
}

impl CountSpace {
    /// `rows` are (option index per filter, bin) pairs, one per record.
    pub fn new(filters: Vec<String>, options: Vec<Vec<String>>, bins: usize, rows: impl IntoIterator<Item = (Vec<usize>, usize)>) -> Result<Self> {
        if filters.is_empty() || filters.len() != options.len() {
            return Err(Error::invalid("space needs one option list per filter"));
        }
        if options.iter().any(|o| o.is_empty() || o.len() > 31) {
            return Err(Error::invalid("every filter needs between 1 and 31 options"));
        }
        let mut cells: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for (tuple, bin) in rows {
            if bin >= bins || tuple.len() != filters.len() || tuple.iter().zip(&options).any(|(i, o)| *i >= o.len()) {
                return Err(Error::invalid("row outside the space"));
            }
            cells.entry(tuple).or_insert_with(|| vec![0.0; bins])[bin] += 1.0;
        }
        Ok(Self {
            filters,
            options,
            bins,
            cells: cells.into_iter().collect(),
        })
    }

    pub fn cells(&self) -> &[(Vec<usize>, Vec<f64>)] {
        &self.cells
    }

    pub fn option_counts(&self) -> Vec<usize> {
        self.options.iter().map(Vec::len).collect()
    }

    pub fn combinations(&self) -> u128 {
        combination_count(&self.option_counts())
    }

    /// Per-bin counts and total support of the records kept by `masks`.
    pub fn series(&self, masks: &[u32]) -> (Vec<f64>, usize) {
        let mut out = vec![0.0; self.bins];
        let mut support = 0.0;
        for (tuple, counts) in &self.cells {
            if tuple.iter().zip(masks).all(|(o, m)| m & (1 << o) != 0) {
                for (acc, c) in out.iter_mut().zip(counts) {
                    *acc += c;
                    support += c;
                }
            }
        }
        (out, support as usize)
    }

    pub fn predicate(&self, masks: &[u32]) -> FilterPredicate {
        let clauses = self.filters.iter().zip(&self.options).zip(masks).map(|((f, opts), m)| FilterClause {
            filter: f.clone(),
            options: opts
                .iter()
                .enumerate()
                .filter(|(i, _)| m & (1 << i) != 0)
                .map(|(_, o)| o.clone())
                .collect(),
        });
        FilterPredicate::new(clauses).expect("distinct filters with non-empty options")
    }

    /// Trend of the kept records, or `None` below `min_support`.
    pub fn score(&self, masks: &[u32], min_support: usize, measure: TrendMeasure) -> Option<f64> {
        let (series, support) = self.series(masks);
        (support >= min_support).then(|| measure.score(&series).unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found { predicate: FilterPredicate, trend_score: f64, support: usize },
    NoFeasibleCombination,
}

/// Best combination of `space` for `objective`.
pub fn search_space(space: &CountSpace, objective: Objective, config: &RefineConfig) -> Result<SearchOutcome> {
    config.validate()?;
    let sign = match objective {
        Objective::Maximize => 1.0,
        Objective::Minimize => -1.0,
    };
    let found = anneal(
        &space.option_counts(),
        config,
        |m| space.score(m, config.min_support, config.trend).map(|s| sign * s),
        |m| space.predicate(m).to_string(),
    );
    Ok(match found {
        Some((masks, v)) => SearchOutcome::Found {
            predicate: space.predicate(&masks),
            trend_score: sign * v,
            support: space.series(&masks).1,
        },
        None => SearchOutcome::NoFeasibleCombination,
    })
}

/// Allowed options per filter. An empty list allows every option of the
/// filter.
pub type Selection = BTreeMap<String, Vec<String>>;

/// Builds the option space of a record-backed attribute over `window`.
pub fn count_space(store: &TelemetryStore, graph: &KnowledgeGraph, attribute: &SeriesKey, selection: &Selection, window: &TimeRange) -> Result<CountSpace> {
    if selection.is_empty() {
        return Err(Error::invalid("select at least one filter"));
    }
    let resolved = store.resolve(graph, attribute)?;
    if !resolved.filterable {
        return Err(Error::invalid(format!("attribute `{}` is not record-backed", attribute.attribute)));
    }
    let mut filters = Vec::new();
    let mut options = Vec::new();
    let mut columns = Vec::new();
    for (filter, chosen) in selection {
        let declared = store.filter_options(graph, resolved.concept, filter)?;
        let col = store
            .records()
            .filter_index(filter)
            .ok_or_else(|| Error::invalid(format!("filter `{filter}` has no record column")))?;
        let opts = if chosen.is_empty() {
            declared
        } else {
            if let Some(bad) = chosen.iter().find(|o| !declared.contains(o)) {
                return Err(Error::invalid(format!("`{bad}` is not an option of filter `{filter}`")));
            }
            let mut c = chosen.clone();
            c.sort();
            c.dedup();
            c
        };
        filters.push(filter.clone());
        options.push(opts);
        columns.push(col);
    }
    let grid = store.grid(window);
    let Some(&origin) = grid.first() else {
        return Err(Error::invalid(format!("window {window} holds no samples")));
    };
    let step = store.step();
    let rows = store.scoped_records(graph, &attribute.unfiltered(), window)?;
    let tuples = rows.into_iter().filter_map(|r| {
        let tuple: Option<Vec<usize>> = columns
            .iter()
            .zip(&options)
            .map(|(c, opts)| opts.iter().position(|o| *o == r.filters[*c]))
            .collect();
        tuple.map(|t| (t, ((r.timestamp - origin) / step) as usize))
    });
    let tuples: Vec<_> = tuples.collect();
    CountSpace::new(filters, options, grid.len(), tuples)
}

/// Annealing search over the selected filters of a record-backed attribute.
pub fn search_combinations(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    attribute: &SeriesKey,
    selection: &Selection,
    objective: Objective,
    window: &TimeRange,
    config: &RefineConfig,
) -> Result<SearchOutcome> {
    search_space(&count_space(store, graph, attribute, selection, window)?, objective, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineWinner {
    pub predicate: FilterPredicate,
    pub trend_score: f64,
    pub support: usize,
    /// The attribute filtered by `predicate`.
    pub clue: Clue,
    pub series: TimeSeriesData,
    pub changepoints: ChangePointArray,
    /// Mean relevance to the board evidence; 0 without evidence.
    pub avg_relevance: f64,
    pub no_evidence: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RefineOutcome {
    Found(Box<RefineWinner>),
    NoFeasibleCombination,
}

impl RefineOutcome {
    pub fn winner(&self) -> Option<&RefineWinner> {
        match self {
            RefineOutcome::Found(w) => Some(w),
            RefineOutcome::NoFeasibleCombination => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub increasing: RefineOutcome,
    pub decreasing: RefineOutcome,
    /// Note of the increasing winner.
    pub note: String,
    pub combinations: u128,
}

/// Runs both objectives and scores each winner against `evidence`.
#[allow(clippy::too_many_arguments)]
pub fn refine_clue(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    cache: &ChangePointCache,
    clue: &Clue,
    selection: &Selection,
    evidence: &[Clue],
    window: &TimeRange,
    config: &RefineConfig,
) -> Result<RefineResult> {
    let space = count_space(store, graph, &clue.key, selection, window)?;
    let step = store.step();
    let n = window.samples(step);
    let mut evidence_offsets = Vec::with_capacity(evidence.len());
    for e in evidence {
        let cp = cache.changepoints(store, graph, &e.key, window, &config.detector)?;
        evidence_offsets.push(cp.offsets(window.start, step));
    }
    let side = |objective| -> Result<RefineOutcome> {
        let SearchOutcome::Found { predicate, trend_score, support } = search_space(&space, objective, config)? else {
            return Ok(RefineOutcome::NoFeasibleCombination);
        };
        let key = clue.key.unfiltered().with_filter(Some(predicate.clone()));
        let changepoints = (*cache.changepoints(store, graph, &key, window, &config.detector)?).clone();
        let offsets = changepoints.offsets(window.start, step);
        let avg_relevance = if evidence_offsets.is_empty() {
            0.0
        } else {
            evidence_offsets.iter().map(|e| relevance(&offsets, e, n)).sum::<f64>() / evidence_offsets.len() as f64
        };
        let series = match store.query_clue(graph, &key, window)? {
            crate::store::ClueData::Number { series } => series,
            _ => return Err(Error::Internal("count attribute resolved to non-numeric data".into())),
        };
        Ok(RefineOutcome::Found(Box::new(RefineWinner {
            note: render_filter_note(&predicate),
            predicate,
            trend_score,
            support,
            clue: Clue::new(key, clue.window),
            series,
            changepoints,
            avg_relevance,
            no_evidence: evidence.is_empty(),
        })))
    };
    let increasing = side(Objective::Maximize)?;
    let decreasing = side(Objective::Minimize)?;
    let note = increasing
        .winner()
        .map(|w| w.note.clone())
        .unwrap_or_else(|| "No feasible combination".to_string());
    Ok(RefineResult {
        increasing,
        decreasing,
        note,
        combinations: space.combinations(),
    })
}
