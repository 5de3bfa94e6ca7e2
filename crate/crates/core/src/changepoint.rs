//! Change-point extraction: Bayesian online detection over numeric series,
//! label transitions over event sequences, and pooling for multi-member
//! clues.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::clue::{SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::store::{ClueData, EventSequenceData, TelemetryStore, TimeSeriesData};

/// Sorted, strictly increasing change timestamps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChangePointArray {
    points: Vec<i64>,
}

impl ChangePointArray {
    /// Sorts and deduplicates.
    pub fn new(mut points: Vec<i64>) -> Self {
        points.sort_unstable();
        points.dedup();
        Self { points }
    }

    pub fn points(&self) -> &[i64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points as sample offsets from `origin`, the unit relevance is computed
    /// in.
    pub fn offsets(&self, origin: i64, step: i64) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| (p - origin) as f64 / step as f64)
            .collect()
    }
}

/// Normal–Inverse-Gamma hyperparameters of the predictive model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigPrior {
    pub mu0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl Default for NigPrior {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            kappa0: 0.1,
            alpha0: 1.0,
            beta0: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Constant probability that a run ends at any sample.
    pub hazard: f64,
    pub prior: NigPrior,
    /// Posterior mass on short run lengths needed to declare a change.
    pub threshold: f64,
    /// Samples; also the largest run length counted as "short".
    pub min_gap: usize,
    /// Run lengths whose posterior mass drops below this are pruned.
    pub truncation: f64,
    /// Rescale the series to zero mean and unit variance first.
    pub standardize: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            hazard: 1.0 / 100.0,
            prior: NigPrior::default(),
            threshold: 0.5,
            min_gap: 3,
            truncation: 1e-6,
            standardize: true,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.prior;
        if !(self.hazard > 0.0 && self.hazard < 1.0) {
            return Err(Error::invalid("hazard must lie in (0, 1)"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1)"));
        }
        if self.min_gap < 1 {
            return Err(Error::invalid("min_gap must be at least 1"));
        }
        if !(p.kappa0 > 0.0 && p.alpha0 > 0.0 && p.beta0 > 0.0 && p.mu0.is_finite()) {
            return Err(Error::invalid("prior needs finite mu0 and positive kappa0, alpha0, beta0"));
        }
        if !(0.0..1.0).contains(&self.truncation) {
            return Err(Error::invalid("truncation must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Posterior parameters of one run.
#[derive(Debug, Clone, Copy)]
struct Run {
    len: usize,
    log_mass: f64,
    mu: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
}

impl Run {
    fn fresh(prior: &NigPrior) -> Self {
        Run {
            len: 0,
            log_mass: 0.0,
            mu: prior.mu0,
            kappa: prior.kappa0,
            alpha: prior.alpha0,
            beta: prior.beta0,
        }
    }

    /// Student-t posterior predictive log density of `x`.
    fn log_predictive(&self, x: f64) -> f64 {
        let nu = 2.0 * self.alpha;
        let scale2 = self.beta * (self.kappa + 1.0) / (self.alpha * self.kappa);
        let z = (x - self.mu).powi(2) / (nu * scale2);
        ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * (nu * std::f64::consts::PI * scale2).ln()
            - (nu + 1.0) / 2.0 * z.ln_1p()
    }

    fn absorb(&mut self, x: f64) {
        let kappa = self.kappa + 1.0;
        self.beta += self.kappa * (x - self.mu).powi(2) / (2.0 * kappa);
        self.mu = (self.kappa * self.mu + x) / kappa;
        self.kappa = kappa;
        self.alpha += 0.5;
        self.len += 1;
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Zero-mean, unit-variance copy; `None` for a constant series.
pub(crate) fn standardized(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (sd > 1e-12 * mean.abs().max(1.0)).then(|| values.iter().map(|v| (v - mean) / sd).collect())
}

/// Sample indices at which the online run-length posterior declares a
/// change. Run length counts the samples of the current run including the
/// newest one; a change is declared at sample `t` when the mass on run
/// lengths `1..=min_gap` exceeds the threshold, and located at the start of
/// the most probable short run.
pub fn detect_indices(values: &[f64], config: &DetectorConfig) -> Vec<usize> {
    let h = config.hazard;
    let (log_h, log_1mh) = (h.ln(), (1.0 - h).ln());
    let log_trunc = if config.truncation > 0.0 { config.truncation.ln() } else { f64::NEG_INFINITY };
    let mut runs = vec![Run::fresh(&config.prior)];
    let mut reported: Vec<usize> = Vec::new();

    for (t, &x) in values.iter().enumerate() {
        let mut fresh = Run::fresh(&config.prior);
        fresh.log_mass = log_h + fresh.log_predictive(x);
        let mut next = Vec::with_capacity(runs.len() + 1);
        next.push(fresh);
        for run in &runs {
            // The empty run only exists before the first sample.
            if run.len == 0 {
                continue;
            }
            let mut grown = *run;
            grown.log_mass = run.log_mass + log_1mh + run.log_predictive(x);
            next.push(grown);
        }
        let norm = log_sum_exp(next.iter().map(|r| r.log_mass));
        for r in &mut next {
            r.log_mass -= norm;
            r.absorb(x);
        }
        let best = next.iter().map(|r| r.log_mass).fold(f64::NEG_INFINITY, f64::max);
        next.retain(|r| r.log_mass >= log_trunc || r.log_mass == best);
        let norm = log_sum_exp(next.iter().map(|r| r.log_mass));
        for r in &mut next {
            r.log_mass -= norm;
        }
        runs = next;

        if t < config.min_gap {
            continue;
        }
        let short: Vec<&Run> = runs.iter().filter(|r| r.len <= config.min_gap).collect();
        let mass: f64 = short.iter().map(|r| r.log_mass.exp()).sum();
        if mass <= config.threshold {
            continue;
        }
        let map = short
            .iter()
            .max_by(|a, b| a.log_mass.total_cmp(&b.log_mass).then(b.len.cmp(&a.len)))
            .expect("short runs carry the mass");
        let location = t + 1 - map.len;
        if location == 0 {
            continue;
        }
        if reported.last().is_some_and(|&p| location < p + config.min_gap) {
            continue;
        }
        reported.push(location);
    }
    reported
}

/// Change points of a numeric series restricted to `window`.
pub fn detect_series(series: &TimeSeriesData, window: &TimeRange, config: &DetectorConfig) -> Result<ChangePointArray> {
    config.validate()?;
    let clipped = series.clip(window);
    if clipped.is_empty() {
        return Err(Error::invalid(format!("series has no samples in {window}")));
    }
    let values = if config.standardize {
        match standardized(&clipped.values) {
            Some(v) => v,
            None => return Ok(ChangePointArray::default()),
        }
    } else {
        clipped.values.clone()
    };
    let points = detect_indices(&values, config)
        .into_iter()
        .map(|i| clipped.timestamps[i])
        .collect();
    Ok(ChangePointArray::new(points))
}

/// Timestamps where the active label changes, including both edges of
/// unlabeled gaps, restricted to the open interior of `window`.
pub fn detect_events(seq: &EventSequenceData, window: &TimeRange) -> ChangePointArray {
    let mut points = Vec::new();
    let mut prev: Option<&crate::store::EventInterval> = None;
    for iv in &seq.intervals {
        match prev {
            Some(p) if p.end == iv.start => {
                if p.label != iv.label {
                    points.push(iv.start);
                }
            }
            Some(p) => {
                points.push(p.end);
                points.push(iv.start);
            }
            None => points.push(iv.start),
        }
        prev = Some(iv);
    }
    if let Some(p) = prev {
        points.push(p.end);
    }
    points.retain(|t| *t > window.start && *t < window.end);
    ChangePointArray::new(points)
}

/// Union of arrays, merging each point into the earliest representative
/// within `tolerance` seconds.
pub fn pool_changepoints(arrays: &[ChangePointArray], tolerance: i64) -> ChangePointArray {
    let mut all: Vec<i64> = arrays.iter().flat_map(|a| a.points.iter().copied()).collect();
    all.sort_unstable();
    let mut out: Vec<i64> = Vec::new();
    for p in all {
        match out.last() {
            Some(&rep) if p - rep <= tolerance => {}
            _ => out.push(p),
        }
    }
    ChangePointArray { points: out }
}

/// Change points of any clue payload. Multi-member payloads are pooled with
/// `tolerance` seconds.
pub fn changepoints_of(
    data: &ClueData,
    window: &TimeRange,
    config: &DetectorConfig,
    tolerance: i64,
) -> Result<ChangePointArray> {
    Ok(match data {
        ClueData::Number { series } => {
            if series.clip(window).is_empty() {
                ChangePointArray::default()
            } else {
                detect_series(series, window, config)?
            }
        }
        ClueData::String { events } => detect_events(events, window),
        ClueData::Bag { members } => {
            let arrays = members
                .iter()
                .filter(|m| !m.series.clip(window).is_empty())
                .map(|m| detect_series(&m.series, window, config))
                .collect::<Result<Vec<_>>>()?;
            pool_changepoints(&arrays, tolerance)
        }
        ClueData::Set { members } => {
            let arrays: Vec<_> = members.iter().map(|m| detect_events(&m.events, window)).collect();
            pool_changepoints(&arrays, tolerance)
        }
    })
}

/// Change points per (key, window, detector settings), shared across
/// expansions and refinements.
#[derive(Debug, Default)]
pub struct ChangePointCache {
    entries: Mutex<HashMap<(SeriesKey, TimeRange, String), Arc<ChangePointArray>>>,
}

impl ChangePointCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolves `key` over `window` and extracts its change points, reusing
    /// an earlier result for identical inputs.
    pub fn changepoints(
        &self,
        store: &TelemetryStore,
        graph: &KnowledgeGraph,
        key: &SeriesKey,
        window: &TimeRange,
        config: &DetectorConfig,
    ) -> Result<Arc<ChangePointArray>> {
        let settings = serde_json::to_string(config).map_err(|e| Error::Internal(e.to_string()))?;
        let id = (key.clone(), *window, settings);
        if let Some(hit) = self.entries.lock().ok().and_then(|m| m.get(&id).cloned()) {
            return Ok(hit);
        }
        let data = store.query_clue(graph, key, window)?;
        let cp = Arc::new(changepoints_of(&data, window, config, store.step())?);
        if let Ok(mut m) = self.entries.lock() {
            m.insert(id, cp.clone());
        }
        Ok(cp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::map_segmentation;
    use crate::store::EventInterval;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(values: Vec<f64>) -> TimeSeriesData {
        let ts = (0..values.len() as i64).collect();
        TimeSeriesData::new(ts, values).unwrap()
    }

    fn steps(n: usize, at: &[usize], height: f64, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        (0..n)
            .map(|i| height * at.iter().filter(|a| i >= **a).count() as f64 + noise.sample(&mut rng))
            .collect()
    }

    fn full(n: usize) -> TimeRange {
        TimeRange::new(0, n as i64).unwrap()
    }

    #[test]
    fn constant_series_has_no_change() {
        let s = series(vec![3.0; 100]);
        assert!(detect_series(&s, &full(100), &DetectorConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn empty_series_is_invalid() {
        let s = series(vec![]);
        assert!(detect_series(&s, &full(10), &DetectorConfig::default()).is_err());
    }

    #[test]
    fn single_step_agrees_with_offline_segmentation() {
        let values = steps(200, &[50], 5.0, 0.5, 7);
        let cfg = DetectorConfig::default();
        let online = detect_series(&series(values.clone()), &full(200), &cfg).unwrap();
        assert_eq!(online.len(), 1);
        let p = online.points()[0];
        assert!((47..=53).contains(&p), "{p}");
        let offline = map_segmentation(&standardized(&values).unwrap(), &cfg);
        assert_eq!(offline.len(), 1);
        assert!((p - offline[0] as i64).abs() <= 3);
    }

    #[test]
    fn two_steps_give_two_points() {
        let values = steps(200, &[60, 140], 5.0, 0.5, 11);
        let cfg = DetectorConfig::default();
        let online = detect_series(&series(values.clone()), &full(200), &cfg).unwrap();
        let offline = map_segmentation(&standardized(&values).unwrap(), &cfg);
        assert_eq!(online.len(), 2, "{online:?}");
        assert_eq!(offline.len(), 2);
        for ((p, o), truth) in online.points().iter().zip(&offline).zip([60, 140]) {
            assert!((p - truth).abs() <= 3 && (p - *o as i64).abs() <= 3);
        }
    }

    #[test]
    fn window_start_is_never_reported() {
        let mut values = vec![10.0];
        values.extend(steps(99, &[], 0.0, 0.5, 3));
        let out = detect_series(&series(values), &full(100), &DetectorConfig::default()).unwrap();
        assert!(!out.points().contains(&0));
    }

    #[test]
    fn reports_respect_min_gap() {
        let values = steps(200, &[50, 52, 120], 5.0, 0.3, 5);
        let cfg = DetectorConfig::default();
        let out = detect_series(&series(values), &full(200), &cfg).unwrap();
        for w in out.points().windows(2) {
            assert!(w[1] - w[0] >= cfg.min_gap as i64);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let s = series(vec![1.0, 2.0]);
        for cfg in [
            DetectorConfig { hazard: 0.0, ..Default::default() },
            DetectorConfig { threshold: 1.0, ..Default::default() },
            DetectorConfig { min_gap: 0, ..Default::default() },
        ] {
            assert!(detect_series(&s, &full(2), &cfg).is_err());
        }
    }

    fn iv(start: i64, end: i64, label: &str) -> EventInterval {
        EventInterval { start, end, label: label.into() }
    }

    #[test]
    fn event_boundaries() {
        let w = TimeRange::new(0, 100).unwrap();
        let one = EventSequenceData::new(vec![iv(0, 100, "v1")]).unwrap();
        assert!(detect_events(&one, &w).is_empty());
        let two = EventSequenceData::new(vec![iv(0, 30, "v1"), iv(30, 100, "v2")]).unwrap();
        assert_eq!(detect_events(&two, &w).points(), [30]);
        let same = EventSequenceData::new(vec![iv(0, 30, "v1"), iv(30, 100, "v1")]).unwrap();
        assert!(detect_events(&same, &w).is_empty());
        let gap = EventSequenceData::new(vec![iv(0, 30, "v1"), iv(40, 100, "v1")]).unwrap();
        assert_eq!(detect_events(&gap, &w).points(), [30, 40]);
        let clipped = TimeRange::new(35, 100).unwrap();
        assert_eq!(detect_events(&gap, &clipped).points(), [40]);
    }

    #[test]
    fn pooling_merges_into_earliest() {
        let a = |v: &[i64]| ChangePointArray::new(v.to_vec());
        assert_eq!(pool_changepoints(&[a(&[3, 9])], 0), a(&[3, 9]));
        assert_eq!(pool_changepoints(&[a(&[10]), a(&[11])], 2), a(&[10]));
        assert_eq!(pool_changepoints(&[a(&[10, 50]), a(&[12, 90])], 1), a(&[10, 12, 50, 90]));
        assert_eq!(pool_changepoints(&[a(&[10]), a(&[12]), a(&[14])], 2), a(&[10, 14]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn shift_equivariance(seed in 0u64..1000, at in 30usize..90, offset in -5000i64..5000) {
            let values = steps(120, &[at], 4.0, 0.5, seed);
            let cfg = DetectorConfig::default();
            let base = detect_series(&series(values.clone()), &full(120), &cfg).unwrap();
            let ts: Vec<i64> = (0..120).map(|i| i * 60 + offset).collect();
            let shifted = TimeSeriesData::new(ts, values).unwrap();
            let w = TimeRange::new(offset, offset + 120 * 60).unwrap();
            let got = detect_series(&shifted, &w, &cfg).unwrap();
            let want: Vec<i64> = base.points().iter().map(|p| p * 60 + offset).collect();
            prop_assert_eq!(got.points(), want.as_slice());
        }

        #[test]
        fn scale_invariance_with_rescaled_prior(seed in 0u64..1000, at in 30usize..90, c in 0.01f64..100.0) {
            let values = steps(120, &[at], 4.0, 0.5, seed);
            let cfg = DetectorConfig { standardize: false, ..Default::default() };
            let base = detect_series(&series(values.clone()), &full(120), &cfg).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let p = cfg.prior;
            let cfg_c = DetectorConfig {
                prior: NigPrior { mu0: p.mu0 * c, beta0: p.beta0 * c * c, ..p },
                ..cfg
            };
            let got = detect_series(&series(scaled), &full(120), &cfg_c).unwrap();
            prop_assert_eq!(got, base);
        }

        #[test]
        fn output_is_sorted_and_in_window(seed in 0u64..1000) {
            let values = steps(150, &[40, 100], 3.0, 1.0, seed);
            let w = TimeRange::new(10, 140).unwrap();
            let out = detect_series(&series(values), &w, &DetectorConfig::default()).unwrap();
            prop_assert!(out.points().windows(2).all(|p| p[0] < p[1]));
            prop_assert!(out.points().iter().all(|p| *p > w.start && *p < w.end));
        }
    }
}
