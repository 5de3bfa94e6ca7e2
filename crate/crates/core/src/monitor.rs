//! Monitoring stage: rolling z-score alerts over KPI series and the
//! incident→KPI link.

use serde::{Deserialize, Serialize};

use crate::board::{BoardEnv, InvestigationSession, LayoutConfig};
use crate::clue::{Clue, SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::store::{ClueData, IncidentLog, TelemetryStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    /// Trailing samples forming the baseline of each z-score.
    pub rolling_window: usize,
    pub threshold: f64,
    /// Consecutive same-sign exceedances needed to raise an alert.
    pub min_run: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            rolling_window: 24,
            threshold: 3.0,
            min_run: 2,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rolling_window < 2 || self.min_run == 0 || self.threshold.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid("rolling_window ≥ 2, min_run ≥ 1 and a positive threshold are required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlertDirection {
    Spike,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyAlert {
    pub key: SeriesKey,
    pub window: TimeRange,
    pub peak_z: f64,
    pub direction: AlertDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    InsufficientData,
    NotNumeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub key: SeriesKey,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlertReport {
    /// Sorted by descending |peak z|.
    pub alerts: Vec<AnomalyAlert>,
    pub skipped: Vec<Skipped>,
}

/// z-scores against the trailing `rolling_window` samples that were not
/// themselves flagged, so a sustained shift keeps alerting instead of
/// becoming the new baseline. The first `rolling_window` samples get no
/// score.
pub fn rolling_z(values: &[f64], config: &MonitorConfig) -> Vec<Option<f64>> {
    let w = config.rolling_window;
    let mut history: Vec<f64> = Vec::with_capacity(values.len());
    let mut out = Vec::with_capacity(values.len());
    for &x in values {
        if history.len() < w {
            history.push(x);
            out.push(None);
            continue;
        }
        let tail = &history[history.len() - w..];
        let mean = tail.iter().sum::<f64>() / w as f64;
        let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w as f64 - 1.0);
        let sd = var.sqrt().max(1e-6 * (1.0 + mean.abs()));
        let z = (x - mean) / sd;
        let z = if (x - mean).abs() < 1e-12 { 0.0 } else { z };
        if z.abs() < config.threshold {
            history.push(x);
        }
        out.push(Some(z));
    }
    out
}

/// Runs of at least `min_run` consecutive same-sign exceedances, merged
/// when they touch. Returns (first, last, peak z) in sample indices.
pub fn alert_runs(z: &[Option<f64>], config: &MonitorConfig) -> Vec<(usize, usize, f64)> {
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    let mut i = 0;
    while i < z.len() {
        let Some(zi) = z[i].filter(|v| v.abs() >= config.threshold) else {
            i += 1;
            continue;
        };
        let sign = zi.signum();
        let mut j = i;
        let mut peak = zi;
        while j + 1 < z.len() {
            match z[j + 1] {
                Some(v) if v.abs() >= config.threshold && v.signum() == sign => {
                    if v.abs() > peak.abs() {
                        peak = v;
                    }
                    j += 1;
                }
                _ => break,
            }
        }
        if j + 1 - i >= config.min_run {
            match runs.last_mut() {
                Some(last) if last.1 + 1 >= i => {
                    last.1 = j;
                    if peak.abs() > last.2.abs() {
                        last.2 = peak;
                    }
                }
                _ => runs.push((i, j, peak)),
            }
        }
        i = j + 1;
    }
    runs
}

/// Alerts over each key's series inside `window`.
pub fn detect_anomalies(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    keys: &[SeriesKey],
    window: &TimeRange,
    config: &MonitorConfig,
) -> Result<AlertReport> {
    config.validate()?;
    let mut report = AlertReport::default();
    for key in keys {
        let series = match store.query_clue(graph, key, window)? {
            ClueData::Number { series } => series,
            _ => {
                report.skipped.push(Skipped { key: key.clone(), reason: SkipReason::NotNumeric });
                continue;
            }
        };
        if series.len() <= config.rolling_window {
            report.skipped.push(Skipped { key: key.clone(), reason: SkipReason::InsufficientData });
            continue;
        }
        let z = rolling_z(&series.values, config);
        for (first, last, peak) in alert_runs(&z, config) {
            let end = series
                .timestamps
                .get(last + 1)
                .copied()
                .unwrap_or(series.timestamps[last] + store.step());
            report.alerts.push(AnomalyAlert {
                key: key.clone(),
                window: TimeRange::new(series.timestamps[first], end)?,
                peak_z: peak,
                direction: if peak > 0.0 { AlertDirection::Spike } else { AlertDirection::Drop },
            });
        }
    }
    report.alerts.sort_by(|a, b| {
        b.peak_z
            .abs()
            .total_cmp(&a.peak_z.abs())
            .then_with(|| a.key.cmp(&b.key))
            .then_with(|| a.window.start.cmp(&b.window.start))
    });
    Ok(report)
}

/// A brushed time range on one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrushSelection {
    pub key: SeriesKey,
    pub range: TimeRange,
}

/// Starts a session on the brushed clue. The range is clipped to the
/// dataset window and becomes the session window.
pub fn open_investigation(
    store: &TelemetryStore,
    graph: &KnowledgeGraph,
    id: &str,
    brush: &BrushSelection,
    layout: LayoutConfig,
) -> Result<InvestigationSession> {
    if brush.range.is_empty() {
        return Err(Error::invalid(format!("brushed range {} is empty", brush.range)));
    }
    let window = brush
        .range
        .intersect(&store.window())
        .ok_or_else(|| Error::invalid(format!("brushed range {} lies outside the dataset", brush.range)))?;
    let env = BoardEnv { graph, store };
    InvestigationSession::create(id, env, Clue::new(brush.key.clone(), window), window, layout)
}

/// Every primary KPI in the store: for each concept its flagged attribute,
/// else `IncidentCount` when declared.
pub fn kpi_keys(store: &TelemetryStore, graph: &KnowledgeGraph) -> Vec<SeriesKey> {
    let mut out = Vec::new();
    for (concept, instance) in store.entities(graph) {
        if let Some(attr) = primary_kpi(graph, &concept) {
            out.push(SeriesKey::new(&concept, &instance, &attr));
        }
    }
    out
}

fn primary_kpi(graph: &KnowledgeGraph, concept: &str) -> Option<String> {
    let c = graph.concept(concept)?;
    c.attributes
        .iter()
        .find(|a| a.primary_kpi)
        .or_else(|| c.attribute("IncidentCount"))
        .map(|a| a.id.clone())
}

/// The KPI an incident is charted against: its zone's primary KPI.
pub fn link_incident_to_kpi(store: &TelemetryStore, graph: &KnowledgeGraph, incident: &IncidentLog) -> Result<SeriesKey> {
    let zone = incident.zone.as_str();
    let known = store
        .manifest()
        .instances
        .get("Zone")
        .is_some_and(|all| all.iter().any(|z| z == zone));
    if !known {
        return Err(Error::not_found(format!("zone `{zone}`")));
    }
    let attr = primary_kpi(graph, "Zone").ok_or_else(|| Error::not_found("primary KPI of `Zone`"))?;
    Ok(SeriesKey::new("Zone", zone, &attr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_store, use_case_graph, ScenarioSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn flat_series_is_quiet() {
        let z = rolling_z(&[5.0; 100], &MonitorConfig::default());
        assert!(alert_runs(&z, &MonitorConfig::default()).is_empty());
    }

    #[test]
    fn single_outlier_needs_a_second_sample() {
        let mut v: Vec<f64> = (0..60).map(|i| (i % 3) as f64).collect();
        v[40] = 50.0;
        let cfg = MonitorConfig::default();
        assert!(alert_runs(&rolling_z(&v, &cfg), &cfg).is_empty());
        v[41] = 50.0;
        let runs = alert_runs(&rolling_z(&v, &cfg), &cfg);
        assert_eq!(runs.len(), 1);
        assert_eq!((runs[0].0, runs[0].1), (40, 41));
    }

    #[test]
    fn touching_runs_merge() {
        let z = [None, Some(4.0), Some(5.0), Some(3.5), Some(6.0), Some(0.0), Some(-4.0), Some(-4.0)];
        let cfg = MonitorConfig::default();
        assert_eq!(alert_runs(&z, &cfg), vec![(1, 4, 6.0), (6, 7, -4.0)]);
    }

    #[test]
    fn gaussian_noise_false_alarm_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(10.0, 2.0).unwrap();
        let v: Vec<f64> = (0..20_000).map(|_| noise.sample(&mut rng)).collect();
        let cfg = MonitorConfig::default();
        let alerts = alert_runs(&rolling_z(&v, &cfg), &cfg).len();
        assert!(alerts <= 20, "{alerts} alerts in 20000 samples");
    }

    #[test]
    fn scenario_endpoints_alert_over_the_injection() {
        let g = use_case_graph();
        for seed in 0..5 {
            let s = generate_store(seed, &ScenarioSpec::default()).unwrap();
            let gt = s.ground_truth().unwrap().clone();
            let keys = vec![gt.anomaly.clone(), gt.cascade.last().unwrap().key.clone()];
            let report = detect_anomalies(&s, &g, &keys, &s.window(), &MonitorConfig::default()).unwrap();
            for k in &keys {
                assert!(
                    report.alerts.iter().any(|a| a.key == *k && a.window.overlaps(&gt.injection_window)),
                    "seed {seed}: no alert on {k}"
                );
            }
            assert!(report.alerts.windows(2).all(|w| w[0].peak_z.abs() >= w[1].peak_z.abs()));
        }
    }

    #[test]
    fn short_series_is_marked() {
        let g = use_case_graph();
        let s = generate_store(1, &ScenarioSpec::default()).unwrap();
        let w = s.window();
        let short = TimeRange::new(w.start, w.start + 10 * s.step()).unwrap();
        let key = SeriesKey::new("Zone", "Zone01", "IncidentCount");
        let r = detect_anomalies(&s, &g, std::slice::from_ref(&key), &short, &MonitorConfig::default()).unwrap();
        assert!(r.alerts.is_empty());
        assert_eq!(r.skipped, vec![Skipped { key, reason: SkipReason::InsufficientData }]);
    }

    #[test]
    fn brush_is_clipped_to_the_dataset() {
        let g = use_case_graph();
        let s = generate_store(1, &ScenarioSpec::default()).unwrap();
        let w = s.window();
        let key = SeriesKey::new("Zone", "Zone02", "IncidentCount");
        let brush = BrushSelection { key: key.clone(), range: TimeRange { start: w.end - 600, end: w.end + 6000 } };
        let b = open_investigation(&s, &g, "b", &brush, LayoutConfig::default()).unwrap();
        assert_eq!(b.meta.window, TimeRange { start: w.end - 600, end: w.end });
        assert_eq!(b.anomaly().unwrap().key, key);
        let flat = BrushSelection { key, range: TimeRange { start: w.start, end: w.start } };
        assert!(matches!(
            open_investigation(&s, &g, "b", &flat, LayoutConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn incidents_link_to_their_zone_kpi() {
        let g = use_case_graph();
        let s = generate_store(1, &ScenarioSpec::default()).unwrap();
        let inc = s.incidents()[0].clone();
        let key = link_incident_to_kpi(&s, &g, &inc).unwrap();
        assert_eq!(key, SeriesKey::new("Zone", &inc.zone, "IncidentCount"));
        let mut lost = inc;
        lost.zone = "Zone99".into();
        assert!(matches!(link_incident_to_kpi(&s, &g, &lost), Err(Error::NotFound(_))));
    }
}
