//! Text renderings of service responses.

use std::fmt::Write;

use clueboard_core::changepoint::ChangePointArray;
use clueboard_core::expand::ExpansionResult;
use clueboard_core::monitor::AlertReport;
use clueboard_core::refine::{RefineOutcome, RefineResult};
use clueboard_core::store::GroundTruth;
use clueboard_core::SeriesKey;

pub fn ground_truth(gt: GroundTruth) -> String {
    format!(
        "seed {}\nanomaly {}\ncause {} over {}\ninjected {}={} during {}\n",
        gt.seed, gt.anomaly, gt.cause.key, gt.cause.range, gt.injected_filter, gt.injected_option, gt.injection_window
    )
}

pub fn changepoints(key: &SeriesKey, cps: &ChangePointArray) -> String {
    let points: Vec<String> = cps.points().iter().map(ToString::to_string).collect();
    format!("{key}: {} change points [{}]\n", points.len(), points.join(", "))
}

pub fn alerts(report: &AlertReport) -> String {
    let mut s = String::new();
    for a in &report.alerts {
        let _ = writeln!(s, "{:>7.2}  {}  {}", a.peak_z, a.key, a.window);
    }
    if report.alerts.is_empty() {
        s.push_str("no alerts\n");
    }
    if !report.skipped.is_empty() {
        let _ = writeln!(s, "{} series skipped", report.skipped.len());
    }
    s
}

pub fn expansion(r: &ExpansionResult) -> String {
    let mut s = format!("{}:", r.direction);
    if r.truncated_by_budget {
        s.push_str(" (budget reached)");
    }
    s.push('\n');
    if r.entries.is_empty() {
        s.push_str("  no candidates\n");
    }
    for (i, e) in r.entries.iter().enumerate() {
        let via: Vec<&str> = e.path.iter().map(|h| h.relation.as_str()).collect();
        let _ = write!(s, "  {}. {:.4}  {}", i + 1, e.score, e.clue.key);
        if !via.is_empty() {
            let _ = write!(s, "  via {}", via.join(" > "));
        }
        s.push('\n');
    }
    s
}

fn outcome(label: &str, o: &RefineOutcome) -> String {
    match o.winner() {
        Some(w) => format!(
            "{label}: {} (trend {:.3}, support {}, relevance {:.3})\n",
            w.predicate, w.trend_score, w.support, w.avg_relevance
        ),
        None => format!("{label}: no feasible combination\n"),
    }
}

pub fn refinement(r: &RefineResult) -> String {
    format!(
        "{}{}{}\n{} combinations\n",
        outcome("increasing", &r.increasing),
        outcome("decreasing", &r.decreasing),
        r.note,
        r.combinations
    )
}
