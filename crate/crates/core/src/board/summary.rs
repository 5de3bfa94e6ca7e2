//! Markdown digest of a session.

use std::fmt::Write;

use super::notes::render_filter_note;
use super::session::{Annotation, CardState, InvestigationSession, Role, Shape};

fn shape_label(shape: &Shape) -> &'static str {
    match shape {
        Shape::Circle { .. } => "circle",
        Shape::Rectangle { .. } => "rectangle",
        Shape::Arrow { .. } => "arrow",
        Shape::Text { .. } => "text",
    }
}

fn heading(role: Role) -> &'static str {
    match role {
        Role::Hypothesis => "Hypotheses",
        Role::Conclusion => "Conclusions",
        Role::Mitigation => "Mitigations",
        Role::Highlight => "Highlights",
    }
}

fn annotation_line(session: &InvestigationSession, a: &Annotation) -> String {
    let mut line = match a.shape.text() {
        Some(t) => t.trim().to_string(),
        None => format!("({})", shape_label(&a.shape)),
    };
    if let Some(card) = a.anchor.as_deref().and_then(|id| session.card(id)) {
        let _ = write!(line, " [{}]", card.title());
    }
    line
}

/// Sections appear in a fixed order; all but Context are omitted when empty.
pub fn render_summary(session: &InvestigationSession) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Investigation {}\n", session.id());
    let _ = writeln!(out, "## Context\n");
    if let Some(anomaly) = session.anomaly() {
        let _ = writeln!(out, "- Anomaly: {} over {}", anomaly.key, anomaly.window);
    }
    let _ = writeln!(out, "- Window: {}", session.meta.window);
    let _ = writeln!(out, "- Graph version: {}", session.meta.graph_version);
    let _ = writeln!(
        out,
        "- Board: {} card(s), {} link(s), {} annotation(s)",
        session.cards.len(),
        session.links.len(),
        session.annotations.len()
    );

    let anomaly = session.anomaly();
    let mut evidence = String::new();
    for card in &session.cards {
        for a in &card.attributes {
            if a.state != CardState::Evidence || Some(&a.clue) == anomaly {
                continue;
            }
            let _ = write!(evidence, "- {}: {} over {}", card.title(), a.clue.key.attribute, a.clue.window);
            if let Some(p) = &a.clue.key.filter {
                let _ = write!(evidence, " ({})", render_filter_note(p));
            }
            evidence.push('\n');
            for l in session.links.iter().filter(|l| l.target == card.id && !l.note.is_empty()) {
                let _ = writeln!(evidence, "  - {}", l.note);
            }
        }
    }
    if !evidence.is_empty() {
        let _ = writeln!(out, "\n## Evidence\n");
        out.push_str(&evidence);
    }

    for role in Role::ALL {
        let items: Vec<&Annotation> = session.annotations.iter().filter(|a| a.role == role).collect();
        if items.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n## {}\n", heading(role));
        for a in items {
            let _ = writeln!(out, "- {}", annotation_line(session, a));
            if role == Role::Conclusion {
                if let Some(card) = a.anchor.as_deref().and_then(|id| session.card(id)) {
                    for attr in card.attributes.iter().filter(|x| x.state == CardState::Evidence) {
                        let _ = writeln!(out, "  - Evidence: {}", attr.clue.key);
                    }
                }
            }
        }
    }
    out
}
