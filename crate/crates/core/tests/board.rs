use clueboard_core::board::*;
use clueboard_core::scenario::{generate_store, use_case_graph, ScenarioSpec};
use clueboard_core::store::TelemetryStore;
use clueboard_core::{Clue, Error, SeriesKey};

fn fixture() -> (clueboard_core::graph::KnowledgeGraph, TelemetryStore) {
    (use_case_graph(), generate_store(3, &ScenarioSpec::default()).unwrap())
}

fn assert_layout(s: &InvestigationSession) {
    let boxes = card_boxes(s);
    let all: Vec<_> = boxes.iter().collect();
    for (i, (a, ba)) in all.iter().enumerate() {
        for (b, bb) in &all[i + 1..] {
            assert!(!ba.overlaps(bb), "{}: cards {a} and {b} overlap", s.id());
        }
    }
    for l in &s.links {
        if let Some((p, c)) = l.hierarchy() {
            let (bp, bc) = (boxes[p], boxes[c]);
            assert!(bp.y + bp.height <= bc.y, "{}: parent {p} is not above child {c}", s.id());
        }
    }
    assert_eq!(layout_board(s, &s.meta.layout), layout_board(s, &s.meta.layout));
}

#[test]
fn random_sessions_lay_out_cleanly() {
    let (g, st) = fixture();
    let env = BoardEnv { graph: &g, store: &st };
    for seed in 0..40 {
        let s = random_session(seed, env, 30, 120).unwrap();
        assert!(s.cards.len() <= 30);
        assert_layout(&s);
    }
}

#[test]
fn export_import_round_trips() {
    let (g, st) = fixture();
    let env = BoardEnv { graph: &g, store: &st };
    for seed in 0..20 {
        let s = random_session(seed, env, 20, 80).unwrap();
        let bytes = export_session(&s).unwrap();
        let back = import_session(&bytes, env).unwrap();
        assert_eq!(back, s);
        assert_eq!(export_session(&back).unwrap(), bytes);
    }
}

#[test]
fn tampered_link_names_the_link() {
    let (g, st) = fixture();
    let env = BoardEnv { graph: &g, store: &st };
    let s = (0..50)
        .map(|seed| random_session(seed, env, 20, 80).unwrap())
        .find(|s| !s.links.is_empty())
        .expect("some session has a link");
    let mut doc: serde_json::Value = serde_json::from_slice(&export_session(&s).unwrap()).unwrap();
    doc["links"][0]["target"] = "card-9999".into();
    let err = import_session(&serde_json::to_vec(&doc).unwrap(), env).unwrap_err();
    match err {
        Error::Schema { path, message } => {
            assert_eq!(path, "links[0].target");
            assert!(message.contains(&s.links[0].id), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn edited_state_without_history_is_refused() {
    let (g, st) = fixture();
    let env = BoardEnv { graph: &g, store: &st };
    let s = random_session(4, env, 10, 40).unwrap();
    let mut doc: serde_json::Value = serde_json::from_slice(&export_session(&s).unwrap()).unwrap();
    doc["cards"][0]["instance"] = "Elsewhere".into();
    assert!(matches!(
        import_session(&serde_json::to_vec(&doc).unwrap(), env),
        Err(Error::Schema { .. })
    ));
    let mut doc: serde_json::Value = serde_json::from_slice(&export_session(&s).unwrap()).unwrap();
    doc["surprise"] = 1.into();
    assert!(matches!(
        import_session(&serde_json::to_vec(&doc).unwrap(), env),
        Err(Error::Schema { .. })
    ));
}

#[test]
fn summary_lists_conclusion_evidence() {
    let (g, st) = fixture();
    let env = BoardEnv { graph: &g, store: &st };
    let w = st.window();
    let anomaly = Clue::new(SeriesKey::new("Zone", "Zone01", "IncidentCount"), w);
    let mut s = InvestigationSession::create("demo", env, anomaly, w, LayoutConfig::default()).unwrap();
    let summary = render_summary(&s);
    assert!(summary.contains("## Context"));
    assert!(!summary.contains("## Evidence") && !summary.contains("## Conclusions"));

    s.apply(env, BoardEvent::AddClue {
        clue: Clue::new(SeriesKey::new("Zone", "Zone01", "Utilization"), w),
        via: None,
    })
    .unwrap();
    s.apply(env, BoardEvent::ValidateClue { attribute: "attr-0002".into() }).unwrap();
    s.apply(env, BoardEvent::AddAnnotation {
        shape: Shape::Text { x: 0.0, y: 0.0, text: "bad rollout".into() },
        role: Role::Conclusion,
        anchor: Some("card-0001".into()),
    })
    .unwrap();
    let summary = render_summary(&s);
    assert!(summary.contains("## Evidence\n\n- Zone: Zone01: Utilization"));
    assert!(summary.contains(
        "- bad rollout [Zone: Zone01]\n  - Evidence: Zone:Zone01:IncidentCount\n  - Evidence: Zone:Zone01:Utilization\n"
    ));
    assert_eq!(summary, render_summary(&s.clone()));
    let before_hyp = summary.find("## Conclusions").unwrap();
    assert!(summary[..before_hyp].contains("## Evidence"));
}
