use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use clueboard_core::board::{export_session, BoardEvent, Role, Shape};
use clueboard_core::engine::{Engine, EngineConfig};
use clueboard_core::scenario::{generate_scenario, ScenarioSpec};
use clueboard_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    dataset: std::path::PathBuf,
    state_dir: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("data");
    generate_scenario(5, &ScenarioSpec::default(), &dataset).unwrap();
    let state_dir = dir.path().join("state");
    Fixture { _dir: dir, dataset, state_dir }
}

fn state(f: &Fixture) -> Arc<AppState> {
    let engine = Engine::load(&f.dataset, None, EngineConfig::default()).unwrap();
    Arc::new(AppState::open(engine, Some(f.state_dir.clone())).unwrap())
}

async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn raw(state: &Arc<AppState>, uri: &str) -> Vec<u8> {
    let req = Request::builder().uri(uri).body(Body::empty()).unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    resp.into_body().collect().await.unwrap().to_bytes().to_vec()
}

async fn open(state: &Arc<AppState>) -> (String, Value) {
    let meta = call(state, Method::GET, "/datasets/current/meta", None).await.1;
    let (status, session) = call(
        state,
        Method::POST,
        "/sessions",
        Some(json!({"key": {"concept": "Zone", "instance": "Zone02", "attribute": "IncidentCount"}, "range": meta["window"]})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{session}");
    (session["meta"]["id"].as_str().unwrap().to_string(), meta)
}

#[tokio::test]
async fn health_reports_version() {
    let f = fixture();
    let (status, body) = call(&state(&f), Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn unknown_session_is_not_found() {
    let f = fixture();
    let s = state(&f);
    let (status, body) = call(
        &s,
        Method::POST,
        "/sessions/nope/expand",
        Some(json!({"clue": {"key": {"concept": "Zone", "instance": "Zone02", "attribute": "IncidentCount"}, "window": {"start": 0, "end": 1}}, "direction": "up"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
    let (status, _) = call(&s, Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_name_the_field() {
    let f = fixture();
    let s = state(&f);
    let (status, body) = call(&s, Method::POST, "/sessions", Some(json!({"key": {"concept": "Zone"}, "range": {"start": 0, "end": 1}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "invalid_argument");
    assert_eq!(body["path"], "key");
    let (status, _) = call(&s, Method::GET, "/alerts?from=abc", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn graph_put_round_trips_and_rejects_bad_documents() {
    let f = fixture();
    let s = state(&f);
    let (_, graph) = call(&s, Method::GET, "/graph", None).await;
    let (status, accepted) = call(&s, Method::PUT, "/graph", Some(graph.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (_, meta) = call(&s, Method::GET, "/datasets/current/meta", None).await;
    assert_eq!(accepted["graph_version"], meta["graph_version"]);
    assert_eq!(call(&s, Method::GET, "/graph", None).await.1, graph);

    let mut bad = graph.clone();
    bad["relations"][0]["source"] = "Nowhere".into();
    let (status, body) = call(&s, Method::PUT, "/graph", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["path"], "relations[0].source");
}

#[tokio::test]
async fn monitoring_reads() {
    let f = fixture();
    let s = state(&f);
    let (status, incidents) = call(&s, Method::GET, "/incidents?filters=OSType%3DLinux", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = incidents.as_array().unwrap();
    assert!(!list.is_empty());
    assert!(list.iter().all(|i| i["os_type"] == "Linux"));
    let kpi = list[0]["kpi"].clone();
    let key = format!("{}:{}:{}", kpi["concept"].as_str().unwrap(), kpi["instance"].as_str().unwrap(), kpi["attribute"].as_str().unwrap());

    let (status, kpis) = call(&s, Method::GET, &format!("/kpis?highlight={key}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let highlighted: Vec<_> = kpis.as_array().unwrap().iter().filter(|k| k["highlighted"] == true).collect();
    assert_eq!(highlighted.len(), 1);
    assert_eq!(highlighted[0]["key"], kpi);

    let (status, alerts) = call(&s, Method::GET, "/alerts", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!alerts["alerts"].as_array().unwrap().is_empty());

    let (status, cps) = call(&s, Method::GET, "/changepoints?key=Zone:Zone02:IncidentCount", None).await;
    assert_eq!(status, StatusCode::OK, "{cps}");
}

#[tokio::test]
async fn session_flow_and_restart_replay() {
    let f = fixture();
    let s = state(&f);
    let (id, meta) = open(&s).await;
    let window = meta["window"].clone();

    let (status, expansion) = call(
        &s,
        Method::POST,
        &format!("/sessions/{id}/expand"),
        Some(json!({"clue": {"key": {"concept": "Zone", "instance": "Zone02", "attribute": "IncidentCount"}, "window": window}, "direction": "down", "k": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{expansion}");
    assert_eq!(expansion["direction"], "down");
    let first = &expansion["entries"][0];

    let events = vec![
        json!({"type": "add_clue", "clue": first["clue"], "via": {"direction": "down", "from_card": "card-0001", "path": first["path"]}}),
        json!({"type": "validate_clue", "attribute": "attr-0002"}),
        json!({"type": "add_clue", "clue": {"key": {"concept": "Zone", "instance": "Zone02", "attribute": "Utilization"}, "window": window}}),
        json!({"type": "add_annotation", "shape": {"kind": "text", "x": 10.0, "y": 20.0, "text": "rollout"}, "role": "conclusion", "anchor": "card-0002"}),
        json!({"type": "remove_clue", "attribute": "attr-0003"}),
    ];
    for e in events {
        let (status, out) = call(&s, Method::POST, &format!("/sessions/{id}/events"), Some(e)).await;
        assert_eq!(status, StatusCode::OK, "{out}");
        assert_eq!(out["changed"], true);
    }
    let (status, dup) = call(
        &s,
        Method::POST,
        &format!("/sessions/{id}/events"),
        Some(json!({"type": "add_clue", "clue": first["clue"]})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "{dup}");

    let (_, session) = call(&s, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(session["links"][0]["direction"], "down");
    assert!(session["links"][0]["note"].as_str().unwrap().starts_with("Zone Zone02 contains Cluster"));
    let (_, layout) = call(&s, Method::GET, &format!("/sessions/{id}/layout"), None).await;
    assert!(layout["card-0001"]["y"].as_f64().unwrap() < layout["card-0002"]["y"].as_f64().unwrap());
    let (_, summary) = call(&s, Method::GET, &format!("/sessions/{id}/summary"), None).await;
    assert!(summary["text"].as_str().unwrap().contains("## Conclusions"));

    let before = raw(&s, &format!("/sessions/{id}/export")).await;
    drop(s);
    let restarted = state(&f);
    let after = raw(&restarted, &format!("/sessions/{id}/export")).await;
    assert_eq!(before, after);
    let snapshot = restarted.snapshot(&id).await.unwrap();
    assert_eq!(export_session(&snapshot).unwrap(), after);
}

#[tokio::test]
async fn import_and_refine_in_session() {
    let f = fixture();
    let s = state(&f);
    let (id, meta) = open(&s).await;
    let ann = BoardEvent::AddAnnotation {
        shape: Shape::Circle { cx: 1.0, cy: 1.0, r: 4.0 },
        role: Role::Hypothesis,
        anchor: None,
    };
    s.apply(&id, ann).await.unwrap();
    let doc = raw(&s, &format!("/sessions/{id}/export")).await;
    let (status, _) = call(&s, Method::POST, "/sessions/import", Some(serde_json::from_slice(&doc).unwrap())).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, refined) = call(
        &s,
        Method::POST,
        &format!("/sessions/{id}/refine"),
        Some(json!({
            "clue": {"key": {"concept": "Zone", "instance": "Zone02", "attribute": "IncidentCount"}, "window": meta["window"]},
            "selection": {"OSType": []}
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{refined}");
    assert_eq!(refined["increasing"]["status"], "found");
    assert!(refined["note"].as_str().unwrap().starts_with("Filtered by OSType: "));
}
