use std::path::Path;
use std::process::{Command, Output};

use clueboard_client::{Client, Method};
use clueboard_server::{Service, ServiceConfig};

fn clueboard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clueboard"))
        .args(args)
        .env_remove("CLUEBOARD_SERVER")
        .output()
        .expect("binary runs")
}

fn generate(dir: &Path, seed: &str) {
    let out = clueboard(&["generate", "--seed", seed, "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

/// Response body minus the wall-clock measurements.
fn untimed(body: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(body).unwrap();
    let stats = v["stats"].as_object_mut().unwrap();
    stats.remove("elapsed_ms");
    stats.remove("max_scoring_ms");
    v
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    generate(&a, "1");
    generate(&b, "1");
    let ta = tree(&a);
    assert!(ta.iter().any(|(p, _)| p == "graph.json"));
    assert_eq!(ta, tree(&b));
}

#[tokio::test(flavor = "multi_thread")]
async fn json_output_matches_the_endpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "3");
    let mut cfg = ServiceConfig::new(&data);
    cfg.bind = "127.0.0.1:0".parse().unwrap();
    let addr = Service::bind(&cfg).await.unwrap().spawn();
    let client = Client::new(format!("http://{addr}"));
    let meta = client.meta().await.unwrap();

    let url = format!("http://{addr}");
    let cli = tokio::task::spawn_blocking(move || {
        clueboard(&["expand", "--server", &url, "--clue", "Zone:Zone02:IncidentCount", "--direction", "up", "--json"])
    })
    .await
    .unwrap();
    assert!(cli.status.success(), "{}", String::from_utf8_lossy(&cli.stderr));

    let body = serde_json::json!({
        "clue": {"key": {"concept": "Zone", "instance": "Zone02", "attribute": "IncidentCount"}, "window": meta.window},
        "direction": "up",
    });
    let api = client
        .raw(Method::POST, "/expand", &[], Some(serde_json::to_vec(&body).unwrap()))
        .await
        .unwrap();
    assert_eq!(untimed(&cli.stdout), untimed(&api));
    let parsed: clueboard_core::expand::ExpansionResult = serde_json::from_slice(&cli.stdout).unwrap();
    assert_eq!(parsed.direction, clueboard_core::expand::Direction::Up);

    let url = format!("http://{addr}");
    let alerts = tokio::task::spawn_blocking(move || clueboard(&["detect", "--server", &url, "--json"]))
        .await
        .unwrap();
    assert_eq!(alerts.stdout, client.raw(Method::GET, "/alerts", &[], None).await.unwrap());
}

#[test]
fn embedded_server_runs_expand_and_refine() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "4");
    let d = data.to_str().unwrap();
    let all = clueboard(&["expand", "--dataset", d, "--clue", "Zone:Zone02:IncidentCount", "--direction", "all"]);
    assert!(all.status.success(), "{}", String::from_utf8_lossy(&all.stderr));
    let text = String::from_utf8(all.stdout).unwrap();
    for d in ["up:", "down:", "left:", "right:", "in:"] {
        assert!(text.contains(d), "{text}");
    }
    let refine = clueboard(&["refine", "--dataset", d, "--clue", "Zone:Zone02:IncidentCount", "--select", "ErrorCode"]);
    assert!(refine.status.success(), "{}", String::from_utf8_lossy(&refine.stderr));
    assert!(String::from_utf8(refine.stdout).unwrap().contains("Filtered by ErrorCode: "));
}

#[test]
fn exit_codes() {
    assert_eq!(clueboard(&["expand", "--direction", "sideways"]).status.code(), Some(2));
    assert_eq!(clueboard(&["frobnicate"]).status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "2");
    let d = data.to_str().unwrap();
    let missing = clueboard(&["expand", "--dataset", d, "--clue", "Zone:Nowhere:IncidentCount", "--direction", "up"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    let export = clueboard(&["export", "--dataset", d, "--session", "nope"]);
    assert_eq!(export.status.code(), Some(1));

    let verify = clueboard(&["verify", "--dataset", d]);
    let report = String::from_utf8_lossy(&verify.stdout);
    assert_eq!(verify.status.code(), Some(0), "{report}");
    assert!(report.lines().all(|l| l.starts_with("PASS ")), "{report}");
}
