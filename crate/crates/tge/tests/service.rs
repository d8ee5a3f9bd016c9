use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tge::io::{save_mesh, MeshFormat};
use tge::service::{build_state, router, AppState, ServeConfig};
use tge::store::EVENTS_FILE;
use tge_core::shapes::catalog;
use tge_core::synth::{distort, Amplitudes};
use tower::ServiceExt;

/// Group `a`: reference plus four meshes; group `b`: reference plus one.
fn dataset(root: &Path) {
    let reference = catalog(0);
    for (group, count) in [("a", 4), ("b", 1)] {
        let dir = root.join(group);
        std::fs::create_dir_all(&dir).unwrap();
        save_mesh(&reference, &dir.join("reference.ply"), Some(MeshFormat::PlyBinary)).unwrap();
        for k in 0..count {
            let mesh = distort(&reference, (k + 1) as f64, &Amplitudes::default(), k as u64).unwrap();
            let format = if k % 2 == 0 { MeshFormat::PlyAscii } else { MeshFormat::Obj };
            let ext = if k % 2 == 0 { "ply" } else { "obj" };
            save_mesh(&mesh, &dir.join(format!("level{k}.{ext}")), Some(format)).unwrap();
        }
    }
}

fn state(root: &Path) -> Arc<AppState> {
    let mut config = ServeConfig::new(root.to_path_buf(), "127.0.0.1:0".parse().unwrap());
    config.rounds_total = 6;
    build_state(&config).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn start(app: &Router, group: &str) -> String {
    let (status, v) = call_json(app, "POST", "/api/sessions", Some(json!({ "subject": "s1", "group": group }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["session"].as_str().unwrap().to_string()
}

/// Votes for the lexicographically smaller id until the session completes.
async fn finish(app: &Router, session: &str) -> usize {
    let mut votes = 0;
    loop {
        let (_, next) = call_json(app, "GET", &format!("/api/sessions/{session}/next"), None).await;
        if next["complete"] == json!(true) {
            return votes;
        }
        let (l, r) = (next["pair"]["left"].as_str().unwrap(), next["pair"]["right"].as_str().unwrap());
        let winner = l.min(r);
        let (status, v) = call_json(
            app,
            "POST",
            &format!("/api/sessions/{session}/vote"),
            Some(json!({ "left": l, "right": r, "winner": winner })),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{v}");
        votes += 1;
    }
}

#[tokio::test]
async fn groups_and_session_errors() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(state(dir.path()));
    let (status, v) = call_json(&app, "GET", "/api/groups", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = v["groups"].as_array().unwrap().iter().map(|g| g["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["a", "b"]);
    assert_eq!(v["groups"][0]["meshes"], 4);
    assert_eq!(v["groups"][0]["referenceUrl"], "/meshes/a/reference.ply");

    let (status, _) = call_json(&app, "POST", "/api/sessions", Some(json!({ "subject": "s", "group": "zzz" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call_json(&app, "POST", "/api/sessions", Some(json!({ "subject": "s", "group": "b" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "POST", "/api/sessions", Some(json!({ "group": "a" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "GET", "/api/sessions/nope/next", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn voting_contract() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(state(dir.path()));
    let id = start(&app, "a").await;
    let next = format!("/api/sessions/{id}/next");
    let vote = format!("/api/sessions/{id}/vote");

    // reading the next pair has no side effects
    let (_, first) = call_json(&app, "GET", &next, None).await;
    let (_, again) = call_json(&app, "GET", &next, None).await;
    assert_eq!(first, again);
    assert_eq!(first["round"], 1);
    let (l, r) = (first["pair"]["left"].as_str().unwrap(), first["pair"]["right"].as_str().unwrap());
    assert_eq!(first["pair"]["meshUrlLeft"], format!("/meshes/{l}"));

    let (status, _) = call_json(&app, "POST", &vote, Some(json!({ "left": l, "right": r, "winner": "a/other.ply" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "POST", &vote, Some(json!({ "left": l, "right": l, "winner": l }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    // the pair may be submitted in either order
    let (status, v) = call_json(&app, "POST", &vote, Some(json!({ "left": r, "right": l, "winner": l }))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["remaining"], 1);
    let (status, _) = call_json(&app, "POST", &vote, Some(json!({ "left": l, "right": r, "winner": r }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    // 4 participants, 6 rounds: two matches a round
    assert_eq!(finish(&app, &id).await, 11);
    let (_, done) = call_json(&app, "GET", &next, None).await;
    let scores = done["scores"].as_object().unwrap();
    assert_eq!(scores.len(), 4);
    let total: f64 = scores.values().map(|s| s.as_f64().unwrap()).sum();
    // every match hands out one win; each participant played 6
    assert!((total * 6.0 - 12.0).abs() < 1e-12, "{done}");
    assert_eq!(scores["a/level0.ply"], 1.0);
    let (status, _) = call_json(&app, "POST", &vote, Some(json!({ "left": l, "right": r, "winner": l }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn export_aggregates_completed_sessions() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(state(dir.path()));
    let (status, _) = call_json(&app, "GET", "/api/export/zzz", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let id = start(&app, "a").await;
    let (status, _) = call_json(&app, "GET", "/api/export/a", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    finish(&app, &id).await;
    let (status, v) = call_json(&app, "GET", "/api/export/a", None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["statistics"]["sessions"], 1);
    let object = &v["objects"][0];
    assert_eq!(object["id"], "a");
    assert_eq!(object["reference"], "a/reference.ply");
    assert_eq!(object["distorted"].as_array().unwrap().len(), 4);
    assert_eq!(object["distorted"][0]["score"], 1.0);
}

#[tokio::test]
async fn restart_resumes_from_the_log() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let (id, pending) = {
        let app = router(state(dir.path()));
        let id = start(&app, "a").await;
        let (_, p) = call_json(&app, "GET", &format!("/api/sessions/{id}/next"), None).await;
        let (l, r) = (p["pair"]["left"].as_str().unwrap(), p["pair"]["right"].as_str().unwrap());
        call_json(&app, "POST", &format!("/api/sessions/{id}/vote"), Some(json!({ "left": l, "right": r, "winner": r }))).await;
        let (_, p) = call_json(&app, "GET", &format!("/api/sessions/{id}/next"), None).await;
        (id, p)
    };
    // a crash in the middle of an append leaves a partial line behind
    let log = dir.path().join(".annotations").join(EVENTS_FILE);
    let mut bytes = std::fs::read(&log).unwrap();
    bytes.extend_from_slice(br#"{"event":"vote","session":"#);
    std::fs::write(&log, bytes).unwrap();

    let app = router(state(dir.path()));
    let (status, p) = call_json(&app, "GET", &format!("/api/sessions/{id}/next"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p, pending);
    assert_eq!(finish(&app, &id).await, 11);
    let app = router(state(dir.path()));
    let (_, done) = call_json(&app, "GET", &format!("/api/sessions/{id}/next"), None).await;
    assert_eq!(done["complete"], true);
}

#[tokio::test]
async fn meshes_are_served_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(state(dir.path()));
    start(&app, "a").await;
    for file in ["a/reference.ply", "a/level0.ply", "a/level1.obj"] {
        let (status, body) = call(&app, "GET", &format!("/meshes/{file}"), None).await;
        assert_eq!(status, StatusCode::OK, "{file}");
        assert_eq!(body, std::fs::read(dir.path().join(file)).unwrap());
    }
    for bad in ["/meshes/a/missing.ply", "/meshes/.annotations/events.jsonl", "/meshes/a/../a/level0.ply", "/meshes/%2e%2e/x.ply"] {
        let (status, _) = call(&app, "GET", bad, None).await;
        assert!(status.is_client_error(), "{bad}: {status}");
    }
}
