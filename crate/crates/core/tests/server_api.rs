use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use pebench::fidelity::{Answer, AnnotationStore, FidelityAnnotation};
use pebench::server::{router, AppState};
use pebench::transcript::{read_corpus_file, CorpusLabel};

fn app(dir: &std::path::Path) -> Router {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/five_sessions.jsonl");
    let corpus = read_corpus_file(&path, CorpusLabel::Real).unwrap().normalized(&Default::default()).unwrap();
    router(Arc::new(AppState::new(corpus, AnnotationStore::open(dir).unwrap())), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn annotation(session: &str, annotator: &str, version: u64) -> Value {
    let mut a = FidelityAnnotation::uniform(session, annotator, Answer::Yes);
    a.set_answer("suds_monitored_5min", Answer::No);
    a.version = version;
    let mut v = serde_json::to_value(a).unwrap();
    v["spans"] = json!([{"turn_index": 2, "category": "role_drift", "note": "reflective listening"}]);
    v
}

#[tokio::test]
async fn browse_sessions_and_checklist() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (status, list) = call(&app, "GET", "/api/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 5);
    assert_eq!(list[0], json!({"session_id": "fx-001", "turn_count": 12, "annotated": false}));

    let (status, s) = call(&app, "GET", "/api/sessions/fx-003", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["turns"].as_array().unwrap().len(), 6);
    assert_eq!(s["turns"][0]["speaker"], "therapist");

    let (status, err) = call(&app, "GET", "/api/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");

    let (status, items) = call(&app, "GET", "/api/checklist", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(items.as_array().unwrap().len(), 11);

    let (status, _) = call(&app, "GET", "/api/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn annotation_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let uri = "/api/sessions/fx-001/annotation";

    let (status, _) = call(&app, "GET", uri, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", &format!("{uri}?annotator=dr_b"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, stored) = call(&app, "PUT", uri, Some(annotation("fx-001", "dr_b", 0))).await;
    assert_eq!(status, StatusCode::OK, "{stored}");
    assert_eq!(stored["version"], 1);
    assert_eq!(stored["spans"][0]["annotator_id"], "dr_b");
    assert!(stored["updated_at"].is_string());

    let (status, got) = call(&app, "GET", &format!("{uri}?annotator=dr_b"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, stored);

    // A stale base version is rejected and nothing changes.
    let (status, err) = call(&app, "PUT", uri, Some(annotation("fx-001", "dr_b", 0))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "version_conflict");
    let (status, next) = call(&app, "PUT", uri, Some(annotation("fx-001", "dr_b", 1))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(next["version"], 2);

    let (_, list) = call(&app, "GET", "/api/sessions", None).await;
    assert_eq!(list[0]["annotated"], true);
    assert_eq!(list[1]["annotated"], false);

    let (status, summary) = call(&app, "GET", "/api/summary", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["adherence"]["scored"], 1);
    assert!((summary["adherence"]["mean"].as_f64().unwrap() - 10.0 / 11.0).abs() < 1e-12);
    assert_eq!(summary["violations"]["violations"]["role_drift"]["count"], 1);
    assert_eq!(summary["by_annotator"]["dr_b"]["annotations"], 1);
}

#[tokio::test]
async fn invalid_writes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let uri = "/api/sessions/fx-002/annotation";

    let (status, err) = call(&app, "PUT", uri, Some(annotation("fx-001", "a", 0))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("session_mismatch")));

    let mut bad = annotation("fx-002", "a", 0);
    bad["spans"][0]["turn_index"] = json!(99);
    let (status, _) = call(&app, "PUT", uri, Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let mut bad = annotation("fx-002", "a", 0);
    bad["items"][0]["answer"] = json!("maybe");
    let (status, _) = call(&app, "PUT", uri, Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let mut bad = annotation("fx-002", "a", 0);
    bad["extra"] = json!(1);
    let (status, _) = call(&app, "PUT", uri, Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, "PUT", "/api/sessions/zzz/annotation", Some(annotation("zzz", "a", 0))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_writers_one_winner_per_version() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let uri = "/api/sessions/fx-004/annotation";
    for base in 0..3u64 {
        let tasks: Vec<_> = (0..16)
            .map(|_| {
                let app = app.clone();
                tokio::spawn(async move { call(&app, "PUT", uri, Some(annotation("fx-004", "racer", base))).await })
            })
            .collect();
        let mut ok = 0;
        let mut conflict = 0;
        for t in tasks {
            match t.await.unwrap().0 {
                StatusCode::OK => ok += 1,
                StatusCode::CONFLICT => conflict += 1,
                other => panic!("unexpected status {other}"),
            }
        }
        assert_eq!((ok, conflict), (1, 15), "base version {base}");
    }
    let (_, got) = call(&app, "GET", &format!("{uri}?annotator=racer"), None).await;
    assert_eq!(got["version"], 3);
    // no temp files left behind
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["fx-004__racer.json".to_string()]);
}

#[tokio::test]
async fn cors_preflight_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/sessions")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "PUT")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
