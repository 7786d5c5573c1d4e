#[path = "../../core/tests/support/tts_stub.rs"]
mod tts_stub;

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use qep_core::{QaEngine, TtsConfig};
use qep_service::{router, AppState, ServiceConfig};

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/plans").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(QaEngine::shipped(), &config), &config)
}

fn app() -> Router {
    app_with(ServiceConfig::default())
}

struct Reply {
    status: StatusCode,
    content_type: String,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|_| panic!("not JSON: {}", String::from_utf8_lossy(&self.body)))
    }

    fn error_code(&self) -> String {
        self.json()["error"]["code"].as_str().unwrap().to_string()
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, body }
}

async fn session(app: &Router) -> String {
    let r = call(app, "POST", "/api/session", "{}").await;
    assert_eq!(r.status, StatusCode::OK);
    r.json()["session_id"].as_str().unwrap().to_string()
}

async fn narrate(app: &Router, sid: &str, name: &str) -> Reply {
    call(app, "POST", &format!("/api/narrate-file?session_id={sid}"), fixture(name)).await
}

async fn ask(app: &Router, sid: &str, plan: &str, q: &str) -> Value {
    let body = json!({"session_id": sid, "plan_id": plan, "question": q}).to_string();
    let r = call(app, "POST", "/api/qa", body).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    r.json()
}

#[tokio::test]
async fn file_only_session_and_empty_body() {
    let app = app();
    let r = call(&app, "POST", "/api/session", "").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["live"], false);
}

#[tokio::test]
async fn bad_dsn_is_bad_gateway() {
    let app = app();
    let body = json!({"dsn": "postgresql://nobody@127.0.0.1:1/none?connect_timeout=2"}).to_string();
    let r = call(&app, "POST", "/api/session", body).await;
    assert_eq!(r.status, StatusCode::BAD_GATEWAY);
    assert_eq!(r.error_code(), "ConnectionFailure");
}

#[tokio::test]
async fn narrate_file_returns_golden_steps_and_verbatim_raw_plan() {
    let app = app();
    let sid = session(&app).await;
    let r = narrate(&app, &sid, "tpch_q4.json").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type, "application/json");
    let v = r.json();
    let steps = v["steps"].as_array().unwrap();
    let golden = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/golden/tpch_q4.txt")).unwrap();
    let text: String = steps
        .iter()
        .map(|s| format!("{}. {}\n", s["step_id"], s["text"].as_str().unwrap()))
        .collect();
    assert_eq!(text, golden);
    assert!(steps.iter().any(|s| s["text"].as_str().unwrap().contains("hash semi join")));

    let plan = v["plan_id"].as_str().unwrap();
    let raw = call(&app, "GET", &format!("/api/plan/{plan}/raw?session_id={sid}"), Body::empty()).await;
    assert_eq!(raw.status, StatusCode::OK);
    assert_eq!(raw.body, fixture("tpch_q4.json").into_bytes());
    let body = String::from_utf8(r.body).unwrap();
    assert!(body.contains(fixture("tpch_q4.json").trim()));
}

#[tokio::test]
async fn malformed_and_estimated_plans() {
    let app = app();
    let sid = session(&app).await;
    let r = call(&app, "POST", &format!("/api/narrate-file?session_id={sid}"), "{\"Plan\": {}}").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error_code(), "MalformedPlan");
    let r = call(&app, "POST", &format!("/api/narrate-file?session_id={sid}"), "").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error_code(), "EmptyInput");
    let r = narrate(&app, &sid, "estimated_only.json").await;
    assert_eq!(r.status, StatusCode::OK);
    for s in r.json()["steps"].as_array().unwrap() {
        assert!(s["inclusive_time_ms"].is_null() && s["actual_rows"].is_null());
    }
    let r = call(&app, "POST", &format!("/api/narrate-file?session_id={sid}"), r#"[{"Plan": {"Node Type": "Result"}}]"#).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error_code(), "UnsupportedShape");
}

#[tokio::test]
async fn sql_needs_a_live_connection() {
    let app = app();
    let sid = session(&app).await;
    let body = json!({"session_id": sid, "sql": "SELECT 1"}).to_string();
    let r = call(&app, "POST", "/api/narrate", body).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error_code(), "NoLiveConnection");
    let r = call(&app, "GET", &format!("/api/schema?session_id={sid}"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn qa_answers_in_prose_and_never_mutates_the_plan() {
    let app = app();
    let sid = session(&app).await;
    let plan = narrate(&app, &sid, "tpch_q4.json").await.json()["plan_id"].as_str().unwrap().to_string();

    let a = ask(&app, &sid, &plan, "How many tuples left after Step 5?").await;
    assert_eq!(a["category"], "RowCount");
    assert_eq!(a["payload"]["kind"], "RowCount");
    assert_eq!(a["payload"]["rows"], 5);

    let a = ask(&app, &sid, &plan, "what is a zorble").await;
    assert_eq!(a["category"], "Definition");
    assert!(a["answer_text"].as_str().unwrap().contains("no definition found"));
    assert!(a["payload"].is_null());
    assert_eq!(a["error_code"], "NoDefinitionFound");

    let first = ask(&app, &sid, &plan, "What is the most expensive operation?").await;
    let second = ask(&app, &sid, &plan, "What is the most expensive operation?").await;
    assert_eq!(first, second);
    assert_eq!(first["payload"]["kind"], "Dominant");
    let raw = call(&app, "GET", &format!("/api/plan/{plan}/raw?session_id={sid}"), Body::empty()).await;
    assert_eq!(raw.body, fixture("tpch_q4.json").into_bytes());
}

#[tokio::test]
async fn plans_are_private_to_their_session() {
    let app = app();
    let a = session(&app).await;
    let b = session(&app).await;
    let plan = narrate(&app, &a, "merge_join.json").await.json()["plan_id"].as_str().unwrap().to_string();
    let body = json!({"session_id": b, "plan_id": plan, "question": "What operators are used?"}).to_string();
    let r = call(&app, "POST", "/api/qa", body).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.error_code(), "UnknownPlan");
    let r = call(&app, "GET", &format!("/api/plan/{plan}/raw?session_id={b}"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = call(&app, "GET", &format!("/api/plan/{plan}/raw?session_id=nope"), Body::empty()).await;
    assert_eq!(r.error_code(), "UnknownSession");
}

#[tokio::test]
async fn audio_disabled_unknown_step_and_stub_server() {
    let app = app();
    let sid = session(&app).await;
    let plan = narrate(&app, &sid, "tpch_q4.json").await.json()["plan_id"].as_str().unwrap().to_string();
    let r = call(&app, "GET", &format!("/api/plan/{plan}/step/1/audio?session_id={sid}"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_IMPLEMENTED);
    assert_eq!(r.error_code(), "FeatureDisabled");

    let stub = tts_stub::spawn(b"RIFFfake", "audio/wav", 200);
    let app = app_with(ServiceConfig {
        tts: TtsConfig {
            endpoint: Some(stub.url.clone()),
            voice: "alto".into(),
            format: "wav".into(),
        },
        ..ServiceConfig::default()
    });
    let sid = session(&app).await;
    let plan = narrate(&app, &sid, "tpch_q4.json").await.json()["plan_id"].as_str().unwrap().to_string();
    let r = call(&app, "GET", &format!("/api/plan/{plan}/step/9/audio?session_id={sid}"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.error_code(), "UnknownStep");
    let uri = format!("/api/plan/{plan}/step/3/audio?session_id={sid}");
    let r = call(&app, "GET", &uri, Body::empty()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type, "audio/wav");
    assert_eq!(r.body, b"RIFFfake");
    call(&app, "GET", &uri, Body::empty()).await;
    assert_eq!(stub.hits.load(std::sync::atomic::Ordering::SeqCst), 1);
    let sent: Value = serde_json::from_str(&stub.bodies.lock().unwrap()[0]).unwrap();
    assert!(sent["text"].as_str().unwrap().contains("hash semi join"));
}

#[tokio::test]
async fn invalid_json_bodies_use_the_error_envelope() {
    let app = app();
    let r = call(&app, "POST", "/api/qa", "not json").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error_code(), "BadRequest");
}
