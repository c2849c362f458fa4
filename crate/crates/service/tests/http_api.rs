mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use utirisk_core::data::Label;
use utirisk_service::http::router;
use utirisk_service::ServiceConfig;

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn fixture(threshold: f64) -> (Router, Arc<utirisk_service::Service>, utirisk_core::data::Corpus, tempfile::TempDir) {
    let (corpus, pipeline) = common::quick_pipeline(11);
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig {
        threshold,
        snapshot_dir: Some(dir.path().to_path_buf()),
        snapshot_stem: "model".into(),
        ..Default::default()
    };
    let svc = Arc::new(common::service(pipeline, cfg));
    (router(svc.clone()), svc, corpus, dir)
}

#[tokio::test]
async fn ingest_then_read_back() {
    let (app, _, _, _dir) = fixture(0.0);
    let lines = [
        json!({"home_id": "h9", "node": "bathroom_door", "timestamp": "2021-05-01T02:10:00Z", "value": 1}),
        json!({"home_id": "h9", "node": "bathroom_door", "timestamp": "2021-05-01T02:40:00Z", "value": 2}),
        json!({"home_id": "h9", "node": "hallway_pir", "timestamp": "2021-05-02T09:00:00Z"}),
    ]
    .iter()
    .map(|v| v.to_string())
    .collect::<Vec<_>>()
    .join("\n");
    let body = format!("{lines}\nnot json\n");
    let (status, v) = call(&app, "POST", "/ingest", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["accepted"], 3);
    assert_eq!(v["rejected"].as_array().unwrap().len(), 1);
    assert_eq!(v["rejected"][0]["line"], 4);
    assert_eq!(v["scores"].as_array().unwrap().len(), 2);

    // a second batch for the same day is merged into it
    let more = json!({"home_id": "h9", "node": "bathroom_door", "timestamp": "2021-05-01T02:59:00Z"}).to_string();
    let (status, _) = call(&app, "POST", "/ingest", Some(more)).await;
    assert_eq!(status, StatusCode::OK);

    let (status, v) = call(&app, "GET", "/risk/h9/2021-05-01", None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let nodes: Vec<String> = serde_json::from_value(v["nodes"].clone()).unwrap();
    let bath = nodes.iter().position(|n| n == "bathroom_door").unwrap();
    assert_eq!(v["grid"][2][bath], 4);
    let p = v["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(v["snapshot_revision"], 1);

    let (status, v) = call(&app, "GET", "/homes", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["homes"][0]["home_id"], "h9");
    assert_eq!(v["homes"][0]["days"], 2);

    let (status, v) = call(&app, "GET", "/alerts?status=pending", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["alerts"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn validation_flow_and_error_codes() {
    let (app, svc, corpus, dir) = fixture(0.0);
    let day = corpus.labelled.iter().find(|d| d.label == Label::Uti).unwrap().matrix.clone();
    let id = svc.score_day(day.clone()).unwrap().alert.unwrap().alert_id;

    let (status, v) = call(&app, "GET", "/model", None).await;
    assert_eq!(status, StatusCode::OK);
    let uti_before = v["kernels"]["uti"].as_u64().unwrap();
    assert_eq!(v["revision"], 1);
    assert_eq!(v["classifier"], "pnn");

    let uri = format!("/alerts/{id}/validate");
    let (status, v) = call(&app, "POST", &uri, Some(json!({"outcome": "positive"}).to_string())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["alert"]["status"], "validated_positive");
    assert_eq!(v["snapshot_revision"], 2);
    assert_eq!(v["kernel_added"], true);
    assert!(dir.path().join("audit.jsonl").exists());

    let (_, v) = call(&app, "GET", "/model", None).await;
    assert_eq!(v["revision"], 2);
    assert_eq!(v["kernels"]["uti"].as_u64().unwrap(), uti_before + 1);

    let (status, v) = call(&app, "POST", &uri, Some(json!({"outcome": "negative"}).to_string())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "already_validated");

    let (status, v) = call(&app, "POST", "/alerts/424242/validate", Some(json!({"outcome": "negative"}).to_string())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_alert");

    let (status, v) = call(&app, "POST", "/alerts/abc/validate", Some(json!({"outcome": "negative"}).to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");

    let (status, _) = call(&app, "POST", &uri, Some(json!({"outcome": "maybe"}).to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, v) = call(&app, "GET", "/alerts?status=done", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");

    let (status, v) = call(&app, "GET", "/alerts?status=validated_positive", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["alerts"].as_array().unwrap().len(), 1);

    let (status, v) = call(&app, "GET", "/risk/nobody/2021-05-01", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");

    let (status, _) = call(&app, "GET", "/risk/nobody/yesterday", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, v) = call(&app, "POST", "/ingest", Some("{\"home_id\": 1}\n".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "malformed_input");

    let mixed = json!({"home_id": "h1", "node": "front_door", "timestamp": "2021-05-01T02:10:00Z"}).to_string();
    let (status, _) = call(&app, "POST", "/ingest", Some(mixed)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn reads_are_side_effect_free() {
    let (app, svc, corpus, _dir) = fixture(0.5);
    let day = corpus.unlabelled[0].clone();
    svc.score_day(day.clone()).unwrap();
    let uri = format!("/risk/{}/{}", day.home_id, day.date);
    let (_, a) = call(&app, "GET", &uri, None).await;
    let (_, b) = call(&app, "GET", &uri, None).await;
    assert_eq!(a, b);
    let (_, m) = call(&app, "GET", "/model", None).await;
    assert_eq!(m["revision"], 1);
    assert!(svc.audit_log().is_empty());
}
