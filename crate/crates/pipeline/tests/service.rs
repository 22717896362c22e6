use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use gunsmoke_core::flow::write_ppm;
use gunsmoke_core::scoring::{SegmentScore, Stage as ScoreStage};
use gunsmoke_core::synthetic::{shift_wrapped, textured_frame};
use gunsmoke_pipeline::manifest::{write_jsonl, RunManifest, StageStatus};
use gunsmoke_pipeline::stages::{GATED, RANKED};
use gunsmoke_pipeline::store::{AnnotationEntry, ReviewStore};
use gunsmoke_pipeline::{service, Config, Pipeline, PipelineError, RunOptions, Stage};

const CONFIDENCES: [f64; 5] = [0.8, 0.9, 0.5, 0.75, 0.7];

fn seg(start: f64, confidence: f64, rank: usize) -> SegmentScore {
    SegmentScore {
        source_id: "v".into(),
        start,
        duration: 3.0,
        margin: confidence - 0.5,
        confidence,
        rank,
        stage: ScoreStage::Reranked,
    }
}

/// A run with threshold done over one 10-frame video; segment `v@{k}000`
/// has confidence `CONFIDENCES[k]`.
fn run_with_gated(root: &Path) -> Pipeline {
    let vdir = root.join("videos/v/frames");
    std::fs::create_dir_all(&vdir).unwrap();
    std::fs::write(root.join("videos/v/audio.wav"), b"").unwrap();
    let base = textured_frame(3, 32, 32);
    for n in 0..10 {
        write_ppm(vdir.join(format!("f{n:03}.ppm")), &shift_wrapped(&base, n as isize, 0)).unwrap();
    }
    let mut config = Config::default();
    config.input.videos_dir = root.join("videos");
    config.output.runs_dir = root.join("runs");
    let p = Pipeline::open(
        config.clone(),
        &RunOptions {
            run_id: Some("svc".into()),
            no_review: false,
        },
    )
    .unwrap();

    let mut ranked: Vec<SegmentScore> = CONFIDENCES
        .iter()
        .enumerate()
        .map(|(k, &c)| seg(k as f64, c, 0))
        .collect();
    ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    ranked.iter_mut().enumerate().for_each(|(i, s)| s.rank = i + 1);
    let gated: Vec<SegmentScore> = ranked.iter().filter(|s| s.confidence > 0.7).cloned().collect();
    write_jsonl(&p.run_dir.join(RANKED), &ranked).unwrap();
    write_jsonl(&p.run_dir.join(GATED), &gated).unwrap();
    let mut m = RunManifest::new("svc", config);
    for s in Stage::Threshold.with_prerequisites() {
        m.record_mut(s).status = StageStatus::Done;
    }
    m.save(&p.run_dir).unwrap();
    p
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (
        s,
        if b.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&b).unwrap()
        },
    )
}

fn verdict(yes: bool) -> Value {
    json!({ "visible_gunshot": yes, "reviewer": "ana" })
}

#[tokio::test]
async fn queue_is_confidence_descending_and_verdicts_advance_it() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    let app = service::app(&p).unwrap();
    let mut seen = Vec::new();
    loop {
        let (status, item) = call_json(&app, "GET", "/api/review/next", None).await;
        if status == StatusCode::NO_CONTENT {
            break;
        }
        assert_eq!(status, StatusCode::OK);
        let id = item["segment_id"].as_str().unwrap().to_string();
        assert_eq!(item["review_state"], "unreviewed");
        assert_eq!(
            item["thumbnail"],
            format!("/api/segments/{id}/frames/{}", item["frames"]["first"])
        );
        seen.push(item["confidence"].as_f64().unwrap());
        let (s, _) = call_json(
            &app,
            "POST",
            &format!("/api/segments/{id}/verdict"),
            Some(verdict(true)),
        )
        .await;
        assert_eq!(s, StatusCode::CREATED);
    }
    // 0.7 is not above the gate
    assert_eq!(seen, vec![0.9, 0.8, 0.75]);
    let state = ReviewStore::in_run(&p.run_dir).load().unwrap();
    assert_eq!(state.history.len(), 3);
}

#[tokio::test]
async fn segment_listing_filters_inclusively_and_reports_review_state() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    let app = service::app(&p).unwrap();
    call_json(&app, "POST", "/api/segments/v@0/verdict", Some(verdict(false))).await;
    let (s, list) = call_json(&app, "GET", "/api/videos/v/segments?min_conf=0.75", None).await;
    assert_eq!(s, StatusCode::OK);
    let list = list.as_array().unwrap();
    let confs: Vec<f64> = list.iter().map(|v| v["confidence"].as_f64().unwrap()).collect();
    assert_eq!(confs, vec![0.9, 0.8, 0.75]);
    let v0 = list.iter().find(|v| v["segment_id"] == "v@0").unwrap();
    assert_eq!(v0["review_state"], "rejected");
    assert_eq!(v0["frames"], json!({ "first": 0, "end": 6 }));

    let (_, all) = call_json(&app, "GET", "/api/videos/v/segments", None).await;
    assert_eq!(all.as_array().unwrap().len(), 5);
    let (s, _) = call_json(&app, "GET", "/api/videos/nope/segments", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (_, videos) = call_json(&app, "GET", "/api/videos", None).await;
    assert_eq!(videos[0]["video_id"], "v");
    assert_eq!(videos[0]["frame_count"], 10);
    assert_eq!(videos[0]["gated"], 3);
    assert_eq!(videos[0]["confirmed"], 0);
}

#[tokio::test]
async fn malformed_bodies_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    let app = service::app(&p).unwrap();
    let cases = [
        (json!({ "visible_gunshot": true }), "reviewer"),
        (json!({ "visible_gunshot": "yes", "reviewer": "a" }), "visible_gunshot"),
        (json!({ "visible_gunshot": true, "reviewer": "  " }), "reviewer"),
        (json!({ "visible_gunshot": true, "reviewer": "a", "extra": 1 }), "extra"),
        (json!([]), "body"),
    ];
    for (body, field) in cases {
        let (s, err) = call_json(&app, "POST", "/api/segments/v@1000/verdict", Some(body.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(err["fields"][0]["field"], field, "{body}: {err}");
    }
    let (s, _) = call_json(&app, "POST", "/api/segments/v@2000/verdict", Some(verdict(true))).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "ungated segments take no verdicts");
    let (s, _) = call_json(&app, "POST", "/api/segments/zzz/verdict", Some(verdict(true))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(ReviewStore::in_run(&p.run_dir).load().unwrap().history.is_empty());
}

#[tokio::test]
async fn annotations_need_a_confirmed_segment_and_valid_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    let app = service::app(&p).unwrap();
    let good = json!({
        "frame_index": 2,
        "shooter_bbox": [2, 4, 10, 30],
        "smoke_bbox": [12, 2, 20, 10],
        "muzzle_point": [11, 8],
        "reviewer": "ana",
        "attributes": {
            "smoke_color": "grey", "smoke_intensity": 2, "background_color": "white",
            "resolution_class": "medium", "camera_far": true, "gun_stable": true,
            "shooter_moves": false, "camera_moves": false, "gun_position": "pointed_up",
            "obstruction": "tree", "pose": "kneeling"
        }
    });
    let url = "/api/segments/v@1000/annotations";
    let (s, _) = call_json(&app, "POST", url, Some(good.clone())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    call_json(&app, "POST", "/api/segments/v@1000/verdict", Some(verdict(true))).await;

    let mut bad = good.clone();
    bad["shooter_bbox"] = json!([10, 4, 2, 30]);
    bad["frame_index"] = json!(9);
    let (s, err) = call_json(&app, "POST", url, Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let fields: Vec<&str> = err["fields"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["field"].as_str().unwrap())
        .collect();
    assert_eq!(fields, vec!["frame_index", "shooter_bbox"]);

    let mut bad = good.clone();
    bad["attributes"]["smoke_intensity"] = json!(6);
    let (s, err) = call_json(&app, "POST", url, Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["fields"][0]["field"], "attributes.smoke_intensity");

    let (s, _) = call_json(&app, "POST", url, Some(good)).await;
    assert_eq!(s, StatusCode::CREATED);
    let entries: Vec<AnnotationEntry> =
        gunsmoke_pipeline::store::replay(&ReviewStore::in_run(&p.run_dir).annotations).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].frame_index, 2);
    assert_eq!(entries[0].attributes.unwrap().smoke_intensity.get(), 2);
}

#[tokio::test]
async fn images_are_png_and_limited_to_the_segment() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    let app = service::app(&p).unwrap();
    for kind in ["frames", "flow", "overlay"] {
        let (s, body) = call(&app, "GET", &format!("/api/segments/v@1000/{kind}/3"), None).await;
        assert_eq!(s, StatusCode::OK, "{kind}");
        assert_eq!(&body[..8], b"\x89PNG\r\n\x1a\n", "{kind}");
    }
    // v@1000 covers frames 2..8
    let (s, _) = call(&app, "GET", "/api/segments/v@1000/frames/1", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/api/segments/v@1000/thumbs/3", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn report_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    let app = service::app(&p).unwrap();
    let (s, _) = call_json(&app, "GET", "/api/report", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    std::fs::create_dir_all(p.run_dir.join("eval")).unwrap();
    std::fs::write(p.run_dir.join("eval/report.json"), br#"{"denominator": 3}"#).unwrap();
    let (s, r) = call_json(&app, "GET", "/api/report", None).await;
    assert_eq!((s, r), (StatusCode::OK, json!({ "denominator": 3 })));
    let (s, schema) = call_json(&app, "GET", "/api/schema", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(schema["smoke_intensity"], json!({ "min": 1, "max": 5 }));
}

#[tokio::test]
async fn state_survives_restart_and_corruption_refuses_start() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    {
        let app = service::app(&p).unwrap();
        call_json(&app, "POST", "/api/segments/v@1000/verdict", Some(verdict(true))).await;
    }
    let app = service::app(&p).unwrap();
    let (_, next) = call_json(&app, "GET", "/api/review/next", None).await;
    assert_eq!(next["segment_id"], "v@0");

    let store = ReviewStore::in_run(&p.run_dir);
    let mut text = std::fs::read_to_string(&store.verdicts).unwrap();
    text.push_str("{\"segment_id\":");
    std::fs::write(&store.verdicts, text).unwrap();
    match service::app(&p) {
        Err(e @ PipelineError::CorruptStore { line: 2, .. }) => assert!(e.to_string().contains("hint")),
        other => panic!("{:?}", other.err()),
    }
}

#[tokio::test]
async fn service_needs_the_threshold_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = Config::default();
    config.input.videos_dir = dir.path().join("videos");
    config.output.runs_dir = dir.path().join("runs");
    let p = Pipeline::open(config, &RunOptions::default()).unwrap();
    assert!(matches!(service::app(&p), Err(PipelineError::MissingInput(_))));
}

#[tokio::test]
async fn port_in_use_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = run_with_gated(dir.path());
    let held = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = held.local_addr().unwrap().to_string();
    match service::serve(&p, &addr).await {
        Err(e @ PipelineError::Bind { .. }) => assert!(e.to_string().contains("--bind")),
        other => panic!("{other:?}"),
    }
}
