//! HTTP service for the review step: a confidence-ordered queue of gated
//! segments, verdict and annotation submission, and on-demand frame, flow
//! and overlay images.
//!
//! Submissions go through one writer task that appends to the run's logs
//! before updating in-memory state, so a crash loses at most the request
//! being answered.

use std::collections::HashMap;
use std::ops::Range;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{mpsc, oneshot, RwLock};

use gunsmoke_core::eval::CaseAttributes;
use gunsmoke_core::flow::{compute_flow, flow_to_color, read_flo, read_pnm, FlowField};
use gunsmoke_core::geometry::{BBox, Point};
use gunsmoke_core::scoring::SegmentScore;
use gunsmoke_core::smoke::detect_smoke_blobs;

use crate::config::Config;
use crate::data::{discover_videos, find_video, segment_frames, Video};
use crate::manifest::{now, read_jsonl, Stage};
use crate::stages::{flo_path, localize_pair, overlay_path, video_detections, GATED, RANKED, REPORT_JSON};
use crate::store::{append, AnnotationEntry, ReviewState, ReviewStore, Verdict};
use crate::{Pipeline, PipelineError, Result};

enum WriteRequest {
    Verdict(Verdict),
    Annotation(AnnotationEntry),
}

type Reply = oneshot::Sender<std::result::Result<(), String>>;

pub struct AppState {
    config: Config,
    run_dir: PathBuf,
    videos: Vec<Video>,
    /// Final ranking, confidence descending.
    ranked: Vec<SegmentScore>,
    gated: HashMap<String, SegmentScore>,
    review: Arc<RwLock<ReviewState>>,
    writer: mpsc::Sender<(WriteRequest, Reply)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    Unreviewed,
    Confirmed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRange {
    pub first: usize,
    /// Exclusive.
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentView {
    pub segment_id: String,
    pub video_id: String,
    pub start: f64,
    pub duration: f64,
    pub confidence: f64,
    pub rank: usize,
    pub gated: bool,
    pub review_state: ReviewStatus,
    pub frames: FrameRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    #[serde(flatten)]
    pub segment: SegmentView,
    pub thumbnail: String,
    /// Gated segments still without a verdict, this one included.
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoView {
    pub video_id: String,
    pub frame_count: usize,
    pub frame_rate: f64,
    pub segments: usize,
    pub gated: usize,
    pub confirmed: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictBody {
    visible_gunshot: bool,
    reviewer: String,
    #[serde(default)]
    notes: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationBody {
    frame_index: usize,
    shooter_bbox: BBox,
    smoke_bbox: BBox,
    muzzle_point: Point,
    reviewer: String,
    #[serde(default)]
    attributes: Option<CaseAttributes>,
}

#[derive(Debug, Deserialize)]
struct SegmentQuery {
    min_conf: Option<f64>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn field_errors(fields: Vec<(String, String)>) -> Response {
    let fields: Vec<_> = fields
        .into_iter()
        .map(|(field, message)| json!({ "field": field, "message": message }))
        .collect();
    (
        StatusCode::BAD_REQUEST,
        Json(json!({ "error": "invalid request body", "fields": fields })),
    )
        .into_response()
}

fn internal(e: impl std::fmt::Display) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

/// Deserialize a JSON body, reporting the offending field.
fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> std::result::Result<T, Response> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let message = e.inner().to_string();
        let path = e.path().to_string();
        let field = if path == "." {
            // serde reports a missing field at the enclosing object
            message
                .split('`')
                .nth(1)
                .filter(|_| message.starts_with("missing field"))
                .unwrap_or("body")
                .to_string()
        } else {
            path
        };
        field_errors(vec![(field, message)])
    })
}

impl AppState {
    fn frames_of(&self, s: &SegmentScore) -> Range<usize> {
        let n = find_video(&self.videos, &s.source_id).map_or(0, |v| v.frames.len());
        segment_frames(s.start, s.duration, self.config.input.frame_rate, n)
    }

    fn view(&self, s: &SegmentScore, review: &ReviewState) -> SegmentView {
        let id = s.segment_ref().id();
        let r = self.frames_of(s);
        SegmentView {
            review_state: match review.live.get(&id) {
                None => ReviewStatus::Unreviewed,
                Some(v) if v.visible_gunshot => ReviewStatus::Confirmed,
                Some(_) => ReviewStatus::Rejected,
            },
            gated: self.gated.contains_key(&id),
            segment_id: id,
            video_id: s.source_id.clone(),
            start: s.start,
            duration: s.duration,
            confidence: s.confidence,
            rank: s.rank,
            frames: FrameRange {
                first: r.start,
                end: r.end,
            },
        }
    }

    async fn submit(&self, req: WriteRequest) -> std::result::Result<(), Response> {
        let (tx, rx) = oneshot::channel();
        self.writer
            .send((req, tx))
            .await
            .map_err(|_| internal("writer stopped"))?;
        rx.await.map_err(|_| internal("writer stopped"))?.map_err(internal)
    }

    fn flow_field(&self, video: &Video, n: usize) -> Result<FlowField> {
        let cached = self.run_dir.join(flo_path(&video.id, n));
        if cached.is_file() {
            return Ok(read_flo(cached)?);
        }
        let next = n + self.config.input.frame_stride;
        Ok(compute_flow(&video.frame(n)?, &video.frame(next)?, &self.config.flow)?)
    }
}

fn spawn_writer(store: ReviewStore, review: Arc<RwLock<ReviewState>>) -> mpsc::Sender<(WriteRequest, Reply)> {
    let (tx, mut rx) = mpsc::channel::<(WriteRequest, Reply)>(64);
    tokio::spawn(async move {
        while let Some((req, reply)) = rx.recv().await {
            let store = store.clone();
            let (req, written) = tokio::task::spawn_blocking(move || {
                let r = match &req {
                    WriteRequest::Verdict(v) => append(&store.verdicts, v),
                    WriteRequest::Annotation(a) => append(&store.annotations, a),
                };
                (req, r)
            })
            .await
            .expect("append does not panic");
            if written.is_ok() {
                let mut state = review.write().await;
                match req {
                    WriteRequest::Verdict(v) => state.apply_verdict(v),
                    WriteRequest::Annotation(a) => state.annotations.push(a),
                }
            }
            let _ = reply.send(written.map_err(|e| e.to_string()));
        }
    });
    tx
}

/// Build the router for a run whose threshold stage is done. Needs a tokio
/// runtime for the writer task.
pub fn app(pipeline: &Pipeline) -> Result<Router> {
    let manifest = pipeline.manifest()?;
    if !manifest.is_done(Stage::Threshold) {
        return Err(PipelineError::MissingInput(format!(
            "gated segments of run {}; run `gunsmoke threshold` first",
            pipeline.run_id
        )));
    }
    let ranked: Vec<SegmentScore> = read_jsonl(&pipeline.run_dir.join(RANKED))?;
    let gated: Vec<SegmentScore> = read_jsonl(&pipeline.run_dir.join(GATED))?;
    let store = ReviewStore::in_run(&pipeline.run_dir);
    let review = Arc::new(RwLock::new(store.load()?));
    let state = AppState {
        config: pipeline.config.clone(),
        run_dir: pipeline.run_dir.clone(),
        videos: discover_videos(&pipeline.config.input.videos_dir)?,
        ranked,
        gated: gated.into_iter().map(|s| (s.segment_ref().id(), s)).collect(),
        writer: spawn_writer(store, review.clone()),
        review,
    };
    Ok(router(Arc::new(state)))
}

fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/videos", get(list_videos))
        .route("/api/videos/{id}/segments", get(list_segments))
        .route("/api/review/next", get(next_segment))
        .route("/api/segments/{id}/verdict", post(post_verdict))
        .route("/api/segments/{id}/annotations", post(post_annotation))
        .route("/api/segments/{id}/{kind}/{n}", get(segment_image))
        .route("/api/report", get(report))
        .route("/api/schema", get(schema))
        .with_state(state)
}

/// Bind and serve until interrupted.
pub async fn serve(pipeline: &Pipeline, bind: &str) -> Result<()> {
    let router = app(pipeline)?;
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| PipelineError::Bind {
            addr: bind.to_string(),
            message: e.to_string(),
        })?;
    log::info!(
        "review service for run {} on http://{}",
        pipeline.run_id,
        listener.local_addr()?
    );
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn list_videos(State(s): State<Arc<AppState>>) -> Json<Vec<VideoView>> {
    let review = s.review.read().await;
    let views = s
        .videos
        .iter()
        .map(|v| {
            let gated: Vec<&String> = s
                .gated
                .iter()
                .filter(|(_, g)| g.source_id == v.id)
                .map(|(id, _)| id)
                .collect();
            VideoView {
                video_id: v.id.clone(),
                frame_count: v.frames.len(),
                frame_rate: s.config.input.frame_rate,
                segments: s.ranked.iter().filter(|r| r.source_id == v.id).count(),
                gated: gated.len(),
                confirmed: gated.iter().filter(|id| review.is_confirmed(id)).count(),
            }
        })
        .collect();
    Json(views)
}

async fn list_segments(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SegmentQuery>,
) -> Response {
    if find_video(&s.videos, &id).is_none() {
        return error(StatusCode::NOT_FOUND, format!("unknown video {id}"));
    }
    let min = q.min_conf.unwrap_or(0.0);
    let review = s.review.read().await;
    let views: Vec<SegmentView> = s
        .ranked
        .iter()
        .filter(|r| r.source_id == id && r.confidence >= min)
        .map(|r| s.view(r, &review))
        .collect();
    Json(views).into_response()
}

async fn next_segment(State(s): State<Arc<AppState>>) -> Response {
    let review = s.review.read().await;
    let mut pending = s
        .ranked
        .iter()
        .filter(|r| {
            let id = r.segment_ref().id();
            s.gated.contains_key(&id) && !review.live.contains_key(&id)
        })
        .peekable();
    let Some(first) = pending.peek().copied() else {
        return StatusCode::NO_CONTENT.into_response();
    };
    let segment = s.view(first, &review);
    let item = QueueItem {
        thumbnail: format!("/api/segments/{}/frames/{}", segment.segment_id, segment.frames.first),
        remaining: pending.count(),
        segment,
    };
    Json(item).into_response()
}

async fn post_verdict(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    if !s.gated.contains_key(&id) {
        return error(StatusCode::NOT_FOUND, format!("no gated segment {id}"));
    }
    let b: VerdictBody = match parse_body(&body) {
        Ok(b) => b,
        Err(r) => return r,
    };
    if b.reviewer.trim().is_empty() {
        return field_errors(vec![("reviewer".into(), "must not be empty".into())]);
    }
    let verdict = Verdict {
        segment_id: id,
        visible_gunshot: b.visible_gunshot,
        reviewer: b.reviewer,
        timestamp: now(),
        notes: b.notes,
    };
    match s.submit(WriteRequest::Verdict(verdict.clone())).await {
        Ok(()) => (StatusCode::CREATED, Json(verdict)).into_response(),
        Err(r) => r,
    }
}

async fn post_annotation(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let Some(seg) = s.gated.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no gated segment {id}"));
    };
    let b: AnnotationBody = match parse_body(&body) {
        Ok(b) => b,
        Err(r) => return r,
    };
    if !s.review.read().await.is_confirmed(&id) {
        return error(StatusCode::CONFLICT, format!("segment {id} is not confirmed"));
    }
    let video = find_video(&s.videos, &seg.source_id).expect("gated segments come from known videos");
    let (w, h) = match video.frame_dims() {
        Ok((w, h)) => (w as f64, h as f64),
        Err(e) => return internal(e),
    };
    let mut errors = Vec::new();
    if b.reviewer.trim().is_empty() {
        errors.push(("reviewer".to_string(), "must not be empty".to_string()));
    }
    let range = s.frames_of(seg);
    if !range.contains(&b.frame_index) {
        errors.push((
            "frame_index".into(),
            format!("outside the segment's frames {}..{}", range.start, range.end),
        ));
    }
    for (name, bx) in [("shooter_bbox", &b.shooter_bbox), ("smoke_bbox", &b.smoke_bbox)] {
        if !bx.is_valid() || !bx.within(w, h) {
            errors.push((name.into(), format!("need x0 < x1, y0 < y1 inside the {w}x{h} frame")));
        }
    }
    if !BBox::new(0.0, 0.0, w, h).contains(&b.muzzle_point) {
        errors.push(("muzzle_point".into(), format!("outside the {w}x{h} frame")));
    }
    if !errors.is_empty() {
        return field_errors(errors);
    }
    let entry = AnnotationEntry {
        segment_id: id,
        video_id: seg.source_id.clone(),
        reviewer: b.reviewer,
        timestamp: now(),
        frame_index: b.frame_index,
        shooter_bbox: b.shooter_bbox,
        smoke_bbox: b.smoke_bbox,
        muzzle_point: b.muzzle_point,
        attributes: b.attributes,
    };
    match s.submit(WriteRequest::Annotation(entry.clone())).await {
        Ok(()) => (StatusCode::CREATED, Json(entry)).into_response(),
        Err(r) => r,
    }
}

fn render_image(s: &AppState, video: &Video, kind: &str, n: usize) -> Result<Vec<u8>> {
    let frame = match kind {
        "frames" => video.frame(n)?,
        "flow" => flow_to_color(&s.flow_field(video, n)?, None),
        _ => {
            let cached = s.run_dir.join(overlay_path(&video.id, n));
            if cached.is_file() {
                read_pnm(cached)?
            } else {
                let field = s.flow_field(video, n)?;
                let smoke = detect_smoke_blobs(&field, &s.config.smoke);
                let det = video_detections(&s.config, video)?;
                localize_pair(&s.config, video, n, &field, smoke, det.as_deref())?.overlay
            }
        }
    };
    Ok(frame.to_png()?)
}

async fn segment_image(
    State(s): State<Arc<AppState>>,
    UrlPath((id, kind, n)): UrlPath<(String, String, usize)>,
) -> Response {
    if !matches!(kind.as_str(), "frames" | "flow" | "overlay") {
        return error(StatusCode::NOT_FOUND, format!("unknown image kind {kind}"));
    }
    let Some(seg) = s
        .gated
        .get(&id)
        .or_else(|| s.ranked.iter().find(|r| r.segment_ref().id() == id))
    else {
        return error(StatusCode::NOT_FOUND, format!("unknown segment {id}"));
    };
    let range = s.frames_of(seg);
    if !range.contains(&n) {
        return error(
            StatusCode::NOT_FOUND,
            format!("frame {n} outside the segment's frames {}..{}", range.start, range.end),
        );
    }
    let video = find_video(&s.videos, &seg.source_id)
        .expect("segments come from known videos")
        .clone();
    if kind != "frames" && n + s.config.input.frame_stride >= video.frames.len() {
        return error(StatusCode::NOT_FOUND, format!("frame {n} has no successor for flow"));
    }
    let state = s.clone();
    match tokio::task::spawn_blocking(move || render_image(&state, &video, &kind, n)).await {
        Ok(Ok(png)) => ([(header::CONTENT_TYPE, "image/png")], png).into_response(),
        Ok(Err(e)) => internal(e),
        Err(e) => internal(e),
    }
}

async fn report(State(s): State<Arc<AppState>>) -> Response {
    let path = s.run_dir.join(REPORT_JSON);
    match std::fs::read(&path) {
        Ok(bytes) => match serde_json::from_slice::<serde_json::Value>(&bytes) {
            Ok(v) => Json(v).into_response(),
            Err(e) => internal(e),
        },
        Err(_) => error(StatusCode::NOT_FOUND, "no report yet; run the eval stage"),
    }
}

async fn schema() -> Json<serde_json::Value> {
    Json(json!({
        "smoke_color": ["grey", "orange"],
        "background_color": ["grey", "white"],
        "resolution_class": ["good", "medium", "bad"],
        "gun_position": ["pointed_up", "sideways", "behind"],
        "obstruction": ["nothing", "people", "tree"],
        "pose": ["standing", "kneeling", "lying", "walking"],
        "smoke_intensity": { "min": 1, "max": 5 },
        "flags": ["camera_far", "gun_stable", "shooter_moves", "camera_moves"],
    }))
}
