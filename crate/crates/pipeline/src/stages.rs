//! Bodies of the nine stages. Each reads its inputs from earlier stages'
//! artifacts in the run directory and writes its own, so any stage can be
//! rerun alone once its prerequisites are done.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gunsmoke_core::audio::{
    build_codebook, encode_bow, read_wav, segment_windows, BowVector, Codebook, MfccExtractor, MfccFrame, SegmentRef,
};
use gunsmoke_core::eval::{
    evaluate_case, load_annotations, summarize_report, CaseAnnotation, CaseResult, EventPrediction, PredictedSmoke,
};
use gunsmoke_core::flow::{compute_flow, flow_to_color, read_flo, write_flo, write_ppm, FlowField, Frame};
use gunsmoke_core::scoring::{score_segments, spr_rerank, threshold_filter, train_linear_svm, SegmentScore, SvmModel};
use gunsmoke_core::shooter::{
    baseline_person_proposals, load_person_detections, localize_muzzle, match_shooter, render_overlay,
    LocalizationRecord, MuzzleEstimate, PersonBox,
};
use gunsmoke_core::smoke::{detect_smoke, flow_magnitude_stats, motion_mask, BlobRecord, SmokeBlob};

use crate::config::Config;
use crate::data::{discover_videos, find_video, segment_frames, wav_files, Video};
use crate::manifest::{read_jsonl, write_atomic, write_jsonl, Stage};
use crate::store::ReviewStore;
use crate::{PipelineError, Result};

pub const CODEBOOK: &str = "audio/codebook.json";
pub const FEATURES: &str = "audio/features.jsonl";
pub const TRAINING: &str = "audio/training.jsonl";
pub const MODEL: &str = "score/model.json";
pub const RANKED_INITIAL: &str = "score/ranked_initial.jsonl";
pub const RANKED: &str = "rerank/ranked.jsonl";
pub const GATED: &str = "threshold/gated.jsonl";
pub const CONFIRMED: &str = "review/confirmed.jsonl";
pub const FLOW_DIR: &str = "flow";
pub const FLOW_PAIRS: &str = "flow/pairs.jsonl";
pub const BLOBS: &str = "smoke/blobs.jsonl";
pub const FRAME_STATS: &str = "smoke/frames.jsonl";
pub const LOCALIZATIONS: &str = "localize/localizations.jsonl";
pub const DIAGNOSTICS: &str = "localize/diagnostics.jsonl";
pub const OVERLAY_DIR: &str = "localize/overlays";
pub const RESULTS: &str = "eval/results.jsonl";
pub const REPORT_JSON: &str = "eval/report.json";
pub const REPORT_TEXT: &str = "eval/report.txt";

/// One line of the per-segment feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub source_id: String,
    pub start: f64,
    pub duration: f64,
    pub histogram: Vec<f64>,
}

impl From<BowVector> for FeatureRecord {
    fn from(b: BowVector) -> Self {
        Self {
            source_id: b.segment.source_id,
            start: b.segment.start,
            duration: b.segment.duration,
            histogram: b.histogram,
        }
    }
}

impl FeatureRecord {
    pub fn bow(&self) -> BowVector {
        BowVector {
            histogram: self.histogram.clone(),
            segment: SegmentRef::new(self.source_id.clone(), self.start, self.duration),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub source_id: String,
    pub label: i8,
    pub histogram: Vec<f64>,
}

/// A computed flow field between `frame_index` and `next_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPair {
    pub video_id: String,
    pub frame_index: usize,
    pub next_index: usize,
    /// Relative to the run directory.
    pub flo: String,
    pub viz: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoBlob {
    pub video_id: String,
    /// Position within the frame's blobs, strongest first.
    pub blob_index: usize,
    #[serde(flatten)]
    pub record: BlobRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub video_id: String,
    pub frame_index: usize,
    pub background_median_mag: f64,
    pub moving_fraction: f64,
    pub threshold: f64,
    pub global_motion: bool,
    pub blob_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoLocalization {
    pub video_id: String,
    pub blob_index: usize,
    pub shooter_score: f64,
    #[serde(flatten)]
    pub record: LocalizationRecord,
}

/// A blob for which no shooter was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub video_id: String,
    pub frame_index: usize,
    pub blob_index: usize,
    pub reason: String,
}

pub struct StageCtx<'a> {
    pub config: &'a Config,
    pub run_dir: &'a Path,
    pub no_review: bool,
}

impl StageCtx<'_> {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.run_dir.join(rel)
    }

    fn videos(&self) -> Result<Vec<Video>> {
        discover_videos(&self.config.input.videos_dir)
    }
}

#[derive(Debug, Default)]
pub struct StageOutput {
    pub artifacts: Vec<String>,
    pub note: Option<String>,
}

impl StageOutput {
    fn of(artifacts: &[&str]) -> Self {
        Self {
            artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
            note: None,
        }
    }
}

pub fn execute(stage: Stage, ctx: &StageCtx) -> Result<StageOutput> {
    match stage {
        Stage::Audio => audio(ctx),
        Stage::Score => score(ctx),
        Stage::Rerank => rerank(ctx),
        Stage::Threshold => threshold(ctx),
        Stage::Review => review(ctx),
        Stage::Flow => flow(ctx),
        Stage::Smoke => smoke(ctx),
        Stage::Localize => localize(ctx),
        Stage::Eval => eval(ctx),
    }
}

fn clip_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn extractor(ctx: &StageCtx, sample_rate: u32) -> Result<MfccExtractor> {
    Ok(MfccExtractor::new(ctx.config.audio.mfcc.clone(), sample_rate)?)
}

fn audio(ctx: &StageCtx) -> Result<StageOutput> {
    let tdir = &ctx.config.input.training_dir;
    let mut clips = Vec::new();
    for (sub, label) in [("positive", 1i8), ("negative", -1i8)] {
        let files = wav_files(&tdir.join(sub))?;
        if files.is_empty() {
            return Err(PipelineError::MissingInput(format!(
                "{sub} training clips in {}",
                tdir.display()
            )));
        }
        clips.extend(files.into_iter().map(|f| (f, label)));
    }
    let clip_frames: Vec<(String, i8, Vec<MfccFrame>)> = clips
        .par_iter()
        .map(|(path, label)| {
            let signal = read_wav(path)?;
            let frames = extractor(ctx, signal.sample_rate)?.compute(&signal)?;
            Ok((
                format!("{}/{}", if *label > 0 { "positive" } else { "negative" }, clip_id(path)),
                *label,
                frames,
            ))
        })
        .collect::<Result<_>>()?;
    let all: Vec<MfccFrame> = clip_frames.iter().flat_map(|(_, _, f)| f.iter().cloned()).collect();
    let codebook = build_codebook(&all, ctx.config.audio.codebook)?;
    info!(
        "codebook: {} codewords from {} frames",
        codebook.centroids.len(),
        all.len()
    );

    let training: Vec<TrainingRecord> = clip_frames
        .iter()
        .map(|(id, label, frames)| {
            let bow = encode_bow(frames, &codebook, SegmentRef::new(id.clone(), 0.0, 0.0))?;
            Ok(TrainingRecord {
                source_id: id.clone(),
                label: *label,
                histogram: bow.histogram,
            })
        })
        .collect::<Result<_>>()?;

    let videos = ctx.videos()?;
    let (window, stride) = (ctx.config.audio.window, ctx.config.audio.stride);
    let per_video: Vec<Vec<FeatureRecord>> = videos
        .par_iter()
        .map(|v| {
            let mut signal = read_wav(&v.audio)?;
            signal.source_id = v.id.clone();
            let ex = extractor(ctx, signal.sample_rate)?;
            let segs = segment_windows(&signal, window, stride);
            if segs.is_empty() {
                warn!(
                    "video {}: {:.2} s of audio is shorter than one window",
                    v.id,
                    signal.duration_secs()
                );
            }
            segs.iter()
                .map(|s| {
                    let frames = ex.compute_samples(signal.slice(s), s.start)?;
                    Ok(encode_bow(&frames, &codebook, s.segment_ref())?.into())
                })
                .collect::<Result<Vec<FeatureRecord>>>()
        })
        .collect::<Result<_>>()?;
    let features: Vec<FeatureRecord> = per_video.into_iter().flatten().collect();

    write_atomic(
        &ctx.path(CODEBOOK),
        &serde_json::to_vec(&codebook).expect("serializable"),
    )?;
    write_jsonl(&ctx.path(FEATURES), &features)?;
    write_jsonl(&ctx.path(TRAINING), &training)?;
    let mut out = StageOutput::of(&[CODEBOOK, FEATURES, TRAINING]);
    out.note = Some(format!("{} segments from {} videos", features.len(), videos.len()));
    Ok(out)
}

/// Codebook written by the audio stage.
pub fn load_codebook(run_dir: &Path) -> Result<Codebook> {
    let path = run_dir.join(CODEBOOK);
    let text =
        std::fs::read_to_string(&path).map_err(|e| PipelineError::MissingInput(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::CorruptArtifact {
        path,
        line: 1,
        message: e.to_string(),
    })
}

fn bows(ctx: &StageCtx) -> Result<Vec<BowVector>> {
    Ok(read_jsonl::<FeatureRecord>(&ctx.path(FEATURES))?
        .iter()
        .map(FeatureRecord::bow)
        .collect())
}

fn score(ctx: &StageCtx) -> Result<StageOutput> {
    let training: Vec<TrainingRecord> = read_jsonl(&ctx.path(TRAINING))?;
    let xs: Vec<Vec<f64>> = training.iter().map(|t| t.histogram.clone()).collect();
    let ys: Vec<i8> = training.iter().map(|t| t.label).collect();
    let model = train_linear_svm(&xs, &ys, &vec![1.0; xs.len()], ctx.config.scoring.svm)?;
    let correct = xs.iter().zip(&ys).filter(|(x, &y)| model.predict(x) == y).count();
    info!("svm training accuracy {correct}/{}", xs.len());
    let ranked = score_segments(&model, &bows(ctx)?)?;
    write_atomic(&ctx.path(MODEL), model.to_json().as_bytes())?;
    write_jsonl(&ctx.path(RANKED_INITIAL), &ranked)?;
    let mut out = StageOutput::of(&[MODEL, RANKED_INITIAL]);
    out.note = Some(format!("training accuracy {correct}/{}", xs.len()));
    Ok(out)
}

pub fn load_model(run_dir: &Path) -> Result<SvmModel> {
    let path = run_dir.join(MODEL);
    let text =
        std::fs::read_to_string(&path).map_err(|e| PipelineError::MissingInput(format!("{}: {e}", path.display())))?;
    Ok(SvmModel::from_json(&text)?)
}

fn rerank(ctx: &StageCtx) -> Result<StageOutput> {
    let initial: Vec<SegmentScore> = read_jsonl(&ctx.path(RANKED_INITIAL))?;
    let mut out = StageOutput::of(&[RANKED]);
    let ranked = if !ctx.config.scoring.rerank {
        out.note = Some("disabled; initial ranking kept".into());
        initial
    } else if initial.len() < 2 {
        out.note = Some(format!("{} segments; too few to rerank", initial.len()));
        initial
    } else {
        spr_rerank(&initial, &bows(ctx)?, &ctx.config.scoring.spl)?
    };
    write_jsonl(&ctx.path(RANKED), &ranked)?;
    Ok(out)
}

fn threshold(ctx: &StageCtx) -> Result<StageOutput> {
    let ranked: Vec<SegmentScore> = read_jsonl(&ctx.path(RANKED))?;
    let gated = threshold_filter(&ranked, ctx.config.scoring.threshold);
    write_jsonl(&ctx.path(GATED), &gated)?;
    let mut out = StageOutput::of(&[GATED]);
    out.note = Some(format!(
        "{} of {} segments above {}",
        gated.len(),
        ranked.len(),
        ctx.config.scoring.threshold
    ));
    Ok(out)
}

fn review(ctx: &StageCtx) -> Result<StageOutput> {
    let gated: Vec<SegmentScore> = read_jsonl(&ctx.path(GATED))?;
    let mut out = StageOutput::of(&[CONFIRMED]);
    let confirmed: Vec<SegmentScore> = if ctx.no_review {
        out.note = Some(format!("review bypassed; all {} gated segments confirmed", gated.len()));
        gated
    } else {
        let state = ReviewStore::in_run(ctx.run_dir).load()?;
        let pending = gated
            .iter()
            .filter(|s| !state.live.contains_key(&s.segment_ref().id()))
            .count();
        if pending > 0 {
            warn!(
                "{pending} of {} gated segments have no verdict; run `gunsmoke serve` or pass --no-review",
                gated.len()
            );
            return Err(PipelineError::MissingInput("verdicts".into()));
        }
        let c: Vec<SegmentScore> = gated
            .into_iter()
            .filter(|s| state.is_confirmed(&s.segment_ref().id()))
            .collect();
        out.note = Some(format!("{} segments confirmed", c.len()));
        c
    };
    write_jsonl(&ctx.path(CONFIRMED), &confirmed)?;
    Ok(out)
}

/// Frame pairs `(n, n + stride)` lying inside some confirmed segment.
pub fn confirmed_pairs(
    confirmed: &[SegmentScore],
    videos: &[Video],
    fps: f64,
    stride: usize,
) -> Result<Vec<(String, usize)>> {
    let mut pairs = BTreeSet::new();
    for s in confirmed {
        let v = find_video(videos, &s.source_id).ok_or_else(|| {
            PipelineError::MissingInput(format!("video {} of segment {}", s.source_id, s.segment_ref().id()))
        })?;
        let r = segment_frames(s.start, s.duration, fps, v.frames.len());
        for n in r.clone() {
            if n + stride < r.end {
                pairs.insert((v.id.clone(), n));
            }
        }
    }
    Ok(pairs.into_iter().collect())
}

pub fn flo_path(video_id: &str, n: usize) -> String {
    format!("{FLOW_DIR}/{video_id}/{n:05}.flo")
}

pub fn overlay_path(video_id: &str, n: usize) -> String {
    format!("{OVERLAY_DIR}/{video_id}/{n:05}.ppm")
}

fn flow(ctx: &StageCtx) -> Result<StageOutput> {
    let confirmed: Vec<SegmentScore> = read_jsonl(&ctx.path(CONFIRMED))?;
    let videos = ctx.videos()?;
    let stride = ctx.config.input.frame_stride;
    let pairs = confirmed_pairs(&confirmed, &videos, ctx.config.input.frame_rate, stride)?;
    let records: Vec<FlowPair> = pairs
        .par_iter()
        .map(|(vid, n)| {
            let v = find_video(&videos, vid).expect("pairs come from known videos");
            let field = compute_flow(&v.frame(*n)?, &v.frame(n + stride)?, &ctx.config.flow)?;
            let flo = flo_path(vid, *n);
            let viz = flo.replace(".flo", ".ppm");
            std::fs::create_dir_all(ctx.path(&flo).parent().expect("nested path"))?;
            write_flo(&field, ctx.path(&flo))?;
            write_ppm(ctx.path(&viz), &flow_to_color(&field, None))?;
            Ok(FlowPair {
                video_id: vid.clone(),
                frame_index: *n,
                next_index: n + stride,
                flo,
                viz,
            })
        })
        .collect::<Result<_>>()?;
    write_jsonl(&ctx.path(FLOW_PAIRS), &records)?;
    let mut out = StageOutput::of(&[FLOW_PAIRS, FLOW_DIR]);
    out.note = Some(format!("{} frame pairs", records.len()));
    Ok(out)
}

fn smoke(ctx: &StageCtx) -> Result<StageOutput> {
    let pairs: Vec<FlowPair> = read_jsonl(&ctx.path(FLOW_PAIRS))?;
    let per_pair: Vec<(FrameStats, Vec<VideoBlob>)> = pairs
        .par_iter()
        .map(|p| {
            let field = read_flo(ctx.path(&p.flo))?;
            let det = detect_smoke(&field, &ctx.config.smoke);
            let stats = FrameStats {
                video_id: p.video_id.clone(),
                frame_index: p.frame_index,
                background_median_mag: det.report.background_median_mag,
                moving_fraction: det.report.moving_fraction,
                threshold: det.threshold,
                global_motion: det.global_motion,
                blob_count: det.blobs.len(),
            };
            let blobs = det
                .blobs
                .into_iter()
                .enumerate()
                .map(|(i, blob)| VideoBlob {
                    video_id: p.video_id.clone(),
                    blob_index: i,
                    record: BlobRecord {
                        frame_index: p.frame_index,
                        blob,
                    },
                })
                .collect();
            Ok((stats, blobs))
        })
        .collect::<Result<_>>()?;
    let skipped = per_pair.iter().filter(|(s, _)| s.global_motion).count();
    let (stats, blobs): (Vec<FrameStats>, Vec<Vec<VideoBlob>>) = per_pair.into_iter().unzip();
    let blobs: Vec<VideoBlob> = blobs.into_iter().flatten().collect();
    write_jsonl(&ctx.path(BLOBS), &blobs)?;
    write_jsonl(&ctx.path(FRAME_STATS), &stats)?;
    let mut out = StageOutput::of(&[BLOBS, FRAME_STATS]);
    out.note = Some(format!(
        "{} blobs; {skipped} frames skipped for camera motion",
        blobs.len()
    ));
    Ok(out)
}

type FrameKey = (String, usize);

fn group_blobs(blobs: Vec<VideoBlob>) -> HashMap<FrameKey, Vec<SmokeBlob>> {
    let mut m: HashMap<FrameKey, Vec<(usize, SmokeBlob)>> = HashMap::new();
    for b in blobs {
        m.entry((b.video_id, b.record.frame_index))
            .or_default()
            .push((b.blob_index, b.record.blob));
    }
    m.into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|(i, _)| *i);
            (k, v.into_iter().map(|(_, b)| b).collect())
        })
        .collect()
}

/// People in frame `n`: the external detections when the video has them,
/// otherwise motion-based proposals from the flow field.
fn people_in_frame(config: &Config, detections: Option<&[PersonBox]>, field: &FlowField, n: usize) -> Vec<PersonBox> {
    match detections {
        Some(d) => d.iter().filter(|p| p.frame_index == n).cloned().collect(),
        None => baseline_person_proposals(field, n, &config.shooter.baseline),
    }
}

/// Person boxes of `video` from its detections file, if it has one.
pub fn video_detections(config: &Config, video: &Video) -> Result<Option<Vec<PersonBox>>> {
    let Some(path) = &video.detections else {
        return Ok(None);
    };
    let loaded = load_person_detections(path, video.frame_dims()?, &config.shooter.detection)?;
    let dropped = loaded.dropped_low_score + loaded.dropped_other_class + loaded.dropped_degenerate;
    if dropped > 0 {
        info!(
            "video {}: {} detections kept, {dropped} dropped",
            video.id,
            loaded.boxes.len()
        );
    }
    Ok(Some(loaded.boxes))
}

pub struct PairLocalization {
    pub localizations: Vec<VideoLocalization>,
    pub diagnostics: Vec<Diagnostic>,
    pub overlay: Frame,
}

/// Pair every blob of frame `n` with a shooter, place its muzzle and draw
/// the overlay.
pub fn localize_pair(
    config: &Config,
    video: &Video,
    n: usize,
    field: &FlowField,
    smoke: Vec<SmokeBlob>,
    detections: Option<&[PersonBox]>,
) -> Result<PairLocalization> {
    let frame = video.frame(n)?;
    let dims = (frame.width, frame.height);
    let people = people_in_frame(config, detections, field, n);
    let mut localizations = Vec::new();
    let mut estimates: Vec<MuzzleEstimate> = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, blob) in smoke.iter().enumerate() {
        let outcome = match_shooter(blob, &people, dims, &config.shooter.matching)
            .map_err(|e| e.to_string())
            .and_then(|m| {
                localize_muzzle(&m.person, blob, None, &config.shooter.matching)
                    .map(|est| (m.score, est))
                    .map_err(|e| e.to_string())
            });
        match outcome {
            Ok((score, est)) => {
                localizations.push(VideoLocalization {
                    video_id: video.id.clone(),
                    blob_index: i,
                    shooter_score: score,
                    record: est.record(n),
                });
                estimates.push(est);
            }
            Err(reason) => diagnostics.push(Diagnostic {
                video_id: video.id.clone(),
                frame_index: n,
                blob_index: i,
                reason,
            }),
        }
    }
    let stats = flow_magnitude_stats(field, config.smoke.tau_abs);
    let mask = motion_mask(field, config.smoke.threshold(stats.background_median_mag));
    let overlay = render_overlay(
        &frame,
        &flow_to_color(field, None),
        &mask,
        &people,
        &smoke,
        &estimates,
        &config.overlay,
    )?;
    Ok(PairLocalization {
        localizations,
        diagnostics,
        overlay,
    })
}

fn localize(ctx: &StageCtx) -> Result<StageOutput> {
    let pairs: Vec<FlowPair> = read_jsonl(&ctx.path(FLOW_PAIRS))?;
    let blobs = group_blobs(read_jsonl(&ctx.path(BLOBS))?);
    let videos = ctx.videos()?;
    let mut detections: HashMap<String, Vec<PersonBox>> = HashMap::new();
    for v in videos.iter().filter(|v| pairs.iter().any(|p| p.video_id == v.id)) {
        if let Some(d) = video_detections(ctx.config, v)? {
            detections.insert(v.id.clone(), d);
        }
    }

    let per_pair: Vec<(Vec<VideoLocalization>, Vec<Diagnostic>)> = pairs
        .par_iter()
        .map(|p| {
            let v = find_video(&videos, &p.video_id)
                .ok_or_else(|| PipelineError::MissingInput(format!("video {}", p.video_id)))?;
            let field = read_flo(ctx.path(&p.flo))?;
            let smoke = blobs
                .get(&(p.video_id.clone(), p.frame_index))
                .cloned()
                .unwrap_or_default();
            let loc = localize_pair(
                ctx.config,
                v,
                p.frame_index,
                &field,
                smoke,
                detections.get(&p.video_id).map(Vec::as_slice),
            )?;
            let path = ctx.path(&overlay_path(&p.video_id, p.frame_index));
            std::fs::create_dir_all(path.parent().expect("nested path"))?;
            write_ppm(&path, &loc.overlay)?;
            Ok((loc.localizations, loc.diagnostics))
        })
        .collect::<Result<_>>()?;
    let (locs, diags): (Vec<_>, Vec<_>) = per_pair.into_iter().unzip();
    let locs: Vec<VideoLocalization> = locs.into_iter().flatten().collect();
    let diags: Vec<Diagnostic> = diags.into_iter().flatten().collect();
    write_jsonl(&ctx.path(LOCALIZATIONS), &locs)?;
    write_jsonl(&ctx.path(DIAGNOSTICS), &diags)?;
    let mut out = StageOutput::of(&[LOCALIZATIONS, DIAGNOSTICS, OVERLAY_DIR]);
    out.note = Some(format!(
        "{} muzzles localized; {} blobs without a shooter",
        locs.len(),
        diags.len()
    ));
    Ok(out)
}

/// Annotations from the configured directory merged with reviewer
/// submissions. A submission replaces a file event for the same frame;
/// a video known only from submissions needs one with attributes.
pub fn merged_annotations(config: &Config, run_dir: &Path, videos: &[Video]) -> Result<Vec<CaseAnnotation>> {
    let mut cases: BTreeMap<String, CaseAnnotation> = BTreeMap::new();
    if let Some(dir) = config.input.annotations_dir.as_ref().filter(|d| d.exists()) {
        for a in load_annotations(dir)? {
            cases.insert(a.video_id.clone(), a);
        }
    }
    let state = ReviewStore::in_run(run_dir).load()?;
    let mut by_video: BTreeMap<&str, Vec<&crate::store::AnnotationEntry>> = BTreeMap::new();
    for e in &state.annotations {
        by_video.entry(e.video_id.as_str()).or_default().push(e);
    }
    for (vid, entries) in by_video {
        if !cases.contains_key(vid) {
            let Some(attrs) = entries.iter().rev().find_map(|e| e.attributes) else {
                warn!("video {vid}: reviewer boxes without attributes are ignored");
                continue;
            };
            let dims = find_video(videos, vid)
                .ok_or_else(|| PipelineError::MissingInput(format!("video {vid}")))?
                .frame_dims()?;
            cases.insert(
                vid.to_string(),
                CaseAnnotation::from_attributes(vid, attrs, dims, Vec::new()),
            );
        }
        let case = cases.get_mut(vid).expect("inserted above");
        if let Some(attrs) = entries.iter().rev().find_map(|e| e.attributes) {
            let gt = std::mem::take(&mut case.ground_truth);
            *case = CaseAnnotation::from_attributes(vid, attrs, (case.frame_width, case.frame_height), gt);
        }
        for e in entries {
            case.ground_truth.retain(|g| g.frame_index != e.frame_index);
            case.ground_truth.push(e.event());
        }
        case.ground_truth.sort_by_key(|g| g.frame_index);
    }
    Ok(cases.into_values().collect())
}

fn eval(ctx: &StageCtx) -> Result<StageOutput> {
    let videos = ctx.videos()?;
    let annotations = merged_annotations(ctx.config, ctx.run_dir, &videos)?;
    if annotations.iter().all(|a| a.ground_truth.is_empty()) {
        return Err(PipelineError::MissingInput("annotations".into()));
    }
    let blobs = group_blobs(read_jsonl(&ctx.path(BLOBS))?);
    let locs: Vec<VideoLocalization> = read_jsonl(&ctx.path(LOCALIZATIONS))?;
    let mut best_loc: HashMap<FrameKey, &VideoLocalization> = HashMap::new();
    for l in &locs {
        let e = best_loc.entry((l.video_id.clone(), l.record.frame_index)).or_insert(l);
        if l.record.confidence > e.record.confidence {
            *e = l;
        }
    }
    let mut results: Vec<CaseResult> = Vec::new();
    for a in annotations.iter().filter(|a| !a.ground_truth.is_empty()) {
        let preds: Vec<EventPrediction> = a
            .ground_truth
            .iter()
            .map(|g| {
                let key = (a.video_id.clone(), g.frame_index);
                let loc = best_loc.get(&key);
                EventPrediction {
                    frame_index: g.frame_index,
                    smoke: blobs.get(&key).and_then(|b| b.first()).map(|b| PredictedSmoke {
                        bbox: b.bbox,
                        centroid: b.centroid,
                    }),
                    shooter_bbox: loc.map(|l| l.record.shooter_bbox),
                    muzzle: loc.map(|l| l.record.muzzle.into()),
                }
            })
            .collect();
        results.extend(evaluate_case(a, &preds, &ctx.config.eval)?);
    }
    let report = summarize_report(&results, &ctx.config.eval)?;
    write_jsonl(&ctx.path(RESULTS), &results)?;
    write_atomic(
        &ctx.path(REPORT_JSON),
        &serde_json::to_vec_pretty(&report).expect("serializable"),
    )?;
    write_atomic(&ctx.path(REPORT_TEXT), report.to_text().as_bytes())?;
    let mut out = StageOutput::of(&[RESULTS, REPORT_JSON, REPORT_TEXT]);
    out.note = Some(format!("{} events", report.denominator));
    Ok(out)
}
