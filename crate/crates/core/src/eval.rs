//! Per-video annotations, success criteria and the summary report.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, Point};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("schema error in {source_name} at `{path}`: {message}")]
    SchemaError {
        source_name: String,
        path: String,
        message: String,
    },
    #[error("video {0} has no ground-truth events")]
    MissingGroundTruth(String),
    #[error("no results to summarize")]
    EmptyResults,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmokeColor {
    Grey,
    Orange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundColor {
    Grey,
    White,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionClass {
    Good,
    Medium,
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GunPosition {
    PointedUp,
    Sideways,
    Behind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Obstruction {
    Nothing,
    People,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pose {
    Standing,
    Kneeling,
    Lying,
    Walking,
}

/// Smoke intensity on the 1–5 annotation scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Intensity(u8);

impl Intensity {
    pub fn new(v: u8) -> Option<Self> {
        (1..=5).contains(&v).then_some(Self(v))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Intensity {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Self::new(v).ok_or_else(|| format!("smoke intensity {v} outside 1..=5"))
    }
}

impl From<Intensity> for u8 {
    fn from(i: Intensity) -> u8 {
        i.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthEvent {
    pub frame_index: usize,
    pub smoke_bbox: BBox,
    pub shooter_bbox: BBox,
    pub muzzle_point: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseAnnotation {
    pub video_id: String,
    pub smoke_color: SmokeColor,
    pub smoke_intensity: Intensity,
    pub background_color: BackgroundColor,
    pub resolution_class: ResolutionClass,
    pub camera_far: bool,
    pub gun_stable: bool,
    pub shooter_moves: bool,
    pub camera_moves: bool,
    pub gun_position: GunPosition,
    pub obstruction: Obstruction,
    pub pose: Pose,
    pub frame_width: usize,
    pub frame_height: usize,
    #[serde(default)]
    pub ground_truth: Vec<GroundTruthEvent>,
}

/// The per-video attributes of a [`CaseAnnotation`], without identity,
/// frame size or events. Submitted alongside boxes by reviewers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseAttributes {
    pub smoke_color: SmokeColor,
    pub smoke_intensity: Intensity,
    pub background_color: BackgroundColor,
    pub resolution_class: ResolutionClass,
    pub camera_far: bool,
    pub gun_stable: bool,
    pub shooter_moves: bool,
    pub camera_moves: bool,
    pub gun_position: GunPosition,
    pub obstruction: Obstruction,
    pub pose: Pose,
}

impl CaseAnnotation {
    pub fn from_attributes(
        video_id: impl Into<String>,
        a: CaseAttributes,
        frame_dims: (usize, usize),
        ground_truth: Vec<GroundTruthEvent>,
    ) -> Self {
        Self {
            video_id: video_id.into(),
            smoke_color: a.smoke_color,
            smoke_intensity: a.smoke_intensity,
            background_color: a.background_color,
            resolution_class: a.resolution_class,
            camera_far: a.camera_far,
            gun_stable: a.gun_stable,
            shooter_moves: a.shooter_moves,
            camera_moves: a.camera_moves,
            gun_position: a.gun_position,
            obstruction: a.obstruction,
            pose: a.pose,
            frame_width: frame_dims.0,
            frame_height: frame_dims.1,
            ground_truth,
        }
    }

    pub fn attributes(&self) -> CaseAttributes {
        CaseAttributes {
            smoke_color: self.smoke_color,
            smoke_intensity: self.smoke_intensity,
            background_color: self.background_color,
            resolution_class: self.resolution_class,
            camera_far: self.camera_far,
            gun_stable: self.gun_stable,
            shooter_moves: self.shooter_moves,
            camera_moves: self.camera_moves,
            gun_position: self.gun_position,
            obstruction: self.obstruction,
            pose: self.pose,
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.frame_width as f64).hypot(self.frame_height as f64)
    }

    /// Check what the type system cannot: boxes valid and inside the frame.
    /// Returns the offending field path.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let (w, h) = (self.frame_width as f64, self.frame_height as f64);
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(("frame_width".into(), "frame dimensions must be positive".into()));
        }
        for (i, e) in self.ground_truth.iter().enumerate() {
            for (name, b) in [("smoke_bbox", &e.smoke_bbox), ("shooter_bbox", &e.shooter_bbox)] {
                if !b.is_valid() || !b.within(w, h) {
                    return Err((
                        format!("ground_truth[{i}].{name}"),
                        format!("box {:?} invalid or outside {w}x{h}", <[f64; 4]>::from(*b)),
                    ));
                }
            }
            let p = e.muzzle_point;
            if !(p.x.is_finite() && p.y.is_finite()) || !BBox::new(0.0, 0.0, w, h).contains(&p) {
                return Err((format!("ground_truth[{i}].muzzle_point"), "point outside frame".into()));
            }
        }
        Ok(())
    }
}

/// Parse one annotation document; errors carry the JSON field path.
pub fn parse_annotation(text: &str, source_name: &str) -> Result<CaseAnnotation> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let ann: CaseAnnotation = serde_path_to_error::deserialize(de).map_err(|e| EvalError::SchemaError {
        source_name: source_name.to_string(),
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    ann.validate().map_err(|(path, message)| EvalError::SchemaError {
        source_name: source_name.to_string(),
        path,
        message,
    })?;
    Ok(ann)
}

/// Load one annotation file, or every `*.json` in a directory sorted by
/// file name.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<CaseAnnotation>> {
    let path = path.as_ref();
    let files = if path.is_dir() {
        let mut v: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    files
        .iter()
        .map(|f| parse_annotation(&std::fs::read_to_string(f)?, &f.display().to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalThresholds {
    pub smoke_iou: f64,
    pub shooter_iou: f64,
    /// Muzzle radius as a fraction of the frame diagonal.
    pub muzzle_radius: f64,
}

impl Default for EvalThresholds {
    fn default() -> Self {
        Self {
            smoke_iou: 0.3,
            shooter_iou: 0.5,
            muzzle_radius: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedSmoke {
    pub bbox: BBox,
    pub centroid: Point,
}

/// Best prediction for one annotated frame; absent parts were not detected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventPrediction {
    pub frame_index: usize,
    pub smoke: Option<PredictedSmoke>,
    pub shooter_bbox: Option<BBox>,
    pub muzzle: Option<Point>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultDetails {
    pub smoke_iou: Option<f64>,
    pub smoke_centroid_inside: Option<bool>,
    pub shooter_iou: Option<f64>,
    /// Pixels from the ground-truth muzzle.
    pub muzzle_distance: Option<f64>,
    pub muzzle_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub video_id: String,
    pub event_index: usize,
    pub smoke_success: bool,
    pub shooter_success: bool,
    pub muzzle_success: bool,
    pub details: ResultDetails,
}

/// Score each ground-truth event against the prediction for its frame.
pub fn evaluate_case(
    annotation: &CaseAnnotation,
    predictions: &[EventPrediction],
    th: &EvalThresholds,
) -> Result<Vec<CaseResult>> {
    if annotation.ground_truth.is_empty() {
        return Err(EvalError::MissingGroundTruth(annotation.video_id.clone()));
    }
    let radius = th.muzzle_radius * annotation.diagonal();
    Ok(annotation
        .ground_truth
        .iter()
        .enumerate()
        .map(|(event_index, gt)| {
            let pred = predictions.iter().find(|p| p.frame_index == gt.frame_index);
            let mut d = ResultDetails {
                muzzle_radius: radius,
                ..Default::default()
            };
            let smoke = pred.and_then(|p| p.smoke.as_ref());
            if let Some(s) = smoke {
                d.smoke_iou = Some(s.bbox.iou(&gt.smoke_bbox));
                d.smoke_centroid_inside = Some(gt.smoke_bbox.contains(&s.centroid));
            }
            d.shooter_iou = pred.and_then(|p| p.shooter_bbox).map(|b| b.iou(&gt.shooter_bbox));
            d.muzzle_distance = pred.and_then(|p| p.muzzle).map(|m| m.distance(&gt.muzzle_point));

            let smoke_success = d.smoke_iou.is_some_and(|v| v >= th.smoke_iou) || d.smoke_centroid_inside == Some(true);
            let shooter_success = d.shooter_iou.is_some_and(|v| v >= th.shooter_iou);
            let muzzle_success = smoke_success && shooter_success && d.muzzle_distance.is_some_and(|v| v <= radius);
            CaseResult {
                video_id: annotation.video_id.clone(),
                event_index,
                smoke_success,
                shooter_success,
                muzzle_success,
                details: d,
            }
        })
        .collect())
}

pub const SMOKE_HEADER: &str = "Gun Cloud Detection Success rate";
pub const SHOOTER_HEADER: &str = "Shooter Detection Rate";
pub const MUZZLE_HEADER: &str = "Muzzle Head Detection Rate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLine {
    pub header: String,
    pub successes: usize,
    /// Percentage rounded half-up to one decimal, e.g. `"69.6%"`.
    pub rate: String,
    /// The same value as tenths of a percent.
    pub rate_tenths: u64,
}

impl RateLine {
    fn new(header: &str, successes: usize, denominator: usize) -> Self {
        let tenths = percent_tenths(successes, denominator);
        Self {
            header: header.into(),
            successes,
            rate: format!("{}.{}%", tenths / 10, tenths % 10),
            rate_tenths: tenths,
        }
    }
}

/// `successes / denominator` in tenths of a percent, rounded half-up with
/// integer arithmetic.
pub fn percent_tenths(successes: usize, denominator: usize) -> u64 {
    let (s, n) = (successes as u64, denominator as u64);
    (2000 * s + n) / (2 * n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub denominator: usize,
    pub smoke: RateLine,
    pub shooter: RateLine,
    pub muzzle: RateLine,
    pub thresholds: EvalThresholds,
}

pub fn summarize_report(results: &[CaseResult], thresholds: &EvalThresholds) -> Result<Report> {
    summarize_counts(
        results.len(),
        results.iter().filter(|r| r.smoke_success).count(),
        results.iter().filter(|r| r.shooter_success).count(),
        results.iter().filter(|r| r.muzzle_success).count(),
        thresholds,
    )
}

pub fn summarize_counts(
    denominator: usize,
    smoke: usize,
    shooter: usize,
    muzzle: usize,
    thresholds: &EvalThresholds,
) -> Result<Report> {
    if denominator == 0 {
        return Err(EvalError::EmptyResults);
    }
    Ok(Report {
        denominator,
        smoke: RateLine::new(SMOKE_HEADER, smoke, denominator),
        shooter: RateLine::new(SHOOTER_HEADER, shooter, denominator),
        muzzle: RateLine::new(MUZZLE_HEADER, muzzle, denominator),
        thresholds: *thresholds,
    })
}

impl Report {
    /// Aligned text table with the thresholds in a header line.
    pub fn to_text(&self) -> String {
        let t = &self.thresholds;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# events: {}; smoke IoU >= {}, shooter IoU >= {}, muzzle radius <= {}% of diagonal",
            self.denominator,
            t.smoke_iou,
            t.shooter_iou,
            t.muzzle_radius * 100.0
        );
        let cols = [&self.smoke, &self.shooter, &self.muzzle];
        let widths: Vec<usize> = cols.iter().map(|c| c.header.len()).collect();
        let header: Vec<String> = cols
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{:<w$}", c.header))
            .collect();
        let rates: Vec<String> = cols
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{:<w$}", c.rate))
            .collect();
        let counts: Vec<String> = cols
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{:<w$}", format!("{}/{}", c.successes, self.denominator)))
            .collect();
        let _ = writeln!(out, "{}", header.join(" | ").trim_end());
        let _ = writeln!(out, "{}", rates.join(" | ").trim_end());
        let _ = writeln!(out, "{}", counts.join(" | ").trim_end());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row1_json() -> serde_json::Value {
        serde_json::json!({
            "video_id": "1",
            "smoke_color": "grey",
            "smoke_intensity": 5,
            "background_color": "grey",
            "resolution_class": "good",
            "camera_far": false,
            "gun_stable": true,
            "shooter_moves": false,
            "camera_moves": false,
            "gun_position": "sideways",
            "obstruction": "people",
            "pose": "standing",
            "frame_width": 320,
            "frame_height": 240,
            "ground_truth": [{
                "frame_index": 4,
                "smoke_bbox": [150, 60, 190, 100],
                "shooter_bbox": [60, 50, 100, 200],
                "muzzle_point": [130, 75]
            }]
        })
    }

    fn parse(v: &serde_json::Value) -> Result<CaseAnnotation> {
        parse_annotation(&v.to_string(), "test")
    }

    fn schema_path(r: Result<CaseAnnotation>) -> String {
        match r {
            Err(EvalError::SchemaError { path, .. }) => path,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn first_table_row_parses() {
        let a = parse(&row1_json()).unwrap();
        assert_eq!(a.smoke_color, SmokeColor::Grey);
        assert_eq!(a.smoke_intensity.get(), 5);
        assert_eq!(a.background_color, BackgroundColor::Grey);
        assert_eq!(a.resolution_class, ResolutionClass::Good);
        assert_eq!(a.pose, Pose::Standing);
        assert_eq!(a.obstruction, Obstruction::People);
    }

    #[test]
    fn attributes_round_trip() {
        let a = parse(&row1_json()).unwrap();
        let b = CaseAnnotation::from_attributes("1", a.attributes(), (320, 240), a.ground_truth.clone());
        assert_eq!(a, b);
    }

    #[test]
    fn intensity_out_of_range() {
        let mut v = row1_json();
        v["smoke_intensity"] = 6.into();
        assert_eq!(schema_path(parse(&v)), "smoke_intensity");
        v["smoke_intensity"] = 0.into();
        assert_eq!(schema_path(parse(&v)), "smoke_intensity");
    }

    #[test]
    fn unknown_pose() {
        let mut v = row1_json();
        v["pose"] = "sitting".into();
        assert_eq!(schema_path(parse(&v)), "pose");
    }

    #[test]
    fn nested_paths_and_box_checks() {
        let mut v = row1_json();
        v["ground_truth"][0]["smoke_bbox"] = serde_json::json!([150, 60, 190]);
        assert_eq!(schema_path(parse(&v)), "ground_truth[0].smoke_bbox");
        let mut v = row1_json();
        v["ground_truth"][0]["shooter_bbox"] = serde_json::json!([60, 50, 400, 200]);
        assert_eq!(schema_path(parse(&v)), "ground_truth[0].shooter_bbox");
    }

    #[test]
    fn directory_loading_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["b", "a"] {
            let mut v = row1_json();
            v["video_id"] = id.into();
            std::fs::write(dir.path().join(format!("{id}.json")), v.to_string()).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let ids: Vec<String> = load_annotations(dir.path())
            .unwrap()
            .into_iter()
            .map(|a| a.video_id)
            .collect();
        assert_eq!(ids, ["a", "b"]);
    }

    fn perfect(a: &CaseAnnotation) -> Vec<EventPrediction> {
        a.ground_truth
            .iter()
            .map(|g| EventPrediction {
                frame_index: g.frame_index,
                smoke: Some(PredictedSmoke {
                    bbox: g.smoke_bbox,
                    centroid: g.smoke_bbox.center(),
                }),
                shooter_bbox: Some(g.shooter_bbox),
                muzzle: Some(g.muzzle_point),
            })
            .collect()
    }

    #[test]
    fn perfect_predictions_succeed() {
        let a = parse(&row1_json()).unwrap();
        let r = evaluate_case(&a, &perfect(&a), &EvalThresholds::default()).unwrap();
        assert!(r[0].smoke_success && r[0].shooter_success && r[0].muzzle_success);
    }

    #[test]
    fn smoke_only() {
        let a = parse(&row1_json()).unwrap();
        let mut p = perfect(&a);
        p[0].shooter_bbox = None;
        let r = evaluate_case(&a, &p, &EvalThresholds::default()).unwrap();
        assert!(r[0].smoke_success && !r[0].shooter_success && !r[0].muzzle_success);
    }

    #[test]
    fn muzzle_outside_radius() {
        let a = parse(&row1_json()).unwrap();
        let mut p = perfect(&a);
        let off = 0.05 * a.diagonal();
        let g = a.ground_truth[0].muzzle_point;
        p[0].muzzle = Some(Point::new(g.x + off, g.y));
        let r = evaluate_case(&a, &p, &EvalThresholds::default()).unwrap();
        assert!(r[0].smoke_success && r[0].shooter_success && !r[0].muzzle_success);
        assert!((r[0].details.muzzle_distance.unwrap() - off).abs() < 1e-9);
    }

    #[test]
    fn centroid_inside_rescues_low_iou() {
        let a = parse(&row1_json()).unwrap();
        let mut p = perfect(&a);
        p[0].smoke = Some(PredictedSmoke {
            bbox: BBox::new(0.0, 0.0, 320.0, 240.0),
            centroid: Point::new(170.0, 80.0),
        });
        let r = evaluate_case(&a, &p, &EvalThresholds::default()).unwrap();
        assert!(r[0].details.smoke_iou.unwrap() < 0.3);
        assert!(r[0].smoke_success);
    }

    #[test]
    fn missing_ground_truth() {
        let mut v = row1_json();
        v["ground_truth"] = serde_json::json!([]);
        let a = parse(&v).unwrap();
        assert!(matches!(
            evaluate_case(&a, &[], &EvalThresholds::default()),
            Err(EvalError::MissingGroundTruth(_))
        ));
    }

    #[test]
    fn published_rates_from_counts() {
        let r = summarize_counts(23, 16, 7, 5, &EvalThresholds::default()).unwrap();
        assert_eq!(
            (r.smoke.rate.as_str(), r.shooter.rate.as_str(), r.muzzle.rate.as_str()),
            ("69.6%", "30.4%", "21.7%")
        );
        let text = r.to_text();
        for h in [SMOKE_HEADER, SHOOTER_HEADER, MUZZLE_HEADER, "69.6%", "30.4%", "21.7%"] {
            assert!(text.contains(h), "{h}\n{text}");
        }
    }

    #[test]
    fn all_success_and_empty() {
        let r = summarize_counts(4, 4, 4, 4, &EvalThresholds::default()).unwrap();
        assert_eq!(r.muzzle.rate, "100.0%");
        assert!(matches!(
            summarize_report(&[], &EvalThresholds::default()),
            Err(EvalError::EmptyResults)
        ));
    }

    #[test]
    fn half_up_rounding() {
        // 1/8 = 12.5% exactly; 1/16 = 6.25% rounds up to 6.3%
        assert_eq!(percent_tenths(1, 8), 125);
        assert_eq!(percent_tenths(1, 16), 63);
        assert_eq!(percent_tenths(1, 3), 333);
        assert_eq!(percent_tenths(2, 3), 667);
    }

    proptest! {
        #[test]
        fn rounding_matches_decimal_oracle(n in 1usize..5000, k in 0usize..5000) {
            let s = k % (n + 1);
            // exact rational comparison against the half-way point
            let tenths = percent_tenths(s, n) as u128;
            let (s, n) = (s as u128, n as u128);
            prop_assert!(tenths * n * 2 <= 2000 * s + n);
            prop_assert!((tenths + 1) * n * 2 > 2000 * s + n);
        }

        #[test]
        fn dependency_and_order_invariance(
            events in proptest::collection::vec((0.0..300.0f64, 0.0..200.0f64, any::<bool>(), any::<bool>(), 0.0..40.0f64), 1..20),
            seed in any::<u64>(),
        ) {
            let mut v = row1_json();
            v["ground_truth"] = serde_json::Value::Array(
                events.iter().enumerate().map(|(i, _)| serde_json::json!({
                    "frame_index": i,
                    "smoke_bbox": [150, 60, 190, 100],
                    "shooter_bbox": [60, 50, 100, 200],
                    "muzzle_point": [130, 75]
                })).collect(),
            );
            let a = parse(&v).unwrap();
            let preds: Vec<EventPrediction> = events.iter().enumerate().map(|(i, &(x, y, has_smoke, has_shooter, off))| EventPrediction {
                frame_index: i,
                smoke: has_smoke.then(|| PredictedSmoke { bbox: BBox::new(x, y, x + 40.0, y + 40.0), centroid: Point::new(x + 20.0, y + 20.0) }),
                shooter_bbox: has_shooter.then(|| BBox::new(60.0 + off, 50.0, 100.0 + off, 200.0)),
                muzzle: Some(Point::new(130.0 + off / 4.0, 75.0)),
            }).collect();
            let th = EvalThresholds::default();
            let mut results = evaluate_case(&a, &preds, &th).unwrap();
            for r in &results {
                prop_assert!(!r.muzzle_success || (r.smoke_success && r.shooter_success));
            }
            let before = summarize_report(&results, &th).unwrap();
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            results.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(before, summarize_report(&results, &th).unwrap());
        }
    }
}
