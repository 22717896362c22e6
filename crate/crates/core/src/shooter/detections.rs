use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoxSource, PersonBox, Result, ShooterError};
use crate::flow::FlowField;
use crate::geometry::BBox;
use crate::smoke::{connected_components, motion_mask, pixel_bbox};

/// One line of a detection export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame_index: usize,
    pub class: String,
    pub score: f64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub min_score: f64,
    pub class: String,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            min_score: 0.5,
            class: "person".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedDetections {
    pub boxes: Vec<PersonBox>,
    pub dropped_low_score: usize,
    pub dropped_other_class: usize,
    /// Boxes with no area left after clamping to the frame.
    pub dropped_degenerate: usize,
}

/// Parse a detection export already in memory.
pub fn parse_person_detections(
    text: &str,
    frame_dims: (usize, usize),
    cfg: &DetectionConfig,
) -> Result<LoadedDetections> {
    let (w, h) = (frame_dims.0 as f64, frame_dims.1 as f64);
    let mut out = LoadedDetections::default();
    let mut records = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| ShooterError::SchemaError {
            line: n + 1,
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(ShooterError::SchemaError {
                line: n + 1,
                message: format!("score {} outside [0, 1]", rec.score),
            });
        }
        if rec.class != cfg.class {
            out.dropped_other_class += 1;
            continue;
        }
        if rec.score < cfg.min_score {
            out.dropped_low_score += 1;
            continue;
        }
        let bbox = rec.bbox.clamp_to(w, h);
        if !bbox.is_valid() {
            out.dropped_degenerate += 1;
            continue;
        }
        out.boxes.push(PersonBox {
            bbox,
            score: rec.score,
            source: BoxSource::External,
            frame_index: rec.frame_index,
        });
    }
    if records == 0 {
        return Err(ShooterError::EmptyFile);
    }
    if out.dropped_degenerate > 0 {
        log::warn!("dropped {} degenerate person boxes", out.dropped_degenerate);
    }
    Ok(out)
}

pub fn load_person_detections(
    path: impl AsRef<Path>,
    frame_dims: (usize, usize),
    cfg: &DetectionConfig,
) -> Result<LoadedDetections> {
    parse_person_detections(&std::fs::read_to_string(path)?, frame_dims, cfg)
}

/// Write boxes back in the export schema.
pub fn write_person_detections(mut out: impl Write, boxes: &[PersonBox], class: &str) -> Result<()> {
    for b in boxes {
        let rec = DetectionRecord {
            frame_index: b.frame_index,
            class: class.to_string(),
            score: b.score,
            bbox: b.bbox,
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub motion_threshold: f64,
    /// Accepted height/width range of an upright person.
    pub aspect_min: f64,
    pub aspect_max: f64,
    /// Minimum and maximum box area as fractions of the frame.
    pub area_min: f64,
    pub area_max: f64,
    pub score: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            motion_threshold: 1.0,
            aspect_min: 1.5,
            aspect_max: 5.0,
            area_min: 0.005,
            area_max: 0.5,
            score: 0.3,
        }
    }
}

/// Low-score person proposals from upright moving regions.
pub fn baseline_person_proposals(flow: &FlowField, frame_index: usize, cfg: &BaselineConfig) -> Vec<PersonBox> {
    let frame_area = flow.len() as f64;
    connected_components(&motion_mask(flow, cfg.motion_threshold), flow.width, flow.height)
        .iter()
        .map(|c| pixel_bbox(c, flow.width))
        .filter(|b| {
            let aspect = b.height() / b.width();
            let frac = b.area() / frame_area;
            (cfg.aspect_min..=cfg.aspect_max).contains(&aspect) && (cfg.area_min..=cfg.area_max).contains(&frac)
        })
        .map(|bbox| PersonBox {
            bbox,
            score: cfg.score,
            source: BoxSource::Baseline,
            frame_index,
        })
        .collect()
}
