//! Shooter matching and muzzle localization.
//!
//! Person boxes come from an external detector export
//! ([`load_person_detections`]) or, as a fallback, from upright moving
//! regions of the flow ([`baseline_person_proposals`]). Each smoke blob is
//! paired with the most plausible person ([`match_shooter`]) and the muzzle
//! is placed on the segment from the shooter's head proxy to the smoke
//! centroid ([`localize_muzzle`]).

mod detections;
mod font;
mod muzzle;
mod overlay;

pub use detections::{
    baseline_person_proposals, load_person_detections, parse_person_detections, write_person_detections,
    BaselineConfig, DetectionConfig, DetectionRecord, LoadedDetections,
};
pub use muzzle::{
    localize_muzzle, match_shooter, match_shooter_with_diagonal, LocalizationRecord, MatchConfig, MuzzleEstimate,
    NoShooter, ShooterMatch,
};
pub use overlay::{render_overlay, OverlayStyle};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error)]
pub enum ShooterError {
    #[error("detection schema error at line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("detection file is empty")]
    EmptyFile,
    #[error("shooter reference point coincides with the smoke centroid")]
    DegenerateGeometry,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ShooterError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxSource {
    External,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonBox {
    pub bbox: BBox,
    pub score: f64,
    pub source: BoxSource,
    pub frame_index: usize,
}
