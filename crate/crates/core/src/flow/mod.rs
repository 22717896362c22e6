//! Dense optical flow between consecutive frames.
//!
//! [`compute_flow`] runs a coarse-to-fine Horn–Schunck solver; fields are
//! stored in the Middlebury `.flo` layout ([`write_flo`], [`read_flo`]) and
//! rendered with the Middlebury color wheel ([`flow_to_color`]).

mod color;
mod flo;
mod frame;
mod horn_schunck;

pub use color::{color_wheel, flow_to_color, hue_bin, hue_position, UNKNOWN_FLOW_THRESHOLD};
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_TAG, UNKNOWN_FLOW};
pub use frame::{read_pnm, write_pgm, write_ppm, Frame};
pub use horn_schunck::{compute_flow, compute_flow_traced, hs_energy, FlowParams, FlowTrace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("frame too small: {0}x{1}, need at least 16x16")]
    FrameTooSmall(usize, usize),
    #[error("bad .flo magic")]
    BadMagic,
    #[error("truncated .flo file")]
    TruncatedFile,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FlowError> = std::result::Result<T, E>;

/// Per-pixel displacement from the first frame to the second, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
            valid: vec![true; n],
        }
    }

    /// Uniform field `(u, v)` everywhere.
    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![u; n],
            v: vec![v; n],
            valid: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn set(&mut self, x: usize, y: usize, u: f32, v: f32) {
        let i = self.index(x, y);
        self.u[i] = u;
        self.v[i] = v;
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        (self.u[i] as f64).hypot(self.v[i] as f64)
    }

    /// Magnitudes of valid pixels, `None` elsewhere.
    pub fn magnitudes(&self) -> Vec<Option<f64>> {
        (0..self.len())
            .map(|i| self.valid[i].then(|| self.magnitude(i)))
            .collect()
    }
}
