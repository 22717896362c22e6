//! Audio decoding, windowing and MFCC bag-of-words features.
//!
//! The extracted audio track of a video is decoded into a [`PcmSignal`],
//! cut into fixed-length overlapping [`Segment`]s, and each segment is
//! described by a histogram of quantized MFCC frames over a learned
//! [`Codebook`].

mod codebook;
mod mfcc;
mod wav;
mod window;

pub use codebook::{build_codebook, encode_bow, BowVector, Codebook, KMeansParams};
pub use mfcc::{compute_mfcc, hz_to_mel, mel_to_hz, MfccConfig, MfccExtractor, MfccFrame};
pub use wav::{read_wav, read_wav_from, write_wav};
pub use window::{segment_windows, Segment, SegmentRef};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed wav: {0}")]
    MalformedWav(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("signal too short: {got} samples, need at least {needed}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("insufficient data: {frames} frames for k = {k}")]
    InsufficientData { frames: usize, k: usize },
    #[error("segment has no frames")]
    EmptySegment,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AudioError> = std::result::Result<T, E>;

/// Mono audio with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcmSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl PcmSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Self {
        Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples covered by `segment`.
    pub fn slice(&self, segment: &Segment) -> &[f64] {
        &self.samples[segment.sample_start..segment.sample_end]
    }
}
