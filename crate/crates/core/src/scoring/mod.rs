//! Gunshot likelihood scoring of audio segments.
//!
//! A linear SVM over bag-of-words vectors produces an initial ranked list,
//! self-paced reranking refines it, and [`threshold_filter`] gates the
//! survivors for human review.

mod rank;
mod spl;
mod svm;

pub use rank::{assign_ranks, average_precision, score_segments, threshold_filter, SegmentScore, Stage};
pub use spl::{pseudo_labels, select_by_loss, spr_rerank, spr_rerank_traced, SplParams, SplState};
pub use svm::{
    fit_calibration, logistic, train_linear_svm, Calibration, SvmModel, SvmParams, TrainingSet, MODEL_FORMAT_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty ranking")]
    EmptyRanking,
    #[error("no feature vector for segment {0}")]
    MissingFeature(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bad model file: {0}")]
    BadModel(String),
}

pub type Result<T, E = ScoringError> = std::result::Result<T, E>;
