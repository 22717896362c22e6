//! Orchestration of the gunshot localization stages as a resumable,
//! run-scoped batch pipeline, plus the HTTP review service that gates the
//! visual stages on human verdicts.

pub mod config;
pub mod data;
pub mod fixture;
pub mod manifest;
pub mod run;
pub mod service;
pub mod stages;
pub mod store;

use std::path::PathBuf;

use thiserror::Error;

pub use config::Config;
pub use manifest::{RunManifest, Stage, StageStatus};
pub use run::{run_pipeline, Pipeline, RunOptions};

/// Environment variable naming a stage after which the process aborts, for
/// crash-recovery testing.
pub const CRASH_AFTER_ENV: &str = "GUNSMOKE_CRASH_AFTER";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage} failed: {cause}")]
    StageFailed { stage: Stage, cause: String },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("config: {0}")]
    Config(String),
    #[error("run {0} already exists with a different configuration; pass another --run-id")]
    ConfigMismatch(String),
    #[error("corrupt manifest {}: {message}", path.display())]
    CorruptManifest { path: PathBuf, message: String },
    #[error("corrupt artifact {}:{line}: {message}", path.display())]
    CorruptArtifact {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(
        "corrupt review store {}:{line}: {message}\n\
         hint: the log is append-only, so a partial last line means an interrupted write; \
         truncate that line, or move the file aside to start with an empty history",
        path.display()
    )]
    CorruptStore {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cannot bind {addr}: {message}\nhint: another `gunsmoke serve` may be running; stop it or pass --bind with a free port")]
    Bind { addr: String, message: String },
    #[error(transparent)]
    Audio(#[from] gunsmoke_core::audio::AudioError),
    #[error(transparent)]
    Scoring(#[from] gunsmoke_core::scoring::ScoringError),
    #[error(transparent)]
    Flow(#[from] gunsmoke_core::flow::FlowError),
    #[error(transparent)]
    Shooter(#[from] gunsmoke_core::shooter::ShooterError),
    #[error(transparent)]
    Eval(#[from] gunsmoke_core::eval::EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
