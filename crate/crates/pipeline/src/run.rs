//! Stage scheduling against the run manifest.

use std::path::PathBuf;

use log::info;

use crate::config::Config;
use crate::manifest::{now, RunManifest, Stage, StageStatus};
use crate::stages::{execute, StageCtx};
use crate::{PipelineError, Result, CRASH_AFTER_ENV};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Defaults to the content hash of the configuration.
    pub run_id: Option<String>,
    /// Confirm every gated segment without waiting for verdicts.
    pub no_review: bool,
}

#[derive(Debug)]
pub struct Pipeline {
    pub config: Config,
    pub run_id: String,
    pub run_dir: PathBuf,
    pub no_review: bool,
}

impl Pipeline {
    /// Open or create the run directory. An existing run must have been
    /// created with the same configuration.
    pub fn open(config: Config, opts: &RunOptions) -> Result<Self> {
        let run_id = opts.run_id.clone().unwrap_or_else(|| config.content_run_id());
        let run_dir = config.output.runs_dir.join(&run_id);
        std::fs::create_dir_all(&run_dir)?;
        match RunManifest::load(&run_dir)? {
            Some(m) if m.config != config => return Err(PipelineError::ConfigMismatch(run_id)),
            Some(_) => {}
            None => RunManifest::new(&run_id, config.clone()).save(&run_dir)?,
        }
        Ok(Self {
            config,
            run_id,
            run_dir,
            no_review: opts.no_review,
        })
    }

    pub fn manifest(&self) -> Result<RunManifest> {
        RunManifest::load(&self.run_dir)?.ok_or_else(|| PipelineError::CorruptManifest {
            path: self.run_dir.join(crate::manifest::MANIFEST_FILE),
            message: "missing".into(),
        })
    }

    /// Run `targets` and their prerequisites, skipping stages already done.
    pub fn run(&self, targets: &[Stage]) -> Result<RunManifest> {
        let mut wanted: Vec<Stage> = targets.iter().flat_map(|s| s.with_prerequisites()).collect();
        wanted.sort();
        wanted.dedup();
        let mut manifest = self.manifest()?;
        let ctx = StageCtx {
            config: &self.config,
            run_dir: &self.run_dir,
            no_review: self.no_review,
        };
        for stage in wanted {
            if manifest.is_done(stage) {
                info!("{stage}: done, skipping");
                continue;
            }
            info!("{stage}: running");
            manifest.record_mut(stage).attempts += 1;
            manifest.save(&self.run_dir)?;
            let result = execute(stage, &ctx);
            let rec = manifest.record_mut(stage);
            match result {
                Ok(out) => {
                    rec.status = StageStatus::Done;
                    rec.completed_at = Some(now());
                    rec.artifacts = out.artifacts;
                    rec.error = None;
                    rec.note = out.note;
                    manifest.save(&self.run_dir)?;
                    info!("{stage}: done");
                    crash_if_requested(stage);
                }
                Err(PipelineError::MissingInput(what)) => {
                    rec.status = StageStatus::Pending;
                    rec.note = Some(format!("waiting for {what}"));
                    manifest.save(&self.run_dir)?;
                    return Err(PipelineError::MissingInput(what));
                }
                Err(e) => {
                    rec.status = StageStatus::Failed;
                    rec.error = Some(e.to_string());
                    manifest.save(&self.run_dir)?;
                    return Err(PipelineError::StageFailed {
                        stage,
                        cause: e.to_string(),
                    });
                }
            }
        }
        Ok(manifest)
    }
}

fn crash_if_requested(stage: Stage) {
    if std::env::var(CRASH_AFTER_ENV).is_ok_and(|s| s == stage.name()) {
        eprintln!("{CRASH_AFTER_ENV}={stage}: aborting");
        std::process::abort();
    }
}

pub fn run_pipeline(config: Config, targets: &[Stage], opts: &RunOptions) -> Result<RunManifest> {
    Pipeline::open(config, opts)?.run(targets)
}
