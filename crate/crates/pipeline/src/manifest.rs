//! Per-run manifest and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Audio,
    Score,
    Rerank,
    Threshold,
    Review,
    Flow,
    Smoke,
    Localize,
    Eval,
}

impl Stage {
    /// Dependency order.
    pub const ALL: [Stage; 9] = [
        Stage::Audio,
        Stage::Score,
        Stage::Rerank,
        Stage::Threshold,
        Stage::Review,
        Stage::Flow,
        Stage::Smoke,
        Stage::Localize,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Audio => "audio",
            Stage::Score => "score",
            Stage::Rerank => "rerank",
            Stage::Threshold => "threshold",
            Stage::Review => "review",
            Stage::Flow => "flow",
            Stage::Smoke => "smoke",
            Stage::Localize => "localize",
            Stage::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    /// This stage and everything before it.
    pub fn with_prerequisites(self) -> Vec<Stage> {
        Stage::ALL.into_iter().filter(|s| *s <= self).collect()
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    /// Number of times the stage body has been started in this run.
    pub attempts: u32,
    pub completed_at: Option<String>,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: String,
    pub config: Config,
    pub stages: Vec<StageRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(run_id: impl Into<String>, config: Config) -> Self {
        Self {
            run_id: run_id.into(),
            created_at: now(),
            config,
            stages: Stage::ALL
                .into_iter()
                .map(|stage| StageRecord {
                    stage,
                    status: StageStatus::Pending,
                    attempts: 0,
                    completed_at: None,
                    artifacts: Vec::new(),
                    error: None,
                    note: None,
                })
                .collect(),
        }
    }

    pub fn record(&self, stage: Stage) -> &StageRecord {
        self.stages
            .iter()
            .find(|r| r.stage == stage)
            .expect("every stage has a record")
    }

    pub fn record_mut(&mut self, stage: Stage) -> &mut StageRecord {
        self.stages
            .iter_mut()
            .find(|r| r.stage == stage)
            .expect("every stage has a record")
    }

    pub fn is_done(&self, stage: Stage) -> bool {
        self.record(stage).status == StageStatus::Done
    }

    /// Stages are done in a prefix of the dependency order.
    pub fn is_consistent(&self) -> bool {
        let done: Vec<bool> = Stage::ALL.iter().map(|s| self.is_done(*s)).collect();
        done.windows(2).all(|w| w[0] || !w[1])
    }

    pub fn load(run_dir: &Path) -> Result<Option<Self>, PipelineError> {
        let path = run_dir.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| PipelineError::CorruptManifest {
                    path,
                    message: e.to_string(),
                }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, run_dir: &Path) -> Result<(), PipelineError> {
        let json = serde_json::to_vec_pretty(self).expect("manifest is always serializable");
        write_atomic(&run_dir.join(MANIFEST_FILE), &json)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("run {}\n", self.run_id);
        for r in &self.stages {
            let status = match r.status {
                StageStatus::Pending => "pending",
                StageStatus::Done => "done",
                StageStatus::Failed => "failed",
            };
            out.push_str(&format!("  {:<10} {:<8}", r.stage.name(), status));
            if let Some(e) = &r.error {
                out.push_str(&format!(" {e}"));
            } else if let Some(n) = &r.note {
                out.push_str(&format!(" ({n})"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

/// Write through a temporary file in the same directory and rename over
/// `path`, so readers see either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| PipelineError::Io(e.error))?;
    Ok(())
}

/// Serialize records one per line and write them atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records are always serializable");
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| PipelineError::MissingInput(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::CorruptArtifact {
                path: PathBuf::from(path),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prerequisites_follow_dependency_order() {
        assert_eq!(Stage::Score.with_prerequisites(), vec![Stage::Audio, Stage::Score]);
        assert_eq!(Stage::Eval.with_prerequisites().len(), 9);
        assert_eq!(Stage::parse("localize"), Some(Stage::Localize));
        assert_eq!(Stage::parse("nope"), None);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("r1", Config::default());
        m.record_mut(Stage::Audio).status = StageStatus::Done;
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), Some(m.clone()));
        assert!(m.is_consistent());
        m.record_mut(Stage::Flow).status = StageStatus::Done;
        assert!(!m.is_consistent());
    }

    #[test]
    fn missing_manifest_is_none_and_garbage_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), None);
        std::fs::write(dir.path().join(MANIFEST_FILE), "{ not json").unwrap();
        assert!(matches!(
            RunManifest::load(dir.path()),
            Err(PipelineError::CorruptManifest { .. })
        ));
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
