//! Append-only verdict and annotation logs.
//!
//! Each log is line-delimited JSON. State is whatever replaying the log
//! produces: the last verdict for a segment is the live one, earlier ones
//! stay as history.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gunsmoke_core::eval::{CaseAttributes, GroundTruthEvent};
use gunsmoke_core::geometry::{BBox, Point};

use crate::PipelineError;

pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Segment id as produced by `SegmentRef::id`.
    pub segment_id: String,
    pub visible_gunshot: bool,
    pub reviewer: String,
    pub timestamp: String,
    #[serde(default)]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub segment_id: String,
    pub video_id: String,
    pub reviewer: String,
    pub timestamp: String,
    pub frame_index: usize,
    pub shooter_bbox: BBox,
    pub smoke_bbox: BBox,
    pub muzzle_point: Point,
    #[serde(default)]
    pub attributes: Option<CaseAttributes>,
}

impl AnnotationEntry {
    pub fn event(&self) -> GroundTruthEvent {
        GroundTruthEvent {
            frame_index: self.frame_index,
            smoke_bbox: self.smoke_bbox,
            shooter_bbox: self.shooter_bbox,
            muzzle_point: self.muzzle_point,
        }
    }
}

/// Read every record of a log. A missing file is an empty log; a line that
/// does not parse is corruption.
pub fn replay<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::CorruptStore {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Append one record and flush it to disk.
pub fn append<T: Serialize>(path: &Path, record: &T) -> Result<(), PipelineError> {
    let mut line = serde_json::to_vec(record).expect("records are always serializable");
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.sync_data()?;
    Ok(())
}

/// Replayed review state of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReviewState {
    pub history: Vec<Verdict>,
    pub live: HashMap<String, Verdict>,
    pub annotations: Vec<AnnotationEntry>,
}

impl ReviewState {
    pub fn from_records(verdicts: Vec<Verdict>, annotations: Vec<AnnotationEntry>) -> Self {
        let mut s = Self::default();
        for v in verdicts {
            s.apply_verdict(v);
        }
        s.annotations = annotations;
        s
    }

    pub fn apply_verdict(&mut self, v: Verdict) {
        self.live.insert(v.segment_id.clone(), v.clone());
        self.history.push(v);
    }

    pub fn is_confirmed(&self, segment_id: &str) -> bool {
        self.live.get(segment_id).is_some_and(|v| v.visible_gunshot)
    }
}

/// Paths of the two logs inside a run directory.
#[derive(Debug, Clone)]
pub struct ReviewStore {
    pub verdicts: PathBuf,
    pub annotations: PathBuf,
}

impl ReviewStore {
    pub fn in_run(run_dir: &Path) -> Self {
        Self {
            verdicts: run_dir.join(VERDICTS_FILE),
            annotations: run_dir.join(ANNOTATIONS_FILE),
        }
    }

    pub fn load(&self) -> Result<ReviewState, PipelineError> {
        Ok(ReviewState::from_records(
            replay(&self.verdicts)?,
            replay(&self.annotations)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn verdict(seg: &str, yes: bool, n: usize) -> Verdict {
        Verdict {
            segment_id: seg.into(),
            visible_gunshot: yes,
            reviewer: "r".into(),
            timestamp: format!("t{n}"),
            notes: None,
        }
    }

    #[test]
    fn later_verdicts_supersede() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReviewStore::in_run(dir.path());
        append(&store.verdicts, &verdict("a@0", true, 0)).unwrap();
        append(&store.verdicts, &verdict("a@0", false, 1)).unwrap();
        let s = store.load().unwrap();
        assert_eq!(s.history.len(), 2);
        assert!(!s.is_confirmed("a@0"));
    }

    #[test]
    fn corrupt_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReviewStore::in_run(dir.path());
        append(&store.verdicts, &verdict("a@0", true, 0)).unwrap();
        std::fs::OpenOptions::new()
            .append(true)
            .open(&store.verdicts)
            .unwrap()
            .write_all(b"{\"segment_id\": \"b@")
            .unwrap();
        match store.load() {
            Err(PipelineError::CorruptStore { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn replay_reconstructs_state(ops in proptest::collection::vec((0usize..5, any::<bool>()), 0..40)) {
            let dir = tempfile::tempdir().unwrap();
            let store = ReviewStore::in_run(dir.path());
            let mut state = ReviewState::default();
            for (n, (seg, yes)) in ops.iter().enumerate() {
                let v = verdict(&format!("v@{}", seg * 1000), *yes, n);
                append(&store.verdicts, &v).unwrap();
                state.apply_verdict(v);
            }
            prop_assert_eq!(store.load().unwrap(), state);
        }
    }
}
