//! Input layout: one directory per video with `audio.wav`, a `frames/`
//! directory of P5/P6 images, and an optional `detections.jsonl`.

use std::ops::Range;
use std::path::{Path, PathBuf};

use gunsmoke_core::flow::{read_pnm, Frame};

use crate::{PipelineError, Result};

pub const AUDIO_FILE: &str = "audio.wav";
pub const FRAMES_DIR: &str = "frames";
pub const DETECTIONS_FILE: &str = "detections.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: String,
    pub dir: PathBuf,
    pub audio: PathBuf,
    /// Sorted by file name, so zero-padded numeric suffixes give time order.
    pub frames: Vec<PathBuf>,
    pub detections: Option<PathBuf>,
}

impl Video {
    pub fn open(dir: &Path) -> Result<Self> {
        let id = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| PipelineError::MissingInput(format!("video directory name {}", dir.display())))?
            .to_string();
        let audio = dir.join(AUDIO_FILE);
        if !audio.is_file() {
            return Err(PipelineError::MissingInput(audio.display().to_string()));
        }
        let frames_dir = dir.join(FRAMES_DIR);
        let mut frames: Vec<PathBuf> = match std::fs::read_dir(&frames_dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "ppm" || x == "pgm" || x == "pnm"))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        frames.sort();
        let det = dir.join(DETECTIONS_FILE);
        Ok(Self {
            id,
            dir: dir.to_path_buf(),
            audio,
            frames,
            detections: det.is_file().then_some(det),
        })
    }

    pub fn frame(&self, n: usize) -> Result<Frame> {
        let path = self
            .frames
            .get(n)
            .ok_or_else(|| PipelineError::MissingInput(format!("frame {n} of video {}", self.id)))?;
        Ok(read_pnm(path)?)
    }

    pub fn frame_dims(&self) -> Result<(usize, usize)> {
        let f = self.frame(0)?;
        Ok((f.width, f.height))
    }
}

/// Every subdirectory of `dir` holding an `audio.wav`, sorted by id.
pub fn discover_videos(dir: &Path) -> Result<Vec<Video>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::MissingInput(format!("videos directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(AUDIO_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| Video::open(d)).collect()
}

pub fn find_video<'a>(videos: &'a [Video], id: &str) -> Option<&'a Video> {
    videos.iter().find(|v| v.id == id)
}

/// Frames whose timestamps `n / fps` fall in `[start, start + duration)`.
pub fn segment_frames(start: f64, duration: f64, fps: f64, n_frames: usize) -> Range<usize> {
    let first = (start * fps - 1e-9).ceil().max(0.0) as usize;
    let end = ((start + duration) * fps - 1e-9).ceil().max(0.0) as usize;
    first.min(n_frames)..end.min(n_frames)
}

/// Sorted wav files of a directory; missing directory is empty.
pub fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "wav"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    v.sort();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_frame_ranges() {
        assert_eq!(segment_frames(0.0, 3.0, 2.0, 20), 0..6);
        assert_eq!(segment_frames(2.0, 3.0, 2.0, 20), 4..10);
        assert_eq!(segment_frames(7.0, 3.0, 2.0, 20), 14..20);
        assert_eq!(segment_frames(9.0, 3.0, 2.0, 20), 18..20);
        assert_eq!(segment_frames(1.0, 3.0, 2.5, 100), 3..10);
    }

    #[test]
    fn discovery_skips_directories_without_audio() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["b", "a", "junk"] {
            std::fs::create_dir_all(dir.path().join(id).join(FRAMES_DIR)).unwrap();
        }
        for id in ["b", "a"] {
            std::fs::write(dir.path().join(id).join(AUDIO_FILE), b"").unwrap();
        }
        std::fs::write(dir.path().join("a/frames/f_0001.ppm"), b"").unwrap();
        std::fs::write(dir.path().join("a/frames/f_0000.ppm"), b"").unwrap();
        std::fs::write(dir.path().join("a/frames/readme.txt"), b"").unwrap();
        let v = discover_videos(dir.path()).unwrap();
        assert_eq!(v.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(v[0].frames.len(), 2);
        assert!(v[0].frames[0].ends_with("f_0000.ppm"));
        assert!(v[0].detections.is_none());
    }
}
