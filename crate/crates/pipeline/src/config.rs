//! The single TOML document covering every tunable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gunsmoke_core::audio::{KMeansParams, MfccConfig};
use gunsmoke_core::eval::EvalThresholds;
use gunsmoke_core::flow::FlowParams;
use gunsmoke_core::scoring::{SplParams, SvmParams};
use gunsmoke_core::shooter::{BaselineConfig, DetectionConfig, MatchConfig, OverlayStyle};
use gunsmoke_core::smoke::SmokeConfig;

use crate::PipelineError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub input: InputConfig,
    pub output: OutputConfig,
    pub audio: AudioConfig,
    pub scoring: ScoringConfig,
    pub flow: FlowParams,
    pub smoke: SmokeConfig,
    pub shooter: ShooterConfig,
    pub overlay: OverlayStyle,
    pub eval: EvalThresholds,
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// One subdirectory per video holding `audio.wav`, `frames/` and an
    /// optional `detections.jsonl`.
    pub videos_dir: PathBuf,
    /// `positive/*.wav` and `negative/*.wav` classifier training clips.
    pub training_dir: PathBuf,
    pub annotations_dir: Option<PathBuf>,
    /// Frames per second of the extracted frame sequence.
    pub frame_rate: f64,
    /// Flow is computed between frames `n` and `n + frame_stride`.
    pub frame_stride: usize,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            videos_dir: "videos".into(),
            training_dir: "training".into(),
            annotations_dir: None,
            frame_rate: 2.0,
            frame_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub runs_dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            runs_dir: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub window: f64,
    pub stride: f64,
    pub mfcc: MfccConfig,
    pub codebook: KMeansParams,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            window: 3.0,
            stride: 1.0,
            mfcc: MfccConfig::default(),
            codebook: KMeansParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub svm: SvmParams,
    pub spl: SplParams,
    /// Skip reranking and gate the initial list when false.
    pub rerank: bool,
    pub threshold: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            svm: SvmParams::default(),
            spl: SplParams::default(),
            rerank: true,
            threshold: 0.7,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShooterConfig {
    pub detection: DetectionConfig,
    pub baseline: BaselineConfig,
    pub matching: MatchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl Config {
    /// Parse TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.videos_dir);
        fix(&mut self.input.training_dir);
        if let Some(a) = self.input.annotations_dir.as_mut() {
            fix(a);
        }
        fix(&mut self.output.runs_dir);
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(self.input.frame_rate > 0.0) {
            return bad("input.frame_rate must be positive");
        }
        if self.input.frame_stride == 0 {
            return bad("input.frame_stride must be at least 1");
        }
        if !(self.audio.window > 0.0 && self.audio.stride > 0.0) {
            return bad("audio.window and audio.stride must be positive");
        }
        if !(0.0..=1.0).contains(&self.scoring.threshold) {
            return bad("scoring.threshold must lie in [0, 1]");
        }
        Ok(())
    }

    /// Run id derived from the configuration content, so identical
    /// configurations resume the same run and different ones never share a
    /// directory.
    pub fn content_run_id(&self) -> String {
        let json = serde_json::to_vec(self).expect("config is always serializable");
        let digest = Sha256::digest(&json);
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        format!("run-{hex}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = Config::from_toml("", Path::new("/base")).unwrap();
        assert_eq!(cfg.scoring.threshold, 0.7);
        assert_eq!(cfg.flow.alpha, 15.0);
        assert_eq!(cfg.audio.codebook.k, 256);
        assert_eq!(cfg.smoke.kappa, 4.0);
        assert_eq!(cfg.shooter.matching.w_distance, 0.6);
        assert_eq!(cfg.eval.smoke_iou, 0.3);
        assert_eq!(cfg.input.videos_dir, PathBuf::from("/base/videos"));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = Config::default();
        cfg.scoring.spl.lambda0 = Some(0.5);
        cfg.input.annotations_dir = Some("/abs/ann".into());
        let back = Config::from_toml(&cfg.to_toml(), Path::new("/")).unwrap();
        let mut expected = cfg.clone();
        expected.resolve_paths(Path::new("/"));
        assert_eq!(back, expected);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Config::from_toml("[flow]\nalfa = 3\n", Path::new(".")).is_err());
        assert!(Config::from_toml("[scoring]\nthreshold = 1.5\n", Path::new(".")).is_err());
    }

    #[test]
    fn run_id_follows_content() {
        let a = Config::default();
        let mut b = Config::default();
        assert_eq!(a.content_run_id(), b.content_run_id());
        b.scoring.threshold = 0.8;
        assert_ne!(a.content_run_id(), b.content_run_id());
    }
}
