use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AudioError, PcmSignal, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub pre_emphasis: f64,
    pub log_floor: f64,
    pub f_min: f64,
    /// Upper filterbank edge; Nyquist when absent.
    pub f_max: Option<f64>,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 26,
            n_coeffs: 13,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
            f_min: 0.0,
            f_max: None,
        }
    }
}

/// One analysis frame worth of cepstral coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccFrame {
    pub coefficients: Vec<f64>,
    pub frame_start: f64,
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Precomputed MFCC pipeline for one sample rate.
pub struct MfccExtractor {
    config: MfccConfig,
    sample_rate: u32,
    frame_len: usize,
    hop_len: usize,
    n_fft: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Sparse triangular filters: (first bin, weights).
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
    dct: Vec<Vec<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("config", &self.config)
            .field("sample_rate", &self.sample_rate)
            .field("n_fft", &self.n_fft)
            .finish()
    }
}

impl MfccExtractor {
    pub fn new(config: MfccConfig, sample_rate: u32) -> Result<Self> {
        if !(config.hop_ms > 0.0 && config.frame_ms >= config.hop_ms) {
            return Err(AudioError::InvalidParameter(format!(
                "need frame_ms >= hop_ms > 0, got {} / {}",
                config.frame_ms, config.hop_ms
            )));
        }
        if config.n_coeffs == 0 || config.n_coeffs > config.n_mels {
            return Err(AudioError::InvalidParameter(format!(
                "need 0 < n_coeffs <= n_mels, got {} / {}",
                config.n_coeffs, config.n_mels
            )));
        }
        if sample_rate == 0 || !(config.log_floor > 0.0) {
            return Err(AudioError::InvalidParameter(
                "sample rate and log floor must be positive".into(),
            ));
        }
        let sr = sample_rate as f64;
        let frame_len = ((config.frame_ms * sr / 1000.0).round() as usize).max(1);
        let hop_len = ((config.hop_ms * sr / 1000.0).round() as usize).max(1);
        let n_fft = frame_len.next_power_of_two();
        let nyquist = sr / 2.0;
        let f_max = config.f_max.unwrap_or(nyquist).min(nyquist);
        if !(config.f_min >= 0.0 && config.f_min < f_max) {
            return Err(AudioError::InvalidParameter("need 0 <= f_min < f_max".into()));
        }

        let window = hamming(frame_len);
        let fft = FftPlanner::new().plan_fft_forward(n_fft);

        // n_mels + 2 edges evenly spaced on the mel scale
        let (mel_lo, mel_hi) = (hz_to_mel(config.f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..config.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (config.n_mels + 1) as f64))
            .collect();
        let n_bins = n_fft / 2 + 1;
        let bin_hz = sr / n_fft as f64;
        let filters = (0..config.n_mels)
            .map(|m| {
                let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f >= lo && f <= c {
                            (f - lo) / (c - lo)
                        } else if f > c && f <= hi {
                            (hi - f) / (hi - c)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                match (weights.first(), weights.last()) {
                    (Some(&(first, _)), Some(&(last, _))) => {
                        let mut dense = vec![0.0; last - first + 1];
                        for (k, w) in weights {
                            dense[k - first] = w;
                        }
                        (first, dense)
                    }
                    _ => (0, Vec::new()),
                }
            })
            .collect();
        let centers_hz = edges[1..=config.n_mels].to_vec();

        let n = config.n_mels;
        let dct = (0..config.n_coeffs)
            .map(|k| {
                let scale = if k == 0 {
                    (1.0 / n as f64).sqrt()
                } else {
                    (2.0 / n as f64).sqrt()
                };
                (0..n)
                    .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                    .collect()
            })
            .collect();

        Ok(Self {
            config,
            sample_rate,
            frame_len,
            hop_len,
            n_fft,
            window,
            fft,
            filters,
            centers_hz,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop_len(&self) -> usize {
        self.hop_len
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn filter_centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Pre-emphasized, Hamming-tapered copy of one frame.
    pub fn prepare_frame(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.frame_len, "frame length");
        let alpha = self.config.pre_emphasis;
        (0..frame.len())
            .map(|i| {
                let prev = if i == 0 { 0.0 } else { frame[i - 1] };
                (frame[i] - alpha * prev) * self.window[i]
            })
            .collect()
    }

    /// Periodogram `|X_k|^2 / n_fft` for `k = 0..=n_fft/2` of a prepared frame.
    pub fn power_spectrum(&self, prepared: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = prepared.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(self.n_fft, Complex64::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf[..self.n_fft / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / self.n_fft as f64)
            .collect()
    }

    pub fn mel_energies(&self, frame: &[f64]) -> Vec<f64> {
        let power = self.power_spectrum(&self.prepare_frame(frame));
        self.apply_filterbank(&power)
    }

    pub fn apply_filterbank(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|(first, weights)| weights.iter().zip(&power[*first..]).map(|(w, p)| w * p).sum())
            .collect()
    }

    /// Cepstral coefficients of one frame of exactly `frame_len` samples.
    pub fn coefficients(&self, frame: &[f64]) -> Vec<f64> {
        let log_mel: Vec<f64> = self
            .mel_energies(frame)
            .into_iter()
            .map(|e| e.max(self.config.log_floor).ln())
            .collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// MFCC frames over `samples`; `offset_secs` is added to each frame start.
    pub fn compute_samples(&self, samples: &[f64], offset_secs: f64) -> Result<Vec<MfccFrame>> {
        if samples.len() < self.frame_len {
            return Err(AudioError::SignalTooShort {
                needed: self.frame_len,
                got: samples.len(),
            });
        }
        let count = (samples.len() - self.frame_len) / self.hop_len + 1;
        let sr = self.sample_rate as f64;
        Ok((0..count)
            .map(|i| {
                let start = i * self.hop_len;
                MfccFrame {
                    coefficients: self.coefficients(&samples[start..start + self.frame_len]),
                    frame_start: offset_secs + start as f64 / sr,
                }
            })
            .collect())
    }

    pub fn compute(&self, signal: &PcmSignal) -> Result<Vec<MfccFrame>> {
        self.compute_samples(&signal.samples, 0.0)
    }
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// MFCCs of a whole signal with default pre-emphasis and log floor.
pub fn compute_mfcc(
    signal: &PcmSignal,
    frame_ms: f64,
    hop_ms: f64,
    n_mels: usize,
    n_coeffs: usize,
) -> Result<Vec<MfccFrame>> {
    let config = MfccConfig {
        frame_ms,
        hop_ms,
        n_mels,
        n_coeffs,
        ..MfccConfig::default()
    };
    MfccExtractor::new(config, signal.sample_rate)?.compute(signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn extractor() -> MfccExtractor {
        MfccExtractor::new(MfccConfig::default(), 16_000).unwrap()
    }

    fn tone(freq: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 16_000.0).sin())
            .collect()
    }

    #[test]
    fn default_frame_geometry() {
        let ex = extractor();
        assert_eq!(ex.frame_len(), 400);
        assert_eq!(ex.hop_len(), 160);
        assert_eq!(ex.n_fft(), 512);
        assert_eq!(ex.filter_centers_hz().len(), 26);
    }

    #[test]
    fn zero_frame_has_only_a_constant_term() {
        let ex = extractor();
        let c = ex.coefficients(&[0.0; 400]);
        let expected_c0 = (26f64).sqrt() * 1e-10f64.ln();
        assert!((c[0] - expected_c0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9), "{c:?}");
    }

    #[test]
    fn tone_peaks_in_nearest_band() {
        let ex = extractor();
        let energies = ex.mel_energies(&tone(1000.0, 400));
        let peak = energies.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let nearest = ex
            .filter_centers_hz()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
            .unwrap()
            .0;
        assert_eq!(peak, nearest);
    }

    #[test]
    fn deterministic() {
        let ex = extractor();
        let frame = tone(440.0, 400);
        assert_eq!(ex.coefficients(&frame), ex.coefficients(&frame));
    }

    #[test]
    fn short_signal_is_rejected() {
        let sig = PcmSignal::new(vec![0.0; 399], 16_000, "s");
        let err = compute_mfcc(&sig, 25.0, 10.0, 26, 13).unwrap_err();
        assert!(matches!(err, AudioError::SignalTooShort { needed: 400, got: 399 }));
    }

    #[test]
    fn frame_count_and_starts() {
        let sig = PcmSignal::new(tone(300.0, 16_000), 16_000, "s");
        let frames = compute_mfcc(&sig, 25.0, 10.0, 26, 13).unwrap();
        assert_eq!(frames.len(), (16_000 - 400) / 160 + 1);
        assert!((frames[1].frame_start - 0.01).abs() < 1e-12);
        assert!(frames.iter().all(|f| f.coefficients.len() == 13));
    }

    #[test]
    fn invalid_parameters() {
        let bad = MfccConfig {
            n_coeffs: 30,
            ..MfccConfig::default()
        };
        assert!(MfccExtractor::new(bad, 16_000).is_err());
        let bad = MfccConfig {
            hop_ms: 30.0,
            ..MfccConfig::default()
        };
        assert!(MfccExtractor::new(bad, 16_000).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gain_only_moves_the_constant_term(
            seed in any::<u64>(),
            gain in 0.05f64..4.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frame: Vec<f64> = (0..400).map(|_| rng.random_range(-0.2..0.2)).collect();
            let scaled: Vec<f64> = frame.iter().map(|x| x * gain).collect();
            let ex = extractor();
            let a = ex.coefficients(&frame);
            let b = ex.coefficients(&scaled);
            for k in 1..a.len() {
                prop_assert!((a[k] - b[k]).abs() < 1e-6, "k={} {} vs {}", k, a[k], b[k]);
            }
            let expected_shift = (26f64).sqrt() * 2.0 * gain.ln();
            prop_assert!((b[0] - a[0] - expected_shift).abs() < 1e-6);
        }
    }
}
