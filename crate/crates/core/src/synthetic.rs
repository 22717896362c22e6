//! Seeded synthetic inputs for tests, benchmarks and the bundled fixture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{BowVector, SegmentRef};
use crate::flow::Frame;
use crate::geometry::{BBox, Point};
use crate::scoring::{SegmentScore, Stage};

/// A ranked list with known relevance whose low-confidence tail is noisy.
#[derive(Debug, Clone)]
pub struct RerankBenchmark {
    pub scores: Vec<SegmentScore>,
    pub features: Vec<BowVector>,
    /// Ground truth keyed like [`SegmentRef::id`].
    pub relevant: std::collections::HashMap<String, bool>,
}

impl RerankBenchmark {
    /// Relevance of `scores` in their current order.
    pub fn relevance_of(&self, scores: &[SegmentScore]) -> Vec<bool> {
        scores.iter().map(|s| self.relevant[&s.segment_ref().id()]).collect()
    }
}

/// Build the corrupted-tail benchmark.
///
/// `n` items, half relevant. Features are histograms over `dim` bins whose
/// mass leans towards the first half for relevant items and the second half
/// otherwise. The 30% most confident relevant items form a clean head; every
/// remaining item has its observed label flipped with probability
/// `flip_rate` and receives a confidence in the band of its observed label.
pub fn corrupted_tail_benchmark(seed: u64, n: usize, dim: usize, flip_rate: f64) -> RerankBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = dim / 2;
    let n_pos = n / 2;
    let head = (0.3 * n as f64).round() as usize;
    let mut scores = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    let mut relevant = std::collections::HashMap::new();
    for i in 0..n {
        let truth = i < n_pos;
        let mut h: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        let lean = if truth { 0..half } else { half..dim };
        for j in lean {
            h[j] += rng.random_range(0.0..0.6);
        }
        let total: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= total);

        let confidence = if truth && i < head.min(n_pos) {
            rng.random_range(0.8..1.0)
        } else {
            let observed = if rng.random_bool(flip_rate) { !truth } else { truth };
            if observed {
                rng.random_range(0.4..0.8)
            } else {
                rng.random_range(0.0..0.4)
            }
        };
        let segment = SegmentRef::new(format!("bench{seed}"), i as f64, 3.0);
        relevant.insert(segment.id(), truth);
        scores.push(SegmentScore {
            source_id: segment.source_id.clone(),
            start: segment.start,
            duration: segment.duration,
            margin: 0.0,
            confidence,
            rank: 0,
            stage: Stage::Initial,
        });
        features.push(BowVector { histogram: h, segment });
    }
    crate::scoring::assign_ranks(&mut scores);
    RerankBenchmark {
        scores,
        features,
        relevant,
    }
}

/// Smooth random texture in `[0, 1]` that tiles with period `(w, h)`, so a
/// wrapped shift of it is an exact translation.
pub fn textured_frame(seed: u64, w: usize, h: usize) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            let kx = rng.random_range(1..=6) as f64;
            let ky = rng.random_range(-6..=6) as f64;
            (
                kx,
                ky,
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.5..1.0),
            )
        })
        .collect();
    let total: f64 = waves.iter().map(|w| w.3).sum();
    let mut gray = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let s: f64 = waves
                .iter()
                .map(|&(kx, ky, ph, amp)| {
                    let t = std::f64::consts::TAU * (kx * x as f64 / w as f64 + ky * y as f64 / h as f64);
                    amp * (t + ph).cos()
                })
                .sum();
            gray.push(0.5 + 0.45 * s / total);
        }
    }
    Frame::from_gray(w, h, gray)
}

/// `out(x, y) = src(x - dx, y - dy)` with wraparound: content moves by
/// `(dx, dy)`.
pub fn shift_wrapped(src: &Frame, dx: isize, dy: isize) -> Frame {
    let (w, h) = (src.width as isize, src.height as isize);
    let mut gray = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let sx = (x - dx).rem_euclid(w);
            let sy = (y - dy).rem_euclid(h);
            gray[(y * w + x) as usize] = src.gray[(sy * w + sx) as usize];
        }
    }
    Frame::from_gray(src.width, src.height, gray)
}

/// Ambient audio: broadband noise, mains hum and a few short harmonic tones
/// standing in for voices.
pub fn ambient_audio(seed: u64, secs: f64, sample_rate: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let n = (secs * sr).round() as usize;
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            0.02 * rng.random_range(-1.0..1.0) + 0.01 * (std::f64::consts::TAU * 120.0 * t).sin()
        })
        .collect();
    let tones = (secs / 2.0).ceil() as usize;
    for _ in 0..tones {
        let start = rng.random_range(0.0..secs.max(0.1));
        let len = rng.random_range(0.2..0.6);
        let f0 = rng.random_range(150.0..300.0);
        let a = rng.random_range(0.03..0.08);
        let (i0, i1) = ((start * sr) as usize, (((start + len) * sr) as usize).min(n));
        for (i, sample) in out.iter_mut().enumerate().take(i1).skip(i0) {
            let t = (i - i0) as f64 / sr;
            let env = (std::f64::consts::PI * t / len).sin();
            for h in 1..=4 {
                *sample += a / h as f64 * env * (std::f64::consts::TAU * f0 * h as f64 * t).sin();
            }
        }
    }
    out
}

/// Add a gunshot at `at_secs`: an impulsive broadband burst with a fast
/// exponential decay over a low-frequency thump.
pub fn add_gunshot(samples: &mut [f64], sample_rate: u32, at_secs: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let i0 = (at_secs * sr).round() as usize;
    let len = (0.35 * sr) as usize;
    for k in 0..len.min(samples.len().saturating_sub(i0)) {
        let t = k as f64 / sr;
        let crack = 0.7 * (-t / 0.04).exp() * rng.random_range(-1.0..1.0);
        let thump = 0.25 * (-t / 0.12).exp() * (std::f64::consts::TAU * 70.0 * t).sin();
        samples[i0 + k] = (samples[i0 + k] + crack + thump).clamp(-1.0, 1.0);
    }
}

/// A static scene with a shooter, an optional bystander and a drifting
/// smoke puff.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub shooter: BBox,
    pub bystander: Option<BBox>,
    /// Muzzle position; a dark barrel is drawn from the shooter to it.
    pub muzzle: Point,
    /// Smoke center in the shot frame.
    pub smoke_start: Point,
    /// Smoke displacement per frame.
    pub smoke_velocity: [f64; 2],
    pub smoke_radius: f64,
    pub shot_frame: usize,
    /// Number of frames the smoke stays visible.
    pub smoke_frames: usize,
}

impl SceneSpec {
    pub fn smoke_center(&self, frame: usize) -> Option<Point> {
        if frame < self.shot_frame || frame >= self.shot_frame + self.smoke_frames {
            return None;
        }
        let k = (frame - self.shot_frame) as f64;
        Some(Point::new(
            self.smoke_start.x + k * self.smoke_velocity[0],
            self.smoke_start.y + k * self.smoke_velocity[1],
        ))
    }

    /// Pixel extent of the smoke puff in `frame`.
    pub fn smoke_bbox(&self, frame: usize) -> Option<BBox> {
        let c = self.smoke_center(frame)?;
        let r = self.smoke_radius;
        Some(BBox::new(c.x - r, c.y - r, c.x + r, c.y + r).clamp_to(self.width as f64, self.height as f64))
    }
}

fn smoke_texture(dx: f64, dy: f64) -> f64 {
    let a = (0.9 * dx + 0.4 * dy).sin();
    let b = (0.3 * dx - 1.1 * dy).cos();
    let c = (0.7 * dx + 0.8 * dy + 1.3).sin();
    (a + b + c) / 6.0 + 0.5
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// Render frame `frame` of `spec` as RGB.
pub fn render_scene(spec: &SceneSpec, seed: u64, frame: usize) -> Frame {
    let (w, h) = (spec.width, spec.height);
    let bg = textured_frame(seed, w, h);
    let body = textured_frame(seed.wrapping_add(1), w, h);
    let shoulder = Point::new(spec.shooter.center().x, spec.shooter.y0 + 0.3 * spec.shooter.height());
    let smoke = spec.smoke_center(frame);
    let mut rgb = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            let g = bg.gray[i];
            let mut c = [30.0 + 200.0 * g, 35.0 + 190.0 * g, 40.0 + 170.0 * g];
            let in_person = spec.shooter.contains_strict(&p) || spec.bystander.is_some_and(|b| b.contains_strict(&p));
            if in_person {
                let g = body.gray[i];
                c = [20.0 + 90.0 * g, 25.0 + 70.0 * g, 30.0 + 60.0 * g];
            }
            if segment_distance(p, shoulder, spec.muzzle) <= 1.5 {
                c = [15.0, 15.0, 15.0];
            }
            if let Some(sc) = smoke {
                let d = p.distance(&sc);
                let r = spec.smoke_radius;
                if d < r {
                    let edge = ((r - d) / 3.0).min(1.0);
                    let alpha = 0.9 * edge;
                    let t = smoke_texture(p.x - sc.x, p.y - sc.y);
                    let s = [150.0 + 100.0 * t, 155.0 + 95.0 * t, 170.0 + 85.0 * t];
                    for k in 0..3 {
                        c[k] = (1.0 - alpha) * c[k] + alpha * s[k];
                    }
                }
            }
            rgb.extend(c.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    Frame::from_rgb(w, h, rgb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{average_precision, spr_rerank, SplParams};

    #[test]
    fn scene_smoke_moves_and_the_rest_is_static() {
        let spec = SceneSpec {
            width: 120,
            height: 90,
            shooter: BBox::new(20.0, 20.0, 40.0, 80.0),
            bystander: None,
            muzzle: Point::new(55.0, 35.0),
            smoke_start: Point::new(70.0, 35.0),
            smoke_velocity: [3.0, -1.0],
            smoke_radius: 8.0,
            shot_frame: 2,
            smoke_frames: 3,
        };
        let f1 = render_scene(&spec, 4, 1);
        let f0 = render_scene(&spec, 4, 0);
        assert_eq!(f0, f1);
        let f2 = render_scene(&spec, 4, 2);
        let changed: Vec<usize> = (0..f1.len()).filter(|&i| f1.gray[i] != f2.gray[i]).collect();
        assert!(!changed.is_empty());
        let bbox = spec.smoke_bbox(2).unwrap();
        for i in changed {
            let p = Point::new((i % 120) as f64 + 0.5, (i / 120) as f64 + 0.5);
            assert!(bbox.contains(&p));
        }
        assert_eq!(spec.smoke_center(4), Some(Point::new(76.0, 33.0)));
        assert_eq!(spec.smoke_center(5), None);
    }

    #[test]
    fn gunshot_is_loud_and_ambient_is_quiet() {
        let mut a = ambient_audio(1, 2.0, 16000);
        assert_eq!(a.len(), 32000);
        assert!(a.iter().all(|v| v.abs() < 0.5));
        add_gunshot(&mut a, 16000, 1.0, 2);
        let peak = a[16000..16800].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak > 0.4);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn benchmark_is_deterministic() {
        let a = corrupted_tail_benchmark(5, 50, 8, 0.3);
        let b = corrupted_tail_benchmark(5, 50, 8, 0.3);
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn reranking_improves_a_few_trials() {
        let mut wins = 0;
        for seed in 0..10 {
            let bench = corrupted_tail_benchmark(seed, 200, 32, 0.3);
            let before = average_precision(&bench.relevance_of(&bench.scores));
            let reranked = spr_rerank(&bench.scores, &bench.features, &SplParams::default()).unwrap();
            let after = average_precision(&bench.relevance_of(&reranked));
            eprintln!("seed {seed}: {before:.3} -> {after:.3}");
            if after >= before {
                wins += 1;
            }
        }
        assert!(wins >= 9);
    }
}
