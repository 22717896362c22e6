//! Gun-smoke candidates as compact coherent-motion blobs on a static
//! background.

use serde::{Deserialize, Serialize};

use crate::flow::FlowField;
use crate::geometry::{BBox, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmokeConfig {
    /// Absolute motion threshold in pixels.
    pub tau_abs: f64,
    /// Relative threshold as a multiple of the background median.
    pub kappa: f64,
    /// Blob area bounds as fractions of the frame area.
    pub area_min: f64,
    pub area_max: f64,
    pub coherence_min: f64,
    /// Frames with a larger moving fraction are treated as global motion.
    pub moving_max: f64,
}

impl Default for SmokeConfig {
    fn default() -> Self {
        Self {
            tau_abs: 1.0,
            kappa: 4.0,
            area_min: 0.0005,
            area_max: 0.05,
            coherence_min: 0.6,
            moving_max: 0.35,
        }
    }
}

impl SmokeConfig {
    /// Magnitude threshold for a field with the given background median.
    pub fn threshold(&self, background_median: f64) -> f64 {
        self.tau_abs.max(self.kappa * background_median)
    }

    /// Background magnitude used as the intensity denominator. Bounded below
    /// by `tau_abs / kappa`, so every admitted blob has intensity above
    /// `kappa`.
    pub fn background_scale(&self, background_median: f64) -> f64 {
        background_median.max(self.tau_abs / self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticnessReport {
    pub background_median_mag: f64,
    pub moving_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmokeBlob {
    /// Magnitude-weighted, with pixel `(x, y)` centered at `(x + 0.5, y + 0.5)`.
    pub centroid: Point,
    /// Pixel extent; `x1`/`y1` are exclusive.
    pub bbox: BBox,
    pub area: usize,
    pub mean_flow: [f64; 2],
    /// Mean resultant length of the flow directions.
    pub coherence: f64,
    pub intensity: f64,
}

/// One line of the blob output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobRecord {
    pub frame_index: usize,
    #[serde(flatten)]
    pub blob: SmokeBlob,
}

/// Everything [`detect_smoke`] decided, for diagnostics and invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SmokeDetection {
    pub report: StaticnessReport,
    pub threshold: f64,
    /// True when the moving-fraction gate rejected the frame.
    pub global_motion: bool,
    pub blobs: Vec<SmokeBlob>,
    /// Pixel indices of each blob, parallel to `blobs`.
    pub pixels: Vec<Vec<usize>>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn flow_magnitude_stats(f: &FlowField, tau_abs: f64) -> StaticnessReport {
    let mags: Vec<f64> = f.magnitudes().into_iter().flatten().collect();
    let moving = mags.iter().filter(|&&m| m > tau_abs).count();
    let moving_fraction = if mags.is_empty() {
        0.0
    } else {
        moving as f64 / mags.len() as f64
    };
    StaticnessReport {
        background_median_mag: median(mags),
        moving_fraction,
    }
}

/// Pixels whose valid magnitude exceeds `threshold`.
pub fn motion_mask(f: &FlowField, threshold: f64) -> Vec<bool> {
    (0..f.len()).map(|i| f.valid[i] && f.magnitude(i) > threshold).collect()
}

/// 8-connected components of `mask`, each as ascending pixel indices, in
/// raster order of their first pixel.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    let j = ny as usize * width + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Pixel-extent box of a set of pixel indices.
pub fn pixel_bbox(pixels: &[usize], width: usize) -> BBox {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &i in pixels {
        let (x, y) = (i % width, i / width);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x + 1);
        y1 = y1.max(y + 1);
    }
    BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64)
}

fn describe(f: &FlowField, pixels: &[usize], background: f64) -> SmokeBlob {
    let (mut wx, mut wy, mut wsum) = (0.0, 0.0, 0.0);
    let (mut su, mut sv, mut msum) = (0.0, 0.0, 0.0);
    let (mut cx, mut cy) = (0.0, 0.0);
    for &i in pixels {
        let m = f.magnitude(i);
        let (u, v) = (f.u[i] as f64, f.v[i] as f64);
        let (x, y) = ((i % f.width) as f64 + 0.5, (i / f.width) as f64 + 0.5);
        wx += m * x;
        wy += m * y;
        wsum += m;
        su += u;
        sv += v;
        msum += m;
        if m > 0.0 {
            cx += u / m;
            cy += v / m;
        }
    }
    let n = pixels.len() as f64;
    SmokeBlob {
        centroid: Point::new(wx / wsum, wy / wsum),
        bbox: pixel_bbox(pixels, f.width),
        area: pixels.len(),
        mean_flow: [su / n, sv / n],
        coherence: (cx.hypot(cy) / n).clamp(0.0, 1.0),
        intensity: msum / n / background,
    }
}

pub fn detect_smoke(f: &FlowField, cfg: &SmokeConfig) -> SmokeDetection {
    let report = flow_magnitude_stats(f, cfg.tau_abs);
    let threshold = cfg.threshold(report.background_median_mag);
    let mut out = SmokeDetection {
        report,
        threshold,
        global_motion: report.moving_fraction > cfg.moving_max,
        blobs: Vec::new(),
        pixels: Vec::new(),
    };
    if out.global_motion || f.is_empty() {
        return out;
    }
    let frame_area = f.len() as f64;
    let background = cfg.background_scale(report.background_median_mag);
    let mut found: Vec<(SmokeBlob, Vec<usize>)> = connected_components(&motion_mask(f, threshold), f.width, f.height)
        .into_iter()
        .filter(|c| {
            let frac = c.len() as f64 / frame_area;
            frac >= cfg.area_min && frac <= cfg.area_max
        })
        .map(|c| (describe(f, &c, background), c))
        .filter(|(b, _)| b.coherence >= cfg.coherence_min)
        .collect();
    found.sort_by(|(a, _), (b, _)| {
        b.intensity
            .total_cmp(&a.intensity)
            .then(a.centroid.y.total_cmp(&b.centroid.y))
            .then(a.centroid.x.total_cmp(&b.centroid.x))
    });
    (out.blobs, out.pixels) = found.into_iter().unzip();
    out
}

/// Smoke blobs sorted by intensity, strongest first. Empty means no smoke.
pub fn detect_smoke_blobs(f: &FlowField, cfg: &SmokeConfig) -> Vec<SmokeBlob> {
    detect_smoke(f, cfg).blobs
}

/// Map a continuous intensity onto the 1–5 annotation scale: level 1 up to
/// twice `kappa`, then one level per doubling.
pub fn intensity_level(intensity: f64, kappa: f64) -> u8 {
    if !(intensity > 0.0) || !(kappa > 0.0) {
        return 1;
    }
    let level = 1.0 + (intensity / kappa).log2().floor();
    level.clamp(1.0, 5.0) as u8
}
