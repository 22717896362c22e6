use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AudioError, MfccFrame, Result, SegmentRef};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 256,
            max_iter: 100,
            seed: 0,
        }
    }
}

/// Vector-quantization codebook over MFCC frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    pub k: usize,
    pub training_seed: u64,
    /// Mean squared distortion after each assignment step.
    #[serde(default)]
    pub distortion_history: Vec<f64>,
}

impl Codebook {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, v: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(c, v);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn final_distortion(&self) -> f64 {
        self.distortion_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Normalized histogram of codeword assignments for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowVector {
    pub histogram: Vec<f64>,
    pub segment: SegmentRef,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn frame_key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Lloyd's k-means with seeded initialization from distinct frames.
pub fn build_codebook(frames: &[MfccFrame], params: KMeansParams) -> Result<Codebook> {
    let k = params.k;
    if k == 0 {
        return Err(AudioError::InvalidParameter("k must be positive".into()));
    }
    if frames.len() < k {
        return Err(AudioError::InsufficientData {
            frames: frames.len(),
            k,
        });
    }
    let dim = frames[0].coefficients.len();
    if frames.iter().any(|f| f.coefficients.len() != dim) {
        return Err(AudioError::InvalidParameter("frames differ in dimensionality".into()));
    }
    if frames.iter().any(|f| f.coefficients.iter().any(|x| !x.is_finite())) {
        return Err(AudioError::InvalidParameter("non-finite coefficient".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut seen = HashSet::new();
    let mut distinct: Vec<&[f64]> = frames
        .iter()
        .map(|f| f.coefficients.as_slice())
        .filter(|c| seen.insert(frame_key(c)))
        .collect();
    distinct.shuffle(&mut rng);
    let mut centroids: Vec<Vec<f64>> = distinct.iter().take(k).map(|c| c.to_vec()).collect();
    // fewer distinct frames than k: duplicates stay empty under lowest-index tie breaking
    let mut i = 0;
    while centroids.len() < k {
        centroids.push(distinct[i % distinct.len()].to_vec());
        i += 1;
    }

    let mut assignment = vec![usize::MAX; frames.len()];
    let mut history = Vec::new();
    let mut book = Codebook {
        centroids,
        k,
        training_seed: params.seed,
        distortion_history: Vec::new(),
    };
    for _ in 0..params.max_iter.max(1) {
        let mut changed = false;
        let mut total = 0.0;
        for (slot, f) in assignment.iter_mut().zip(frames) {
            let j = book.nearest(&f.coefficients);
            total += sq_dist(&book.centroids[j], &f.coefficients);
            if *slot != j {
                *slot = j;
                changed = true;
            }
        }
        history.push(total / frames.len() as f64);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&j, f) in assignment.iter().zip(frames) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(&f.coefficients) {
                *s += x;
            }
        }
        for ((c, s), &n) in book.centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|x| x / n as f64).collect();
            }
        }
    }
    book.distortion_history = history;
    Ok(book)
}

pub fn encode_bow(frames: &[MfccFrame], codebook: &Codebook, segment: SegmentRef) -> Result<BowVector> {
    if frames.is_empty() {
        return Err(AudioError::EmptySegment);
    }
    let mut histogram = vec![0.0; codebook.k];
    for f in frames {
        histogram[codebook.nearest(&f.coefficients)] += 1.0;
    }
    let n = frames.len() as f64;
    histogram.iter_mut().for_each(|h| *h /= n);
    Ok(BowVector { histogram, segment })
}
