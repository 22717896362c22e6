//! Self-paced reranking.
//!
//! The initial ranked list is turned into pseudo-labels (head positive, tail
//! negative). A reranking SVM is then fit on the easiest samples only, the
//! admission threshold `lambda` grows geometrically, and harder samples are
//! admitted as their loss under the current model falls below it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::rank::{assign_ranks, SegmentScore, Stage};
use super::svm::{train_linear_svm, SvmModel, SvmParams};
use super::{Result, ScoringError};
use crate::audio::BowVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplParams {
    /// Initial admission threshold; when absent, the `lambda0_percentile`
    /// quantile of the initial losses.
    pub lambda0: Option<f64>,
    pub lambda0_percentile: f64,
    /// Geometric growth factor, must exceed 1.
    pub growth: f64,
    pub max_rounds: usize,
    /// Fraction of the list taken as positive from the head and as negative
    /// from the tail.
    pub pseudo_fraction: f64,
    pub svm: SvmParams,
}

impl Default for SplParams {
    fn default() -> Self {
        Self {
            lambda0: None,
            lambda0_percentile: 0.2,
            growth: 1.3,
            max_rounds: 10,
            pseudo_fraction: 0.2,
            svm: SvmParams::default(),
        }
    }
}

/// Snapshot of one reranking round. Indices refer to the pseudo-labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplState {
    pub lambda: f64,
    pub round: usize,
    pub selected: Vec<usize>,
    pub losses: Vec<f64>,
}

/// Indices with `loss < lambda`.
pub fn select_by_loss(losses: &[f64], lambda: f64) -> Vec<usize> {
    losses
        .iter()
        .enumerate()
        .filter(|(_, &l)| l < lambda)
        .map(|(i, _)| i)
        .collect()
}

/// Pseudo-labels for a list in rank order: `(index, label)` for the head and tail.
pub fn pseudo_labels(n: usize, fraction: f64) -> Vec<(usize, i8)> {
    let per_side = ((fraction * n as f64).round() as usize).clamp(1, n / 2);
    let mut out: Vec<(usize, i8)> = (0..per_side).map(|i| (i, 1)).collect();
    out.extend((n - per_side..n).map(|i| (i, -1)));
    out
}

fn log_loss(confidence: f64, label: i8) -> f64 {
    let p = confidence.clamp(1e-12, 1.0 - 1e-12);
    if label > 0 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Add the lowest-loss sample of any class missing from `selected`.
fn ensure_both_classes(selected: &mut Vec<usize>, losses: &[f64], labels: &[i8]) {
    for class in [1i8, -1] {
        if selected.iter().any(|&i| labels[i] == class) {
            continue;
        }
        let best = (0..labels.len())
            .filter(|&i| labels[i] == class)
            .min_by(|&a, &b| losses[a].total_cmp(&losses[b]));
        if let Some(i) = best {
            selected.push(i);
        }
    }
    selected.sort_unstable();
}

fn feature_key(source_id: &str, start: f64) -> (String, i64) {
    (source_id.to_string(), (start * 1000.0).round() as i64)
}

pub fn spr_rerank(scores: &[SegmentScore], features: &[BowVector], params: &SplParams) -> Result<Vec<SegmentScore>> {
    spr_rerank_traced(scores, features, params).map(|(s, _)| s)
}

/// [`spr_rerank`] that also returns the per-round states.
pub fn spr_rerank_traced(
    scores: &[SegmentScore],
    features: &[BowVector],
    params: &SplParams,
) -> Result<(Vec<SegmentScore>, Vec<SplState>)> {
    if scores.is_empty() {
        return Err(ScoringError::EmptyRanking);
    }
    if scores.len() < 2 {
        return Err(ScoringError::DegenerateLabels);
    }
    if !(params.growth > 1.0) || params.max_rounds == 0 {
        return Err(ScoringError::InvalidParameter(
            "need growth > 1 and max_rounds >= 1".into(),
        ));
    }
    if let Some(l) = params.lambda0 {
        if !(l > 0.0) {
            return Err(ScoringError::InvalidParameter("lambda0 must be positive".into()));
        }
    }

    let mut ordered = scores.to_vec();
    assign_ranks(&mut ordered);

    let by_key: HashMap<(String, i64), &BowVector> = features
        .iter()
        .map(|f| (feature_key(&f.segment.source_id, f.segment.start), f))
        .collect();
    let xs: Vec<&[f64]> = ordered
        .iter()
        .map(|s| {
            by_key
                .get(&feature_key(&s.source_id, s.start))
                .map(|f| f.histogram.as_slice())
                .ok_or_else(|| ScoringError::MissingFeature(s.segment_ref().id()))
        })
        .collect::<Result<_>>()?;

    let pseudo = pseudo_labels(ordered.len(), params.pseudo_fraction);
    let train_x: Vec<Vec<f64>> = pseudo.iter().map(|&(i, _)| xs[i].to_vec()).collect();
    let labels: Vec<i8> = pseudo.iter().map(|&(_, y)| y).collect();
    let mut losses: Vec<f64> = pseudo
        .iter()
        .map(|&(i, y)| log_loss(ordered[i].confidence, y))
        .collect();

    let mut lambda = params
        .lambda0
        .unwrap_or_else(|| percentile(&losses, params.lambda0_percentile));
    let mut selected = select_by_loss(&losses, lambda);
    ensure_both_classes(&mut selected, &losses, &labels);

    let mut history = Vec::new();
    let mut model: Option<SvmModel> = None;
    for round in 1..=params.max_rounds {
        let mut weights = vec![0.0; labels.len()];
        for &i in &selected {
            weights[i] = 1.0;
        }
        let fitted = train_linear_svm(&train_x, &labels, &weights, params.svm)?;
        history.push(SplState {
            lambda,
            round,
            selected: selected.clone(),
            losses: losses.clone(),
        });
        let all_in = selected.len() == labels.len();
        losses = train_x
            .iter()
            .zip(&labels)
            .map(|(x, &y)| log_loss(fitted.confidence(x), y))
            .collect();
        model = Some(fitted);
        if all_in {
            break;
        }
        lambda *= params.growth;
        selected = select_by_loss(&losses, lambda);
        ensure_both_classes(&mut selected, &losses, &labels);
    }
    let model = model.expect("at least one round");

    let mut out: Vec<SegmentScore> = ordered
        .iter()
        .zip(&xs)
        .map(|(s, x)| {
            let margin = model.margin(x);
            SegmentScore {
                margin,
                confidence: model.calibration.probability(margin),
                rank: 0,
                stage: Stage::Reranked,
                ..s.clone()
            }
        })
        .collect();
    assign_ranks(&mut out);
    Ok((out, history))
}
