use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{Result, ScoringError, SvmModel};
use crate::audio::{BowVector, SegmentRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Initial,
    Reranked,
}

/// One record of a ranked-list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub source_id: String,
    pub start: f64,
    pub duration: f64,
    pub margin: f64,
    pub confidence: f64,
    pub rank: usize,
    pub stage: Stage,
}

impl SegmentScore {
    pub fn segment_ref(&self) -> SegmentRef {
        SegmentRef::new(self.source_id.clone(), self.start, self.duration)
    }
}

fn ranking_order(a: &SegmentScore, b: &SegmentScore) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.start.total_cmp(&b.start))
        .then_with(|| a.source_id.cmp(&b.source_id))
}

/// Sort by confidence descending (ties: start, then source id) and number 1..N.
pub fn assign_ranks(scores: &mut [SegmentScore]) {
    scores.sort_by(ranking_order);
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank = i + 1;
    }
}

pub fn score_segments(model: &SvmModel, features: &[BowVector]) -> Result<Vec<SegmentScore>> {
    let mut scores = features
        .iter()
        .map(|f| {
            if f.histogram.len() != model.dim {
                return Err(ScoringError::DimensionMismatch {
                    expected: model.dim,
                    got: f.histogram.len(),
                });
            }
            let margin = model.margin(&f.histogram);
            Ok(SegmentScore {
                source_id: f.segment.source_id.clone(),
                start: f.segment.start,
                duration: f.segment.duration,
                margin,
                confidence: model.calibration.probability(margin),
                rank: 0,
                stage: Stage::Initial,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    assign_ranks(&mut scores);
    Ok(scores)
}

/// Keep segments whose confidence is strictly above `tau`, preserving order.
pub fn threshold_filter(scores: &[SegmentScore], tau: f64) -> Vec<SegmentScore> {
    scores.iter().filter(|s| s.confidence > tau).cloned().collect()
}

/// Average precision of a ranked relevance list (1 = relevant).
///
/// Zero when nothing is relevant.
pub fn average_precision(relevance_in_rank_order: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevance_in_rank_order.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}
