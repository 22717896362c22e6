use serde::{Deserialize, Serialize};

use super::{PersonBox, Result, ShooterError};
use crate::geometry::{BBox, Point};
use crate::smoke::SmokeBlob;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub w_distance: f64,
    pub w_orientation: f64,
    pub score_floor: f64,
    /// Head proxy height below the box top, as a fraction of box height.
    pub head_fraction: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            w_distance: 0.6,
            w_orientation: 0.4,
            score_floor: 0.2,
            head_fraction: 0.15,
            t_min: 0.5,
            t_max: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShooterMatch {
    pub person: PersonBox,
    pub score: f64,
    /// Box center to smoke centroid, in pixels.
    pub distance: f64,
}

/// Why no shooter was paired with a smoke blob.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoShooter {
    #[error("shooter not detected")]
    NoCandidates,
    #[error("shooter not detected: best score {best:.3} below floor")]
    BelowFloor { best: f64 },
}

fn match_score(person: &PersonBox, smoke: &SmokeBlob, diag: f64, cfg: &MatchConfig) -> (f64, f64) {
    let c = person.bbox.center();
    let (dx, dy) = (smoke.centroid.x - c.x, smoke.centroid.y - c.y);
    let dist = dx.hypot(dy);
    let [mu, mv] = smoke.mean_flow;
    let norm = dist * mu.hypot(mv);
    let cos = if norm > 0.0 { (dx * mu + dy * mv) / norm } else { 0.0 };
    let score = cfg.w_distance / (1.0 + dist / diag) + cfg.w_orientation * cos.max(0.0);
    (score, dist)
}

/// Pick the person most plausibly responsible for `smoke`: close to it, and
/// with the smoke drifting away from them.
pub fn match_shooter(
    smoke: &SmokeBlob,
    people: &[PersonBox],
    frame_dims: (usize, usize),
    cfg: &MatchConfig,
) -> std::result::Result<ShooterMatch, NoShooter> {
    let diag = (frame_dims.0 as f64).hypot(frame_dims.1 as f64);
    match_shooter_with_diagonal(smoke, people, diag, cfg)
}

/// [`match_shooter`] with an explicit distance normalizer.
pub fn match_shooter_with_diagonal(
    smoke: &SmokeBlob,
    people: &[PersonBox],
    diag: f64,
    cfg: &MatchConfig,
) -> std::result::Result<ShooterMatch, NoShooter> {
    let best = people
        .iter()
        .map(|p| {
            let (score, distance) = match_score(p, smoke, diag, cfg);
            ShooterMatch {
                person: p.clone(),
                score,
                distance,
            }
        })
        .min_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.distance.total_cmp(&b.distance))
                .then(a.person.bbox.x0.total_cmp(&b.person.bbox.x0))
        })
        .ok_or(NoShooter::NoCandidates)?;
    if best.score < cfg.score_floor {
        return Err(NoShooter::BelowFloor { best: best.score });
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuzzleEstimate {
    pub point: Point,
    /// Head proxy of the shooter the segment starts from.
    pub reference: Point,
    pub shooter_ref: PersonBox,
    pub smoke_ref: SmokeBlob,
    pub t: f64,
    pub confidence: f64,
}

impl MuzzleEstimate {
    pub fn record(&self, frame_index: usize) -> LocalizationRecord {
        LocalizationRecord {
            frame_index,
            muzzle: self.point.into(),
            t: self.t,
            confidence: self.confidence,
            shooter_bbox: self.shooter_ref.bbox,
            smoke_bbox: self.smoke_ref.bbox,
        }
    }
}

/// One line of the localization output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub frame_index: usize,
    pub muzzle: [f64; 2],
    pub t: f64,
    pub confidence: f64,
    pub shooter_bbox: BBox,
    pub smoke_bbox: BBox,
}

fn head_proxy(b: &BBox, head_fraction: f64) -> Point {
    Point::new(b.center().x, b.y0 + head_fraction * b.height())
}

/// Parameter at which the ray `r + t d` leaves `b`, for `r` inside `b`.
fn exit_parameter(b: &BBox, r: Point, d: (f64, f64)) -> f64 {
    let axis = |pos: f64, dir: f64, lo: f64, hi: f64| {
        if dir > 0.0 {
            (hi - pos) / dir
        } else if dir < 0.0 {
            (lo - pos) / dir
        } else {
            f64::INFINITY
        }
    };
    axis(r.x, d.0, b.x0, b.x1).min(axis(r.y, d.1, b.y0, b.y1))
}

/// Place the muzzle at `R + t (C - R)` where `R` is the shooter's head proxy
/// and `C` the smoke centroid. Without a forced `t`, the point where the
/// segment leaves the shooter box is used, clamped to `[t_min, t_max]`.
pub fn localize_muzzle(
    shooter: &PersonBox,
    smoke: &SmokeBlob,
    t: Option<f64>,
    cfg: &MatchConfig,
) -> Result<MuzzleEstimate> {
    let r = head_proxy(&shooter.bbox, cfg.head_fraction);
    let c = smoke.centroid;
    let d = (c.x - r.x, c.y - r.y);
    if d.0 == 0.0 && d.1 == 0.0 {
        return Err(ShooterError::DegenerateGeometry);
    }
    let t = match t {
        Some(t) if t > 0.0 && t < 1.0 => t,
        Some(t) => return Err(ShooterError::InvalidParameter(format!("t = {t} outside (0, 1)"))),
        None => exit_parameter(&shooter.bbox, r, d).clamp(cfg.t_min, cfg.t_max),
    };
    Ok(MuzzleEstimate {
        point: Point::new(r.x + t * d.0, r.y + t * d.1),
        reference: r,
        shooter_ref: shooter.clone(),
        smoke_ref: smoke.clone(),
        t,
        confidence: (shooter.score * smoke.coherence).clamp(0.0, 1.0),
    })
}
