//! Linear SVM trained by full-batch subgradient descent, with Platt-style
//! logistic calibration of the margins.

use serde::{Deserialize, Serialize};

use super::{Result, ScoringError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// L2 regularization strength.
    pub reg: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            reg: 1e-3,
            max_iter: 1000,
        }
    }
}

/// Logistic map `p = 1 / (1 + exp(-(a * margin + b)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    pub fn probability(&self, margin: f64) -> f64 {
        logistic(self.a * margin + self.b)
    }

    /// Margin at which the calibrated probability is one half.
    pub fn midpoint(&self) -> f64 {
        -self.b / self.a
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    #[serde(default = "format_version")]
    pub version: u32,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub calibration: Calibration,
}

fn format_version() -> u32 {
    MODEL_FORMAT_VERSION
}

impl SvmModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn confidence(&self, x: &[f64]) -> f64 {
        self.calibration.probability(self.margin(x))
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.margin(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: SvmModel = serde_json::from_str(s).map_err(|e| ScoringError::BadModel(e.to_string()))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(ScoringError::BadModel(format!(
                "unknown model version {}",
                model.version
            )));
        }
        if model.weights.len() != model.dim {
            return Err(ScoringError::BadModel("weights length differs from dim".into()));
        }
        Ok(model)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Borrowed training set with labels in {-1, +1} and nonnegative weights.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub features: &'a [Vec<f64>],
    pub labels: &'a [i8],
    pub weights: &'a [f64],
}

impl TrainingSet<'_> {
    fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `reg/2 |w|^2 + (1/W) sum_i s_i max(0, 1 - y_i (w.x_i + b))`.
    pub fn objective(&self, w: &[f64], b: f64, reg: f64) -> f64 {
        let total = self.total_weight();
        let hinge: f64 = self
            .features
            .iter()
            .zip(self.labels)
            .zip(self.weights)
            .filter(|(_, &s)| s > 0.0)
            .map(|((x, &y), &s)| s * (1.0 - y as f64 * (dot(w, x) + b)).max(0.0))
            .sum();
        0.5 * reg * dot(w, w) + hinge / total
    }

    /// A subgradient of [`TrainingSet::objective`]; the gradient wherever no
    /// sample sits exactly on its margin.
    pub fn subgradient(&self, w: &[f64], b: f64, reg: f64) -> (Vec<f64>, f64) {
        let total = self.total_weight();
        let mut gw: Vec<f64> = w.iter().map(|v| reg * v).collect();
        let mut gb = 0.0;
        for ((x, &y), &s) in self.features.iter().zip(self.labels).zip(self.weights) {
            if s <= 0.0 {
                continue;
            }
            let y = y as f64;
            if y * (dot(w, x) + b) < 1.0 {
                let c = s * y / total;
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g -= c * xi;
                }
                gb -= c;
            }
        }
        (gw, gb)
    }
}

pub fn train_linear_svm(features: &[Vec<f64>], labels: &[i8], weights: &[f64], params: SvmParams) -> Result<SvmModel> {
    if features.len() != labels.len() || features.len() != weights.len() {
        return Err(ScoringError::DimensionMismatch {
            expected: features.len(),
            got: labels.len().min(weights.len()),
        });
    }
    if !(params.reg > 0.0) {
        return Err(ScoringError::InvalidParameter("reg must be positive".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(ScoringError::InvalidParameter(
            "labels must be +-1, weights nonnegative".into(),
        ));
    }
    let has = |cls: i8| labels.iter().zip(weights).any(|(&y, &s)| y == cls && s > 0.0);
    if !has(1) || !has(-1) {
        return Err(ScoringError::DegenerateLabels);
    }
    let dim = features[0].len();
    if let Some(x) = features.iter().find(|x| x.len() != dim) {
        return Err(ScoringError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }

    let set = TrainingSet {
        features,
        labels,
        weights,
    };
    let reg = params.reg;
    let radius = 1.0 / reg.sqrt();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut best = (set.objective(&w, b, reg), w.clone(), b);
    // averaged iterate over the second half of the run
    let mut avg_w = vec![0.0; dim];
    let mut avg_b = 0.0;
    let mut avg_n = 0usize;
    let iters = params.max_iter.max(1);
    for t in 1..=iters {
        let (gw, gb) = set.subgradient(&w, b, reg);
        let eta = 1.0 / (reg * (t as f64 + 10.0));
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= eta * g;
        }
        b -= eta * gb;
        // projection onto the ball that contains the optimum
        let norm = dot(&w, &w).sqrt();
        if norm > radius {
            w.iter_mut().for_each(|wi| *wi *= radius / norm);
        }
        let obj = set.objective(&w, b, reg);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
        if t > iters / 2 {
            avg_n += 1;
            for (a, wi) in avg_w.iter_mut().zip(&w) {
                *a += (wi - *a) / avg_n as f64;
            }
            avg_b += (b - avg_b) / avg_n as f64;
        }
    }
    if avg_n > 0 && set.objective(&avg_w, avg_b, reg) < best.0 {
        best = (0.0, avg_w, avg_b);
    }
    let (_, weights_out, bias) = best;

    let margins: Vec<f64> = features.iter().map(|x| dot(&weights_out, x) + bias).collect();
    let calibration = fit_calibration(&margins, labels, weights);
    Ok(SvmModel {
        version: MODEL_FORMAT_VERSION,
        dim,
        weights: weights_out,
        bias,
        calibration,
    })
}

/// Weighted logistic fit of labels on margins with Platt's smoothed targets,
/// solved by damped Newton iterations.
pub fn fit_calibration(margins: &[f64], labels: &[i8], weights: &[f64]) -> Calibration {
    let (mut n_pos, mut n_neg) = (0.0, 0.0);
    for (&y, &s) in labels.iter().zip(weights) {
        if y > 0 {
            n_pos += s;
        } else {
            n_neg += s;
        }
    }
    let t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    let t_neg = 1.0 / (n_neg + 2.0);
    let samples: Vec<(f64, f64, f64)> = margins
        .iter()
        .zip(labels)
        .zip(weights)
        .filter(|(_, &s)| s > 0.0)
        .map(|((&m, &y), &s)| (m, if y > 0 { t_pos } else { t_neg }, s))
        .collect();

    let loss = |a: f64, b: f64| -> f64 {
        samples
            .iter()
            .map(|&(m, t, s)| {
                let z = a * m + b;
                // log(1 + e^z) - t z, computed stably
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                s * (softplus - t * z)
            })
            .sum()
    };

    let mut a = 1.0;
    let mut b = ((n_pos + 1.0) / (n_neg + 1.0)).ln();
    let mut current = loss(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for &(m, t, s) in &samples {
            let p = logistic(a * m + b);
            let d = s * (p - t);
            ga += d * m;
            gb += d;
            let h = s * p * (1.0 - p);
            haa += h * m * m;
            hab += h * m;
            hbb += h;
        }
        if ga.abs() < 1e-10 && gb.abs() < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det.abs() > 1e-300 {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nb) = (a - step * da, b - step * db);
            let l = loss(na, nb);
            if l < current {
                a = na;
                b = nb;
                current = l;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Calibration { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Points at distance >= 0.5 on either side of the line x + 2y = 1.
    fn separable(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let norm = 5f64.sqrt();
        while xs.len() < n {
            let p = vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let signed = (p[0] + 2.0 * p[1] - 1.0) / norm;
            if signed.abs() < 0.5 {
                continue;
            }
            ys.push(if signed > 0.0 { 1 } else { -1 });
            xs.push(p);
        }
        (xs, ys)
    }

    #[test]
    fn separable_set_is_fit_exactly() {
        let (xs, ys) = separable(7, 200);
        let w = vec![1.0; xs.len()];
        let model = train_linear_svm(
            &xs,
            &ys,
            &w,
            SvmParams {
                reg: 1e-3,
                max_iter: 1000,
            },
        )
        .unwrap();
        let acc = xs.iter().zip(&ys).filter(|(x, &y)| model.predict(x) == y).count();
        assert_eq!(acc, xs.len());
        assert!(model.calibration.a > 0.0);
    }

    #[test]
    fn one_class_is_degenerate() {
        let xs = vec![vec![0.0], vec![1.0]];
        let err = train_linear_svm(&xs, &[1, 1], &[1.0, 1.0], SvmParams::default()).unwrap_err();
        assert!(matches!(err, ScoringError::DegenerateLabels));
        // a class carried only by zero-weight samples is absent as well
        let err = train_linear_svm(&xs, &[1, -1], &[1.0, 0.0], SvmParams::default()).unwrap_err();
        assert!(matches!(err, ScoringError::DegenerateLabels));
    }

    #[test]
    fn duplicating_samples_keeps_predictions() {
        let (xs, ys) = separable(3, 60);
        let w = vec![1.0; xs.len()];
        let params = SvmParams {
            reg: 1e-2,
            max_iter: 400,
        };
        let single = train_linear_svm(&xs, &ys, &w, params).unwrap();
        let xs2: Vec<Vec<f64>> = xs.iter().chain(&xs).cloned().collect();
        let ys2: Vec<i8> = ys.iter().chain(&ys).copied().collect();
        let double = train_linear_svm(&xs2, &ys2, &vec![1.0; xs2.len()], params).unwrap();
        for x in &xs {
            assert_eq!(single.predict(x), double.predict(x));
        }
    }

    #[test]
    fn calibration_midpoint_is_one_half() {
        let cal = Calibration { a: 2.5, b: -0.75 };
        assert!((cal.probability(cal.midpoint()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn confidence_increases_with_margin() {
        let cal = Calibration { a: 1.7, b: 0.2 };
        let ps: Vec<f64> = (-20..=20).map(|m| cal.probability(m as f64 * 0.25)).collect();
        assert!(ps.windows(2).all(|w| w[1] > w[0]));
        assert!(ps.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn model_json_round_trip() {
        let m = SvmModel {
            version: MODEL_FORMAT_VERSION,
            dim: 2,
            weights: vec![0.5, -1.25],
            bias: 0.125,
            calibration: Calibration { a: 3.0, b: -0.5 },
        };
        assert_eq!(SvmModel::from_json(&m.to_json()).unwrap(), m);
        let bad = m.to_json().replace("\"dim\": 2", "\"dim\": 3");
        assert!(SvmModel::from_json(&bad).is_err());
    }

    #[test]
    fn finite_difference_matches_subgradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..50 {
            let n = 12;
            let d = 4;
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ys: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
            let ws: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let b = rng.random_range(-0.5..0.5);
            let set = TrainingSet {
                features: &xs,
                labels: &ys,
                weights: &ws,
            };
            let reg = 0.1;
            let h = 1e-6;
            // skip points where a sample is within the probe radius of its hinge
            let near_kink = xs
                .iter()
                .zip(&ys)
                .any(|(x, &y)| (1.0 - y as f64 * (dot(&w, x) + b)).abs() < 1e-3);
            if near_kink {
                continue;
            }
            let (gw, gb) = set.subgradient(&w, b, reg);
            for j in 0..d {
                let mut wp = w.clone();
                wp[j] += h;
                let mut wm = w.clone();
                wm[j] -= h;
                let fd = (set.objective(&wp, b, reg) - set.objective(&wm, b, reg)) / (2.0 * h);
                assert!((fd - gw[j]).abs() < 1e-4, "trial {trial} coord {j}: {fd} vs {}", gw[j]);
            }
            let fd = (set.objective(&w, b + h, reg) - set.objective(&w, b - h, reg)) / (2.0 * h);
            assert!((fd - gb).abs() < 1e-4);
        }
    }
}
