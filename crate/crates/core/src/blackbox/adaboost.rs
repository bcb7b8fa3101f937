//! Discrete AdaBoost over decision stumps.

use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Axis-aligned stump predicting in {−1, +1}: the positive side is
/// `x[feature] >= threshold`, inverted when `flip` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub flip: bool,
}

impl Stump {
    pub fn sign(&self, row: &[f64]) -> f64 {
        let hi = row[self.feature] >= self.threshold;
        if hi != self.flip {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaboostParams {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
}

impl AdaboostParams {
    /// Weighted margin; prediction thresholds at 0.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| a * s.sign(row))
            .sum()
    }
}

/// Candidate thresholds per feature: midpoints of consecutive distinct
/// observed values.
fn thresholds(features: &Matrix, feature: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = (0..features.n_rows())
        .map(|i| features.get(i, feature))
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
    vals.dedup();
    vals.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
}

/// Best stump under the current example weights. Ties keep the first
/// candidate in (feature, threshold, flip=false-first) order.
fn best_stump(
    features: &Matrix,
    ys: &[f64],
    weights: &[f64],
    feature_thresholds: &[Vec<f64>],
) -> (Stump, f64) {
    let mut best: Option<(Stump, f64)> = None;
    for feature in 0..features.n_cols() {
        for &threshold in &feature_thresholds[feature] {
            let stump = Stump {
                feature,
                threshold,
                flip: false,
            };
            // Weighted error of the unflipped stump; the flipped one errs on
            // the complement.
            let mut err = 0.0;
            for i in 0..features.n_rows() {
                if stump.sign(features.row(i)) != ys[i] {
                    err += weights[i];
                }
            }
            for (flip, e) in [(false, err), (true, 1.0 - err)] {
                let candidate = Stump { flip, ..stump };
                let better = match &best {
                    None => true,
                    Some((_, be)) => e < be - 1e-15,
                };
                if better {
                    best = Some((candidate, e));
                }
            }
        }
    }
    best.expect("at least one threshold exists for non-constant data")
}

pub fn train(features: &Matrix, labels: &[u8], rounds: u32) -> AdaboostParams {
    let n = features.n_rows();
    let ys: Vec<f64> = labels.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect();
    let feature_thresholds: Vec<Vec<f64>> = (0..features.n_cols())
        .map(|j| thresholds(features, j))
        .collect();
    if feature_thresholds.iter().all(Vec::is_empty) {
        // Every feature is constant: no stump exists, fall back to the
        // prior-majority constant via an empty ensemble (margin 0 -> 1).
        return AdaboostParams {
            stumps: Vec::new(),
            alphas: Vec::new(),
        };
    }

    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    let mut alphas = Vec::new();
    for _ in 0..rounds {
        let (stump, err) = best_stump(features, &ys, &weights, &feature_thresholds);
        if err >= 0.5 - 1e-10 {
            break; // no stump better than chance under these weights
        }
        let e = err.clamp(1e-12, 1.0 - 1e-12);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        let mut total = 0.0;
        for i in 0..n {
            weights[i] *= (-alpha * ys[i] * stump.sign(features.row(i))).exp();
            total += weights[i];
        }
        for w in &mut weights {
            *w /= total;
        }
        stumps.push(stump);
        alphas.push(alpha);
        if err <= 1e-12 {
            break; // perfect stump; further rounds add nothing
        }
    }
    AdaboostParams { stumps, alphas }
}
