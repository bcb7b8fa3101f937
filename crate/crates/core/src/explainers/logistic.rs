//! Weighted logistic regression via full-batch gradient descent.

use super::{ExplainerError, WeightedSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// L2 strength on the weights (bias unregularized).
    pub l2: f64,
    pub epochs: u32,
    pub step: f64,
    /// Kept for provenance; initialization is zeros, so training is fully
    /// deterministic regardless of the seed.
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-4,
            epochs: 600,
            step: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    /// Predicts 1 iff w·x + b ≥ 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        (self.score(row) >= 0.0) as u8
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean weighted cross-entropy plus the L2 term; the objective the fitter
/// descends and the quantity tests compare against a grid-search oracle.
pub fn logistic_loss(model: &LogisticModel, set: &WeightedSet, l2: f64) -> f64 {
    let total = set.total_weight();
    let mut loss = 0.0;
    for (i, row) in set.features.iter_rows().enumerate() {
        let w = set.weights[i];
        if w == 0.0 {
            continue;
        }
        let z = model.score(row);
        let t = set.targets[i] as f64;
        // Numerically stable -log p(t | z).
        let nll = z.max(0.0) - z * t + (1.0 + (-z.abs()).exp()).ln();
        loss += w * nll;
    }
    loss / total + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Unweighted mean cross-entropy of a model against binary targets.
pub fn logistic_xent(model: &LogisticModel, features: &crate::matrix::Matrix, targets: &[u8]) -> f64 {
    let n = features.n_rows() as f64;
    features
        .iter_rows()
        .zip(targets)
        .map(|(row, &t)| {
            let z = model.score(row);
            z.max(0.0) - z * t as f64 + (1.0 + (-z.abs()).exp()).ln()
        })
        .sum::<f64>()
        / n
}

/// Full-batch gradient descent from zero initialization.
pub fn fit_logistic(
    set: &WeightedSet,
    config: &LogisticConfig,
) -> Result<LogisticModel, ExplainerError> {
    let d = set.features.n_cols();
    let total = set.total_weight();
    let mut model = LogisticModel {
        weights: vec![0.0; d],
        bias: 0.0,
    };
    let mut grad_w = vec![0.0; d];
    for _ in 0..config.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (i, row) in set.features.iter_rows().enumerate() {
            let w = set.weights[i];
            if w == 0.0 {
                continue;
            }
            let err = sigmoid(model.score(row)) - set.targets[i] as f64;
            let scale = w * err;
            for (g, &x) in grad_w.iter_mut().zip(row) {
                *g += scale * x;
            }
            grad_b += scale;
        }
        for (wj, g) in model.weights.iter_mut().zip(&grad_w) {
            *wj -= config.step * (g / total + config.l2 * *wj);
        }
        model.bias -= config.step * grad_b / total;
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(ExplainerError::NonFiniteLoss);
        }
    }
    Ok(model)
}
