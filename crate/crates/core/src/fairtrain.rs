//! Constrained surrogate training via the exponentiated-gradient reduction.
//!
//! The unfairness bound `unf ≤ ε` is expressed as pairs of linear
//! inequalities over conditional positive-prediction rates. A vector of
//! non-negative multipliers λ (one per inequality, 1-norm capped at `B`)
//! prices the constraints; each round folds the prices into per-row signed
//! costs, fits the base family on the reweighted instance (the best
//! response), and updates λ multiplicatively on the running mixture's
//! constraint violations. The uniform mixture of best responses approaches
//! the constrained optimum; a deterministic member is picked for reporting.

use crate::explainers::{explainer_predict, BaseLearner, Explainer, ExplainerError, WeightedSet};
use crate::matrix::Matrix;
use crate::metrics::FairnessMetricId;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FairtrainError {
    #[error("labels/groups/features length mismatch")]
    LengthMismatch,
    #[error("both group values must be present")]
    SingleGroup,
    #[error("every conditioning cell of the constraint is empty")]
    DegenerateConstraint,
    #[error(transparent)]
    Explainer(#[from] ExplainerError),
}

/// The ±ε inequality pair system for one metric on one evaluation tuple.
///
/// Row `2k` carries the signed gap of conditioning event `k` (group 0 minus
/// group 1), row `2k+1` its negation, so `g_row(h) ≤ ε` for all rows is
/// exactly `unfairness(h) ≤ ε`.
#[derive(Debug, Clone)]
pub struct MomentConstraint {
    pub metric: FairnessMetricId,
    pub epsilon: f64,
    rows: Vec<Vec<f64>>,
    /// Events skipped because a conditioning cell was empty.
    pub dropped_events: usize,
}

impl MomentConstraint {
    pub fn new(
        metric: FairnessMetricId,
        epsilon: f64,
        labels: &[u8],
        groups: &[u8],
    ) -> Result<Self, FairtrainError> {
        if labels.len() != groups.len() {
            return Err(FairtrainError::LengthMismatch);
        }
        if !(groups.contains(&0) && groups.contains(&1)) {
            return Err(FairtrainError::SingleGroup);
        }
        let n = labels.len();
        // Conditioning events: which rows a gap's rates are computed over.
        let events: Vec<Box<dyn Fn(usize) -> bool>> = match metric {
            FairnessMetricId::Sp => vec![Box::new(|_| true)],
            FairnessMetricId::Pe => {
                let l = labels.to_vec();
                vec![Box::new(move |i| l[i] == 0)]
            }
            FairnessMetricId::EOpp => {
                let l = labels.to_vec();
                vec![Box::new(move |i| l[i] == 1)]
            }
            FairnessMetricId::EOdds => {
                let l0 = labels.to_vec();
                let l1 = labels.to_vec();
                vec![Box::new(move |i| l0[i] == 0), Box::new(move |i| l1[i] == 1)]
            }
        };

        let mut rows = Vec::new();
        let mut dropped_events = 0;
        for event in &events {
            let n0 = (0..n).filter(|&i| event(i) && groups[i] == 0).count();
            let n1 = (0..n).filter(|&i| event(i) && groups[i] == 1).count();
            if n0 == 0 || n1 == 0 {
                dropped_events += 1;
                continue;
            }
            let mut coeffs = vec![0.0; n];
            for (i, c) in coeffs.iter_mut().enumerate() {
                if event(i) {
                    *c = if groups[i] == 0 {
                        1.0 / n0 as f64
                    } else {
                        -1.0 / n1 as f64
                    };
                }
            }
            let negated: Vec<f64> = coeffs.iter().map(|c| -c).collect();
            rows.push(coeffs);
            rows.push(negated);
        }
        if rows.is_empty() {
            return Err(FairtrainError::DegenerateConstraint);
        }
        Ok(MomentConstraint {
            metric,
            epsilon,
            rows,
            dropped_events,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Signed gap of every constraint row for a prediction vector.
    pub fn gaps(&self, preds: &[u8]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|coeffs| {
                coeffs
                    .iter()
                    .zip(preds)
                    .filter(|(_, &p)| p == 1)
                    .map(|(c, _)| c)
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgParams {
    /// Rounds of the reduction.
    pub iterations: u32,
    /// Multiplicative-weights step; defaults to sqrt(ln(max(rows, 2)) / T).
    pub learning_rate: Option<f64>,
    /// 1-norm bound B on the multipliers.
    pub bound: f64,
    /// Convergence gap below which the result is flagged converged.
    pub tolerance: f64,
}

impl Default for EgParams {
    fn default() -> Self {
        EgParams {
            iterations: 50,
            learning_rate: None,
            bound: 100.0,
            tolerance: 0.01,
        }
    }
}

/// One best response and its measurements on the training tuple.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub model: Explainer,
    /// Mixture weight (uniform over the completed rounds).
    pub weight: f64,
    /// Mean disagreement with the black-box labels.
    pub loss: f64,
    /// Per-constraint-row signed gaps.
    pub gaps: Vec<f64>,
}

impl IterateRecord {
    /// Worst constraint-row gap; equals the iterate's unfairness because the
    /// rows come in ± pairs.
    pub fn violation(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedResult {
    pub iterates: Vec<IterateRecord>,
    /// Known family members recorded at mixture weight 0: the two constant
    /// predictors. Constants have zero gap on every row, so the
    /// deterministic pick always has a feasible candidate even when the
    /// best-response path jumps over the feasible region (shallow trees on
    /// coarse features do).
    pub anchors: Vec<IterateRecord>,
    /// Duality-gap estimate at the final round.
    pub gap: f64,
    /// True when the gap fell under the configured tolerance.
    pub converged: bool,
    pub epsilon: f64,
}

impl ConstrainedResult {
    pub fn mixture_loss(&self) -> f64 {
        self.iterates.iter().map(|it| it.weight * it.loss).sum()
    }

    /// Mixture's worst constraint-row gap (its unfairness).
    pub fn mixture_violation(&self) -> f64 {
        let k = self.iterates[0].gaps.len();
        (0..k)
            .map(|j| {
                self.iterates
                    .iter()
                    .map(|it| it.weight * it.gaps[j])
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Audit view: iterates by reference, weights, losses, violations, gap.
    pub fn audit_json(&self, iterate_refs: &[String]) -> String {
        #[derive(Serialize)]
        struct Audit<'a> {
            iterates: &'a [String],
            weights: Vec<f64>,
            losses: Vec<f64>,
            violations: Vec<Vec<f64>>,
            gap: f64,
            converged: bool,
            epsilon: f64,
        }
        serde_json::to_string_pretty(&Audit {
            iterates: iterate_refs,
            weights: self.iterates.iter().map(|it| it.weight).collect(),
            losses: self.iterates.iter().map(|it| it.loss).collect(),
            violations: self.iterates.iter().map(|it| it.gaps.clone()).collect(),
            gap: self.gap,
            converged: self.converged,
            epsilon: self.epsilon,
        })
        .expect("audit serialization cannot fail")
    }
}

fn lambda_from_theta(theta: &[f64], bound: f64) -> Vec<f64> {
    let denom: f64 = 1.0 + theta.iter().map(|t| t.exp()).sum::<f64>();
    theta.iter().map(|t| bound * t.exp() / denom).collect()
}

/// Cost-sensitive best response: folds the priced constraints into per-row
/// signed costs, reduces them to weighted binary targets (negative effective
/// cost of predicting 1 flips the target, the magnitude becomes the weight)
/// and fits the base family.
pub fn best_response(
    lambda: &[f64],
    features: &Matrix,
    bb_labels: &[u8],
    constraint: &MomentConstraint,
    learner: &dyn BaseLearner,
) -> Result<Explainer, FairtrainError> {
    let n = features.n_rows();
    let mut targets = vec![0u8; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Cost of predicting 1 minus cost of predicting 0.
        let mut delta = if bb_labels[i] == 0 { 1.0 } else { -1.0 } / n as f64;
        for (l, coeffs) in lambda.iter().zip(&constraint.rows) {
            delta += l * coeffs[i];
        }
        targets[i] = (delta < 0.0) as u8;
        weights[i] = delta.abs() * n as f64;
    }
    let set = WeightedSet::new(features, &targets, &weights)?;
    Ok(learner.fit(&set)?)
}

/// Runs up to `params.iterations` rounds of the reduction on the suing-group
/// instance (features with the black-box's labels as targets).
///
/// Each round updates the multipliers from the running mixture's constraint
/// violations, fits the best response under the updated prices and records
/// it. Stops early only if the duality-gap estimate collapses to zero (the
/// constraint is inactive at the optimum). The returned mixture weights are
/// uniform. A gap above `params.tolerance` leaves `converged` false; the
/// result is still returned.
pub fn exponentiated_gradient(
    learner: &dyn BaseLearner,
    features: &Matrix,
    bb_labels: &[u8],
    constraint: &MomentConstraint,
    params: &EgParams,
) -> Result<ConstrainedResult, FairtrainError> {
    assert!(params.iterations >= 1, "need at least one round");
    if bb_labels.len() != features.n_rows() {
        return Err(FairtrainError::LengthMismatch);
    }
    let n = features.n_rows() as f64;
    let k = constraint.n_rows();
    let t_max = params.iterations;
    let eta = params
        .learning_rate
        .unwrap_or_else(|| ((k.max(2) as f64).ln() / t_max as f64).sqrt());
    let eps = constraint.epsilon;

    let mut theta = vec![0.0; k];
    let mut iterates: Vec<IterateRecord> = Vec::with_capacity(t_max as usize);
    let mut sum_gaps = vec![0.0; k];
    let mut sum_loss = 0.0;
    let mut best_dual = f64::NEG_INFINITY;
    let mut min_loss = f64::INFINITY;
    let mut gap = f64::INFINITY;

    for t in 1..=t_max {
        if t > 1 {
            let done = (t - 1) as f64;
            for (th, sg) in theta.iter_mut().zip(&sum_gaps) {
                *th = (*th + eta * (sg / done - eps)).clamp(-50.0, 50.0);
            }
        }
        let lambda = lambda_from_theta(&theta, params.bound);
        let model = best_response(&lambda, features, bb_labels, constraint, learner)?;
        let preds = explainer_predict(&model, features)?;
        let loss = preds
            .iter()
            .zip(bb_labels)
            .filter(|(p, b)| p != b)
            .count() as f64
            / n;
        let gaps = constraint.gaps(&preds);

        // Lagrangian value at (h_t, λ_t): a dual estimate since h_t is the
        // (approximate) best response to λ_t.
        let dual = loss
            + lambda
                .iter()
                .zip(&gaps)
                .map(|(l, g)| l * (g - eps))
                .sum::<f64>();
        best_dual = best_dual.max(dual);
        min_loss = min_loss.min(loss);

        sum_loss += loss;
        for (sg, g) in sum_gaps.iter_mut().zip(&gaps) {
            *sg += g;
        }
        iterates.push(IterateRecord {
            model,
            weight: 0.0,
            loss,
            gaps,
        });

        let done = t as f64;
        let mix_loss = sum_loss / done;
        let mix_viol = sum_gaps
            .iter()
            .map(|sg| sg / done - eps)
            .fold(f64::NEG_INFINITY, f64::max);
        let primal = mix_loss + params.bound * mix_viol.max(0.0);
        // min_loss stands in for the dual value at λ = 0 (round 1's best
        // response is the unconstrained fit).
        gap = primal - best_dual.max(min_loss);
        if gap <= 1e-9 {
            break;
        }
    }

    let w = 1.0 / iterates.len() as f64;
    for it in &mut iterates {
        it.weight = w;
    }

    let mut anchors = Vec::with_capacity(2);
    for constant in [0u8, 1u8] {
        let targets = vec![constant; bb_labels.len()];
        let ones = vec![1.0; bb_labels.len()];
        let set = WeightedSet::new(features, &targets, &ones)?;
        let model = learner.fit(&set)?;
        let preds = explainer_predict(&model, features)?;
        let loss = preds
            .iter()
            .zip(bb_labels)
            .filter(|(p, b)| p != b)
            .count() as f64
            / n;
        let gaps = constraint.gaps(&preds);
        anchors.push(IterateRecord {
            model,
            weight: 0.0,
            loss,
            gaps,
        });
    }

    Ok(ConstrainedResult {
        iterates,
        anchors,
        gap,
        converged: gap <= params.tolerance,
        epsilon: eps,
    })
}

pub const DEFAULT_PICK_SLACK: f64 = 0.01;

/// Outcome of [`pick_deterministic`].
#[derive(Debug, Clone)]
pub struct DeterministicPick {
    pub explainer: Explainer,
    /// True when no single iterate satisfied the constraint and the full
    /// mixture was returned instead.
    pub randomized_fallback: bool,
    pub loss: f64,
    pub violation: f64,
}

/// Picks the lowest-loss candidate (iterates, then anchors) whose own
/// violation is within `slack` of ε; if none qualifies, returns the full
/// mixture as a randomized classifier, flagged. Ties keep the earlier
/// candidate.
pub fn pick_deterministic(result: &ConstrainedResult, slack: f64) -> DeterministicPick {
    let feasible = result
        .iterates
        .iter()
        .chain(&result.anchors)
        .enumerate()
        .filter(|(_, it)| it.violation() <= result.epsilon + slack)
        .min_by(|(ia, a), (ib, b)| {
            a.loss
                .partial_cmp(&b.loss)
                .expect("finite losses")
                .then(ia.cmp(ib))
        });
    match feasible {
        Some((_, it)) => DeterministicPick {
            explainer: it.model.clone(),
            randomized_fallback: false,
            loss: it.loss,
            violation: it.violation(),
        },
        None => {
            let members = result
                .iterates
                .iter()
                .filter(|it| it.weight > 0.0)
                .map(|it| crate::explainers::MixtureMember {
                    model: it.model.clone(),
                    weight: it.weight,
                })
                .collect();
            DeterministicPick {
                explainer: Explainer::Randomized(crate::explainers::RandomizedClassifier {
                    members,
                }),
                randomized_fallback: true,
                loss: result.mixture_loss(),
                violation: result.mixture_violation(),
            }
        }
    }
}
