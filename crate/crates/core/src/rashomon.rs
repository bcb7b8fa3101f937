//! Range of signed disparity within the set of near-optimal surrogates.
//!
//! Fixing a loss bound `v` on disagreement with the black-box's predictions,
//! the attainable signed disparities of surrogates with loss ≤ v form an
//! interval; its width at a given fidelity level (= 1 − loss) measures how
//! much room a fairwashing attack has. The extremes are found with the same
//! exponentiated-gradient machinery as constrained training, with the roles
//! swapped: the disparity becomes the (linear) objective and the loss the
//! single priced constraint.

use crate::attack::SuingInstance;
use crate::exec::map_indexed;
use crate::explainers::{explainer_predict, BaseLearner, Explainer, ExplainerError, WeightedSet};
use crate::fairtrain::FairtrainError;
use crate::metrics::{self, FairnessMetricId, MetricsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RashomonError {
    #[error("loss bound {v} is below the reference loss {reference}")]
    InfeasibleBound { v: f64, reference: f64 },
    #[error("equalized odds has no linear signed disparity; use sp, pe or eopp")]
    UnsupportedMetric,
    #[error("grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Explainer(#[from] ExplainerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Fairtrain(#[from] FairtrainError),
}

/// Unconstrained fit of the family on the suing instance plus its losses.
#[derive(Debug, Clone)]
pub struct ReferenceFit {
    pub model: Explainer,
    /// Mean disagreement with the black-box labels.
    pub loss01: f64,
    /// Recorded for logistic models only.
    pub cross_entropy: Option<f64>,
}

pub fn reference_fit(
    learner: &dyn BaseLearner,
    instance: &SuingInstance,
) -> Result<ReferenceFit, RashomonError> {
    let weights = vec![1.0; instance.len()];
    let set = WeightedSet::new(&instance.features, &instance.bb_labels, &weights)?;
    let model = learner.fit(&set)?;
    let preds = explainer_predict(&model, &instance.features)?;
    let loss01 = zero_one_loss(&preds, &instance.bb_labels);
    let cross_entropy = match &model {
        Explainer::Logistic(m) => Some(crate::explainers::logistic_xent(
            m,
            &instance.features,
            &instance.bb_labels,
        )),
        _ => None,
    };
    Ok(ReferenceFit {
        model,
        loss01,
        cross_entropy,
    })
}

fn zero_one_loss(preds: &[u8], targets: &[u8]) -> f64 {
    preds.iter().zip(targets).filter(|(p, t)| p != t).count() as f64 / preds.len() as f64
}

/// The loss budget: either absolute, or a multiplicative slack on the
/// reference loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossBound {
    Absolute(f64),
    /// v = (1 + τ) · L(f*).
    Slack(f64),
}

impl LossBound {
    pub fn resolve(&self, reference_loss: f64) -> f64 {
        match self {
            LossBound::Absolute(v) => *v,
            LossBound::Slack(tau) => (1.0 + tau) * reference_loss,
        }
    }
}

/// A Rashomon query: family, reference model, loss budget, metric, and the
/// suing instance the losses and disparities are measured on.
pub struct RashomonSpec<'a> {
    pub learner: &'a dyn BaseLearner,
    pub instance: &'a SuingInstance,
    pub metric: FairnessMetricId,
    pub reference: &'a ReferenceFit,
    pub bound: LossBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RashomonParams {
    pub iterations: u32,
    pub learning_rate: f64,
    /// Cap on the loss-constraint multiplier.
    pub bound: f64,
    /// Feasibility slack when picking the reported extreme.
    pub slack: f64,
}

impl Default for RashomonParams {
    fn default() -> Self {
        RashomonParams {
            iterations: 60,
            learning_rate: 0.5,
            bound: 100.0,
            slack: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

#[derive(Debug, Clone)]
pub struct DisparityExtreme {
    pub model: Explainer,
    pub disparity: f64,
    pub loss: f64,
}

/// Per-row contribution of a positive prediction to the signed disparity.
fn disparity_coeffs(
    metric: FairnessMetricId,
    labels: &[u8],
    groups: &[u8],
) -> Result<Vec<f64>, RashomonError> {
    let event: Box<dyn Fn(usize) -> bool> = match metric {
        FairnessMetricId::Sp => Box::new(|_| true),
        FairnessMetricId::Pe => {
            let l = labels.to_vec();
            Box::new(move |i| l[i] == 0)
        }
        FairnessMetricId::EOpp => {
            let l = labels.to_vec();
            Box::new(move |i| l[i] == 1)
        }
        FairnessMetricId::EOdds => return Err(RashomonError::UnsupportedMetric),
    };
    let n = labels.len();
    let n0 = (0..n).filter(|&i| event(i) && groups[i] == 0).count();
    let n1 = (0..n).filter(|&i| event(i) && groups[i] == 1).count();
    if n0 == 0 || n1 == 0 {
        // Degenerate cell: the disparity is identically zero.
        return Ok(vec![0.0; n]);
    }
    Ok((0..n)
        .map(|i| {
            if !event(i) {
                0.0
            } else if groups[i] == 0 {
                1.0 / n0 as f64
            } else {
                -1.0 / n1 as f64
            }
        })
        .collect())
}

/// Finds the most extreme signed disparity among family members whose loss
/// stays within the bound.
///
/// Runs the reduction with the disparity as the objective (negated for
/// `Max`) and the loss bound as the priced constraint, then scans the
/// reference model, both constant predictors and all iterates for the
/// extreme among those within `slack` of the bound.
pub fn disparity_extreme(
    spec: &RashomonSpec,
    direction: Direction,
    params: &RashomonParams,
) -> Result<DisparityExtreme, RashomonError> {
    let instance = spec.instance;
    let v = spec.bound.resolve(spec.reference.loss01);
    if v < spec.reference.loss01 - 1e-9 {
        return Err(RashomonError::InfeasibleBound {
            v,
            reference: spec.reference.loss01,
        });
    }
    let coeffs = disparity_coeffs(spec.metric, &instance.labels, &instance.groups)?;
    let n = instance.len();
    let dir_sign = match direction {
        Direction::Min => 1.0,
        Direction::Max => -1.0,
    };

    // Candidate pool: the reference fit and the two constant predictors are
    // feasibility certificates; the reduction's iterates do the exploring.
    let mut candidates: Vec<Explainer> = vec![spec.reference.model.clone()];
    let ones = vec![1.0; n];
    for constant in [0u8, 1u8] {
        let targets = vec![constant; n];
        let set = WeightedSet::new(&instance.features, &targets, &ones)?;
        candidates.push(spec.learner.fit(&set)?);
    }

    // Start the loss price near 1 (θ = −ln B) and adapt on the last
    // iterate's loss: the λ path then sweeps from the disparity-dominant
    // regime up to the feasible one, and every iterate along the way lands
    // in the candidate pool.
    let mut theta: f64 = -params.bound.max(2.0).ln();
    let mut last_loss = spec.reference.loss01;
    let eta = params.learning_rate;
    for t in 1..=params.iterations {
        if t > 1 {
            theta = (theta + eta * (last_loss - v)).clamp(-50.0, 50.0);
        }
        let lambda = params.bound * theta.exp() / (1.0 + theta.exp());
        let mut targets = vec![0u8; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Cost of predicting 1 minus cost of predicting 0.
            let loss_term = if instance.bb_labels[i] == 0 { 1.0 } else { -1.0 } / n as f64;
            let delta = dir_sign * coeffs[i] + lambda * loss_term;
            targets[i] = (delta < 0.0) as u8;
            weights[i] = delta.abs() * n as f64;
        }
        let set = WeightedSet::new(&instance.features, &targets, &weights)?;
        let model = spec.learner.fit(&set)?;
        let preds = explainer_predict(&model, &instance.features)?;
        last_loss = zero_one_loss(&preds, &instance.bb_labels);
        candidates.push(model);
    }

    let mut best: Option<DisparityExtreme> = None;
    for model in candidates {
        let preds = explainer_predict(&model, &instance.features)?;
        let loss = zero_one_loss(&preds, &instance.bb_labels);
        if loss > v + params.slack {
            continue;
        }
        let disparity =
            metrics::signed_disparity(&preds, &instance.labels, &instance.groups, spec.metric)?
                .value;
        let better = match &best {
            None => true,
            Some(b) => {
                let improves = match direction {
                    Direction::Min => disparity < b.disparity - 1e-15,
                    Direction::Max => disparity > b.disparity + 1e-15,
                };
                let tie = (disparity - b.disparity).abs() <= 1e-15;
                improves || (tie && loss < b.loss - 1e-15)
            }
        };
        if better {
            best = Some(DisparityExtreme {
                model,
                disparity,
                loss,
            });
        }
    }
    // The reference model is always within the bound, so the pool cannot be
    // empty.
    Ok(best.expect("reference model is feasible"))
}

/// Loss-bound grid for the range computation: either explicit bounds or
/// fidelity levels (v = 1 − fidelity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RangeGrid {
    LossBounds(Vec<f64>),
    FidelityLevels(Vec<f64>),
}

impl RangeGrid {
    /// Fidelity levels 0.70, 0.74, …, 0.98.
    pub fn default_fidelity() -> Self {
        RangeGrid::FidelityLevels((0..8).map(|k| 0.70 + 0.04 * k as f64).collect())
    }

    fn bounds(&self) -> Vec<f64> {
        match self {
            RangeGrid::LossBounds(v) => v.clone(),
            RangeGrid::FidelityLevels(f) => f.iter().map(|x| 1.0 - x).collect(),
        }
    }
}

/// One row of the range curve. `fidelity` is 1 minus the worse achieved loss
/// of the two extreme models; infeasible rows carry no interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    pub fidelity: f64,
    pub v: f64,
    pub min_disparity: Option<f64>,
    pub max_disparity: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RangeCurve {
    /// Rows sorted by ascending loss bound.
    pub rows: Vec<RangeRow>,
    pub blackbox_unfairness: f64,
    pub reference_loss: f64,
}

impl RangeCurve {
    pub fn width_at_fidelity(&self, fidelity: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.feasible && r.fidelity >= fidelity)
            .map(|r| r.max_disparity.unwrap() - r.min_disparity.unwrap())
            .next_back()
    }
}

/// Computes the [min, max] signed-disparity interval per loss bound.
///
/// Rows whose bound lies below the reference loss are flagged infeasible.
/// A running min/max over increasing bounds enforces the nesting that a
/// finite-iteration solver can violate, so the reported intervals are a
/// valid inner approximation that widens monotonically.
pub fn unfairness_range(
    learner: &dyn BaseLearner,
    instance: &SuingInstance,
    metric: FairnessMetricId,
    grid: &RangeGrid,
    params: &RashomonParams,
) -> Result<RangeCurve, RashomonError> {
    let mut bounds = grid.bounds();
    if bounds.is_empty() {
        return Err(RashomonError::EmptyGrid);
    }
    bounds.sort_by(|a, b| a.partial_cmp(b).expect("finite bounds"));
    let reference = reference_fit(learner, instance)?;

    let rows: Vec<Result<RangeRow, RashomonError>> = map_indexed(&bounds, |_, &v| {
        if v < reference.loss01 - 1e-9 {
            return Ok(RangeRow {
                fidelity: 1.0 - v,
                v,
                min_disparity: None,
                max_disparity: None,
                feasible: false,
            });
        }
        let spec = RashomonSpec {
            learner,
            instance,
            metric,
            reference: &reference,
            bound: LossBound::Absolute(v),
        };
        let lo = disparity_extreme(&spec, Direction::Min, params)?;
        let hi = disparity_extreme(&spec, Direction::Max, params)?;
        Ok(RangeRow {
            fidelity: 1.0 - lo.loss.max(hi.loss),
            v,
            min_disparity: Some(lo.disparity.min(hi.disparity)),
            max_disparity: Some(hi.disparity.max(lo.disparity)),
            feasible: true,
        })
    });
    let mut rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    // Nesting: a wider budget can only widen the interval.
    let mut run_min = f64::INFINITY;
    let mut run_max = f64::NEG_INFINITY;
    for row in rows.iter_mut().filter(|r| r.feasible) {
        run_min = run_min.min(row.min_disparity.unwrap());
        run_max = run_max.max(row.max_disparity.unwrap());
        row.min_disparity = Some(run_min);
        row.max_disparity = Some(run_max);
    }

    Ok(RangeCurve {
        rows,
        blackbox_unfairness: instance.blackbox_unfairness(metric)?,
        reference_loss: reference.loss01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::make_suing_instance;
    use crate::blackbox::{train, BlackBoxFamily, HyperparamSpace};
    use crate::dataspace::{split, synth_generate, SplitSpec};
    use crate::explainers::{LogisticConfig, LogisticLearner, TreeLearner};

    fn instance(bias: f64, seed: u64) -> SuingInstance {
        let data = synth_generate(800, 6, bias, seed);
        let (train_d, suing, _) = split(&data, &SplitSpec::default(), 0).unwrap();
        let hp = HyperparamSpace::default().sample(BlackBoxFamily::Gbt, 3, 0);
        let bb = train(BlackBoxFamily::Gbt, &train_d, &hp, 3).unwrap();
        make_suing_instance(&bb, &suing).unwrap()
    }

    #[test]
    fn reference_fit_is_deterministic_and_separable_loss_near_zero() {
        let data = synth_generate(200, 3, 0.0, 7);
        // Black-box labels equal to a linearly separable function.
        let mut inst = SuingInstance {
            features: data.features.clone(),
            bb_labels: (0..data.len())
                .map(|i| (data.features.get(i, 1) > 0.5) as u8)
                .collect(),
            labels: data.labels.clone(),
            groups: data.groups.clone(),
            blackbox_id: "fixture".into(),
            split_id: "unsplit".into(),
        };
        // Keep both groups present.
        inst.groups[0] = 0;
        inst.groups[1] = 1;
        let learner = LogisticLearner(LogisticConfig::default());
        let a = reference_fit(&learner, &inst).unwrap();
        let b = reference_fit(&learner, &inst).unwrap();
        assert_eq!(a.loss01, b.loss01);
        assert!(a.loss01 <= 0.01, "separable reference loss {}", a.loss01);
        assert!(a.cross_entropy.is_some());
    }

    #[test]
    fn constant_targets_give_zero_loss_majority_model() {
        let data = synth_generate(100, 3, 0.0, 9);
        let inst = SuingInstance {
            features: data.features.clone(),
            bb_labels: vec![1; data.len()],
            labels: data.labels.clone(),
            groups: data.groups.clone(),
            blackbox_id: "fixture".into(),
            split_id: "unsplit".into(),
        };
        let learner = TreeLearner { max_depth: 3 };
        let r = reference_fit(&learner, &inst).unwrap();
        assert_eq!(r.loss01, 0.0);
    }

    #[test]
    fn min_below_max_and_zero_inside_for_huge_bound() {
        let inst = instance(0.4, 31);
        let learner = TreeLearner { max_depth: 3 };
        let reference = reference_fit(&learner, &inst).unwrap();
        let spec = RashomonSpec {
            learner: &learner,
            instance: &inst,
            metric: FairnessMetricId::Sp,
            reference: &reference,
            bound: LossBound::Absolute(0.9),
        };
        let params = RashomonParams::default();
        let lo = disparity_extreme(&spec, Direction::Min, &params).unwrap();
        let hi = disparity_extreme(&spec, Direction::Max, &params).unwrap();
        assert!(lo.disparity <= hi.disparity);
        // Constant predictors have disparity 0 and loss at most 1, so the
        // interval must straddle 0.
        assert!(lo.disparity <= 0.0);
        assert!(hi.disparity >= 0.0);
        assert!(lo.loss <= 0.9 + params.slack);
        assert!(hi.loss <= 0.9 + params.slack);
    }

    #[test]
    fn infeasible_bound_rejected() {
        let inst = instance(0.3, 33);
        let learner = TreeLearner { max_depth: 3 };
        let reference = reference_fit(&learner, &inst).unwrap();
        let spec = RashomonSpec {
            learner: &learner,
            instance: &inst,
            metric: FairnessMetricId::Sp,
            reference: &reference,
            bound: LossBound::Absolute(reference.loss01 / 2.0 - 0.05),
        };
        if spec.bound.resolve(reference.loss01) < reference.loss01 - 1e-9 {
            assert!(matches!(
                disparity_extreme(&spec, Direction::Min, &RashomonParams::default()),
                Err(RashomonError::InfeasibleBound { .. })
            ));
        }
    }

    #[test]
    fn slack_bound_resolves_multiplicatively() {
        assert_eq!(LossBound::Slack(0.5).resolve(0.2), 0.2 * 1.5);
        assert_eq!(LossBound::Absolute(0.3).resolve(0.2), 0.3);
    }

    #[test]
    fn stump_extremes_match_enumeration() {
        // Small instance, family = depth-1 trees; enumerate every stump with
        // loss <= v and compare extremes.
        let data = synth_generate(120, 4, 0.3, 35);
        let bb_labels: Vec<u8> = (0..data.len())
            .map(|i| {
                let f = &data.features;
                // A mildly unfair rule over two features.
                ((f.get(i, 0) + f.get(i, 3)) >= 1.0) as u8
            })
            .collect();
        let inst = SuingInstance {
            features: data.features.clone(),
            bb_labels,
            labels: data.labels.clone(),
            groups: data.groups.clone(),
            blackbox_id: "fixture".into(),
            split_id: "unsplit".into(),
        };
        let learner = TreeLearner { max_depth: 1 };
        let reference = reference_fit(&learner, &inst).unwrap();
        let v = reference.loss01 + 0.15;
        let spec = RashomonSpec {
            learner: &learner,
            instance: &inst,
            metric: FairnessMetricId::Sp,
            reference: &reference,
            bound: LossBound::Absolute(v),
        };
        let params = RashomonParams::default();
        let lo = disparity_extreme(&spec, Direction::Min, &params).unwrap();
        let hi = disparity_extreme(&spec, Direction::Max, &params).unwrap();

        // Oracle: all stumps = (feature, orientation) plus both constants
        // over binary features.
        let mut best_min = f64::INFINITY;
        let mut best_max = f64::NEG_INFINITY;
        let n = inst.len();
        let mut consider = |preds: &[u8]| {
            let loss = preds
                .iter()
                .zip(&inst.bb_labels)
                .filter(|(p, b)| p != b)
                .count() as f64
                / n as f64;
            if loss > v {
                return;
            }
            let d = metrics::signed_disparity(preds, &inst.labels, &inst.groups, FairnessMetricId::Sp)
                .unwrap()
                .value;
            best_min = best_min.min(d);
            best_max = best_max.max(d);
        };
        consider(&vec![0u8; n]);
        consider(&vec![1u8; n]);
        for f in 0..inst.features.n_cols() {
            let hi_preds: Vec<u8> = (0..n)
                .map(|i| (inst.features.get(i, f) > 0.5) as u8)
                .collect();
            let lo_preds: Vec<u8> = hi_preds.iter().map(|&p| 1 - p).collect();
            consider(&hi_preds);
            consider(&lo_preds);
        }
        assert!(
            lo.disparity <= best_min + 0.02,
            "min {} vs oracle {best_min}",
            lo.disparity
        );
        assert!(
            hi.disparity >= best_max - 0.02,
            "max {} vs oracle {best_max}",
            hi.disparity
        );
    }

    #[test]
    fn range_invariants_and_bias_ordering() {
        let params = RashomonParams::default();
        let grid = RangeGrid::FidelityLevels(vec![0.80, 0.90, 0.95]);
        let learner = LogisticLearner(LogisticConfig::default());

        // Range of the v=0.05 row; an infeasible fidelity level has an empty
        // range, reported as width 0.
        let width_at_095 = |bias: f64| {
            let inst = instance_with(bias, 71, 1600, BlackBoxFamily::Gbt);
            let curve =
                unfairness_range(&learner, &inst, FairnessMetricId::Sp, &grid, &params).unwrap();
            for row in &curve.rows {
                if row.feasible {
                    assert!(row.min_disparity.unwrap() <= row.max_disparity.unwrap());
                }
            }
            // Nesting across increasing v.
            let feasible: Vec<&RangeRow> = curve.rows.iter().filter(|r| r.feasible).collect();
            for w in feasible.windows(2) {
                assert!(w[0].min_disparity.unwrap() >= w[1].min_disparity.unwrap() - 1e-12);
                assert!(w[0].max_disparity.unwrap() <= w[1].max_disparity.unwrap() + 1e-12);
            }
            let row = curve
                .rows
                .iter()
                .find(|r| (r.v - 0.05).abs() < 1e-9)
                .expect("grid contains fidelity level 0.95");
            if row.feasible {
                row.max_disparity.unwrap() - row.min_disparity.unwrap()
            } else {
                0.0
            }
        };
        let wide = width_at_095(0.4);
        let narrow = width_at_095(0.05);
        assert!(
            wide > narrow,
            "biased width {wide} not wider than balanced {narrow}"
        );
    }

    fn instance_with(bias: f64, seed: u64, n: usize, family: BlackBoxFamily) -> SuingInstance {
        let data = synth_generate(n, 6, bias, seed);
        let (train_d, suing, _) = split(&data, &SplitSpec::default(), 0).unwrap();
        let hp = HyperparamSpace::default().sample(family, 3, 0);
        let bb = train(family, &train_d, &hp, 3).unwrap();
        make_suing_instance(&bb, &suing).unwrap()
    }

    #[test]
    fn reference_disparity_inside_interval() {
        let inst = instance(0.3, 43);
        let learner = TreeLearner { max_depth: 3 };
        let reference = reference_fit(&learner, &inst).unwrap();
        let preds = explainer_predict(&reference.model, &inst.features).unwrap();
        let ref_disp =
            metrics::signed_disparity(&preds, &inst.labels, &inst.groups, FairnessMetricId::Sp)
                .unwrap()
                .value;
        let spec = RashomonSpec {
            learner: &learner,
            instance: &inst,
            metric: FairnessMetricId::Sp,
            reference: &reference,
            bound: LossBound::Absolute(reference.loss01 + 0.05),
        };
        let params = RashomonParams::default();
        let lo = disparity_extreme(&spec, Direction::Min, &params).unwrap();
        let hi = disparity_extreme(&spec, Direction::Max, &params).unwrap();
        assert!(lo.disparity <= ref_disp && ref_disp <= hi.disparity);
    }
}
