//! The global fairwashing attack and its ε-sweep.
//!
//! A [`SuingInstance`] freezes the black-box's predictions on the suing
//! group together with the true labels and groups. [`fairwash`] trains one
//! surrogate under an unfairness bound ε and measures its fidelity (against
//! the black-box), unfairness (of its own predictions, conditioned on the
//! true labels) and accuracy. [`pareto_sweep`] maps this over an ε grid and
//! extracts the non-dominated fidelity–unfairness front.

use crate::blackbox::{BlackBoxError, BlackBoxModel};
use crate::dataspace::Dataset;
use crate::exec::{map_indexed, mix_seed};
use crate::explainers::{
    explainer_predict, fit_rulelist, mine_rules, BaseLearner, Explainer, ExplainerError,
    LogisticConfig, LogisticLearner, RuleConstraint, RuleListConfig, RuleSet, TreeLearner,
};
use crate::fairtrain::{
    exponentiated_gradient, pick_deterministic, EgParams, FairtrainError, MomentConstraint,
};
use crate::matrix::Matrix;
use crate::metrics::{self, FairnessMetricId, MetricsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    BlackBox(#[from] BlackBoxError),
    #[error(transparent)]
    Explainer(#[from] ExplainerError),
    #[error(transparent)]
    Fairtrain(#[from] FairtrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("epsilon grid must be strictly increasing within [0, 1]")]
    InvalidGrid,
    #[error("every epsilon in the sweep failed; last error: {0}")]
    AllEpsilonsFailed(String),
}

/// The suing group together with the black-box's predictions on it.
#[derive(Debug, Clone)]
pub struct SuingInstance {
    pub features: Matrix,
    /// b(X_sg): the surrogate's training targets.
    pub bb_labels: Vec<u8>,
    /// True labels, used for conditioning PE/EOpp/EOdds and for accuracy.
    pub labels: Vec<u8>,
    pub groups: Vec<u8>,
    pub blackbox_id: String,
    pub split_id: String,
}

/// Captures the black-box's predictions on the suing set at construction
/// time, so the attack never touches the model (or any other partition)
/// afterwards.
pub fn make_suing_instance(
    model: &BlackBoxModel,
    suing: &Dataset,
) -> Result<SuingInstance, AttackError> {
    let bb_labels = model.predict(suing)?;
    let split_id = match &suing.provenance {
        Some(p) => format!(
            "{}-s{}r{}-{:016x}",
            p.partition.as_str(),
            p.seed,
            p.resample_index,
            p.origin
        ),
        None => "unsplit".to_string(),
    };
    Ok(SuingInstance {
        features: suing.features.clone(),
        bb_labels,
        labels: suing.labels.clone(),
        groups: suing.groups.clone(),
        blackbox_id: model.id(),
        split_id,
    })
}

impl SuingInstance {
    pub fn len(&self) -> usize {
        self.bb_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bb_labels.is_empty()
    }

    /// Unfairness of the black-box's own predictions; the reference value a
    /// fairwashed explainer is compared against.
    pub fn blackbox_unfairness(&self, metric: FairnessMetricId) -> Result<f64, MetricsError> {
        Ok(metrics::unfairness(&self.bb_labels, &self.labels, &self.groups, metric)?.value)
    }
}

/// Ordered ε values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid(Vec<f64>);

impl EpsilonGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, AttackError> {
        if values.is_empty()
            || values.iter().any(|v| !(0.0..=1.0).contains(v))
            || values.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(AttackError::InvalidGrid);
        }
        Ok(EpsilonGrid(values))
    }

    /// `n` uniform values spanning [0, 1] inclusive.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 2, "a uniform grid needs at least 2 values");
        EpsilonGrid(
            (0..n)
                .map(|i| i as f64 / (n - 1) as f64)
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        EpsilonGrid::uniform(300)
    }
}

/// Surrogate family plus its training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SurrogateFamily {
    Logistic(LogisticConfig),
    Tree {
        max_depth: usize,
    },
    RuleList {
        max_len: usize,
        min_support: f64,
        #[serde(flatten)]
        config: RuleListConfig,
    },
}

impl SurrogateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SurrogateFamily::Logistic(_) => "logistic",
            SurrogateFamily::Tree { .. } => "tree",
            SurrogateFamily::RuleList { .. } => "rulelist",
        }
    }

    pub fn default_logistic() -> Self {
        SurrogateFamily::Logistic(LogisticConfig::default())
    }

    pub fn default_tree() -> Self {
        SurrogateFamily::Tree { max_depth: 4 }
    }

    pub fn default_rulelist() -> Self {
        SurrogateFamily::RuleList {
            max_len: 2,
            min_support: 0.05,
            config: RuleListConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    pub eg: EgParams,
    /// Feasibility slack used when picking a deterministic iterate.
    pub pick_slack: f64,
    pub seed: u64,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            eg: EgParams::default(),
            pick_slack: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointFlags {
    /// No single iterate was feasible; the stored explainer is a mixture.
    pub randomized: bool,
    /// The reduction's duality-gap estimate stayed above tolerance.
    pub did_not_converge: bool,
    /// A conditioning cell of the reported unfairness was empty.
    pub metric_undefined: bool,
}

impl PointFlags {
    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.randomized {
            parts.push("randomized");
        }
        if self.did_not_converge {
            parts.push("did_not_converge");
        }
        if self.metric_undefined {
            parts.push("metric_undefined");
        }
        parts.join(";")
    }
}

/// One evaluated trade-off: (ε, fidelity, unfairness, accuracy) of a trained
/// explainer on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub epsilon: f64,
    /// Agreement with the black-box predictions.
    pub fidelity: f64,
    /// Gap of the explainer's own predictions under the chosen metric.
    pub unfairness: f64,
    /// Agreement with the true labels.
    pub accuracy: f64,
    pub flags: PointFlags,
    pub eval_set: String,
}

/// Training provenance of a fairwashed explainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerProvenance {
    pub metric: FairnessMetricId,
    pub epsilon: f64,
    pub seed: u64,
    pub family: String,
    pub blackbox_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairwashedExplainer {
    pub model: Explainer,
    pub provenance: ExplainerProvenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct FairwashedFile {
    version: u32,
    #[serde(flatten)]
    explainer: FairwashedExplainer,
}

impl FairwashedExplainer {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FairwashedFile {
            version: 1,
            explainer: self.clone(),
        })
        .expect("explainer serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: FairwashedFile = serde_json::from_str(text)?;
        Ok(file.explainer)
    }
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub point: TradeoffPoint,
    pub explainer: FairwashedExplainer,
}

/// Trains one fairwashed surrogate at unfairness bound ε and evaluates it on
/// the suing group.
///
/// Logistic and tree surrogates go through the exponentiated-gradient
/// reduction followed by the deterministic pick; rule lists use the native
/// constraint of the branch-and-bound fitter. Rule-list infeasibility
/// surfaces as an error.
pub fn fairwash(
    instance: &SuingInstance,
    family: &SurrogateFamily,
    metric: FairnessMetricId,
    epsilon: f64,
    params: &AttackParams,
) -> Result<AttackOutcome, AttackError> {
    fairwash_impl(instance, family, metric, epsilon, params, None)
}

fn fairwash_impl(
    instance: &SuingInstance,
    family: &SurrogateFamily,
    metric: FairnessMetricId,
    epsilon: f64,
    params: &AttackParams,
    premined: Option<&RuleSet>,
) -> Result<AttackOutcome, AttackError> {
    let (model, flags) = match family {
        SurrogateFamily::Logistic(config) => {
            let learner = LogisticLearner(*config);
            constrained_fit(instance, &learner, metric, epsilon, params)?
        }
        SurrogateFamily::Tree { max_depth } => {
            let learner = TreeLearner {
                max_depth: *max_depth,
            };
            constrained_fit(instance, &learner, metric, epsilon, params)?
        }
        SurrogateFamily::RuleList {
            max_len,
            min_support,
            config,
        } => {
            let mined;
            let rules = match premined {
                Some(r) => r,
                None => {
                    mined = mine_rules(&instance.features, *max_len, *min_support)?;
                    &mined
                }
            };
            let weights = vec![1.0; instance.len()];
            let set = crate::explainers::WeightedSet::new(
                &instance.features,
                &instance.bb_labels,
                &weights,
            )?;
            let constraint = RuleConstraint {
                metric,
                epsilon,
                labels: &instance.labels,
                groups: &instance.groups,
            };
            let list = fit_rulelist(&set, rules, config, Some(&constraint))?;
            (Explainer::RuleList(list), PointFlags::default())
        }
    };

    let preds = explainer_predict(&model, &instance.features)?;
    let fidelity = metrics::fidelity(&preds, &instance.bb_labels)?;
    let unf = metrics::unfairness(&preds, &instance.labels, &instance.groups, metric)?;
    let accuracy = metrics::accuracy(&preds, &instance.labels)?;
    let flags = PointFlags {
        metric_undefined: unf.undefined,
        ..flags
    };
    Ok(AttackOutcome {
        point: TradeoffPoint {
            epsilon,
            fidelity,
            unfairness: unf.value,
            accuracy,
            flags,
            eval_set: instance.split_id.clone(),
        },
        explainer: FairwashedExplainer {
            model,
            provenance: ExplainerProvenance {
                metric,
                epsilon,
                seed: params.seed,
                family: family.name().to_string(),
                blackbox_id: instance.blackbox_id.clone(),
            },
        },
    })
}

fn constrained_fit(
    instance: &SuingInstance,
    learner: &dyn BaseLearner,
    metric: FairnessMetricId,
    epsilon: f64,
    params: &AttackParams,
) -> Result<(Explainer, PointFlags), AttackError> {
    let constraint = MomentConstraint::new(metric, epsilon, &instance.labels, &instance.groups)?;
    let result = exponentiated_gradient(
        learner,
        &instance.features,
        &instance.bb_labels,
        &constraint,
        &params.eg,
    )?;
    let pick = pick_deterministic(&result, params.pick_slack);
    Ok((
        pick.explainer,
        PointFlags {
            randomized: pick.randomized_fallback,
            did_not_converge: !result.converged,
            metric_undefined: false,
        },
    ))
}

/// Keeps the points not dominated by any other: `q` dominates `p` when
/// `q.unfairness ≤ p.unfairness`, `q.fidelity ≥ p.fidelity` and at least one
/// is strict. Exact ties on both coordinates keep the earliest point.
/// Returns indices into `points` in ascending-unfairness order.
pub fn nondominated(points: &[TradeoffPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .unfairness
            .partial_cmp(&points[b].unfairness)
            .expect("finite unfairness")
            .then(
                points[b]
                    .fidelity
                    .partial_cmp(&points[a].fidelity)
                    .expect("finite fidelity"),
            )
            .then(a.cmp(&b))
    });
    let mut kept = Vec::new();
    let mut best_fidelity = f64::NEG_INFINITY;
    for &i in &order {
        if points[i].fidelity > best_fidelity {
            kept.push(i);
            best_fidelity = points[i].fidelity;
        }
    }
    kept
}

/// Non-dominated trade-off points sorted by unfairness ascending, plus the
/// black-box's own unfairness as the reference value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<TradeoffPoint>,
    pub blackbox_unfairness: f64,
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub outcome: Result<AttackOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Indices into `entries` forming the front, ascending unfairness.
    pub front_entries: Vec<usize>,
    pub front: ParetoFront,
    pub metric: FairnessMetricId,
    pub family: String,
}

/// Trains one explainer per ε over the grid (in parallel when enabled) and
/// extracts the non-dominated front. Individual ε failures are recorded as
/// gaps; the sweep fails only if every ε fails.
pub fn pareto_sweep(
    instance: &SuingInstance,
    family: &SurrogateFamily,
    metric: FairnessMetricId,
    grid: &EpsilonGrid,
    params: &AttackParams,
) -> Result<SweepResult, AttackError> {
    // Rule mining depends only on the features; do it once for the sweep.
    let premined = match family {
        SurrogateFamily::RuleList {
            max_len,
            min_support,
            ..
        } => Some(mine_rules(&instance.features, *max_len, *min_support)?),
        _ => None,
    };

    let entries: Vec<SweepEntry> = map_indexed(grid.values(), |idx, &epsilon| {
        let task_params = AttackParams {
            seed: mix_seed(params.seed, idx as u64),
            ..*params
        };
        let outcome = fairwash_impl(
            instance,
            family,
            metric,
            epsilon,
            &task_params,
            premined.as_ref(),
        )
        .map_err(|e| e.to_string());
        SweepEntry { epsilon, outcome }
    });

    if entries.iter().all(|e| e.outcome.is_err()) {
        let last = entries
            .last()
            .and_then(|e| e.outcome.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(AttackError::AllEpsilonsFailed(last));
    }

    let ok_indices: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.outcome.is_ok())
        .map(|(i, _)| i)
        .collect();
    let points: Vec<TradeoffPoint> = ok_indices
        .iter()
        .map(|&i| entries[i].outcome.as_ref().unwrap().point.clone())
        .collect();
    let front_local = nondominated(&points);
    let front_entries: Vec<usize> = front_local.iter().map(|&j| ok_indices[j]).collect();
    let front = ParetoFront {
        points: front_local.iter().map(|&j| points[j].clone()).collect(),
        blackbox_unfairness: instance.blackbox_unfairness(metric)?,
    };
    Ok(SweepResult {
        entries,
        front_entries,
        front,
        metric,
        family: family.name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{train, BlackBoxFamily, HyperparamSpace};
    use crate::dataspace::{split, synth_generate, SplitSpec};

    fn point(unfairness: f64, fidelity: f64) -> TradeoffPoint {
        TradeoffPoint {
            epsilon: 0.0,
            fidelity,
            unfairness,
            accuracy: 0.0,
            flags: PointFlags::default(),
            eval_set: String::new(),
        }
    }

    #[test]
    fn nondominated_empty_and_ties() {
        assert!(nondominated(&[]).is_empty());
        let pts = vec![point(0.1, 0.9), point(0.1, 0.9)];
        assert_eq!(nondominated(&pts), vec![0]);
    }

    #[test]
    fn nondominated_drops_dominated_points() {
        let pts = vec![point(0.05, 0.92), point(0.1, 0.90), point(0.2, 0.85)];
        assert_eq!(nondominated(&pts), vec![0]);
    }

    #[test]
    fn nondominated_matches_quadratic_oracle() {
        // 50 pseudo-random points against the O(n²) dominance filter.
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut rand01 = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<TradeoffPoint> = (0..50).map(|_| point(rand01(), rand01())).collect();

        let oracle: Vec<usize> = (0..pts.len())
            .filter(|&i| {
                !(0..pts.len()).any(|j| {
                    if i == j {
                        return false;
                    }
                    let dominates = pts[j].unfairness <= pts[i].unfairness
                        && pts[j].fidelity >= pts[i].fidelity
                        && (pts[j].unfairness < pts[i].unfairness
                            || pts[j].fidelity > pts[i].fidelity);
                    // Exact duplicates keep the earliest.
                    let duplicate = pts[j].unfairness == pts[i].unfairness
                        && pts[j].fidelity == pts[i].fidelity
                        && j < i;
                    dominates || duplicate
                })
            })
            .collect();
        let mut got = nondominated(&pts);
        got.sort_unstable();
        let mut expected = oracle;
        expected.sort_unstable();
        assert_eq!(got, expected);
    }

    #[test]
    fn front_sorted_with_nondecreasing_fidelity() {
        let pts = vec![
            point(0.3, 0.95),
            point(0.1, 0.80),
            point(0.2, 0.90),
            point(0.15, 0.85),
            point(0.05, 0.70),
        ];
        let kept = nondominated(&pts);
        let front: Vec<&TradeoffPoint> = kept.iter().map(|&i| &pts[i]).collect();
        for w in front.windows(2) {
            assert!(w[0].unfairness <= w[1].unfairness);
            assert!(w[0].fidelity <= w[1].fidelity);
        }
    }

    fn toy_instance() -> SuingInstance {
        let data = synth_generate(600, 6, 0.35, 17);
        let (train_d, suing, _test) = split(&data, &SplitSpec::default(), 0).unwrap();
        let hp = HyperparamSpace::default().sample(BlackBoxFamily::Gbt, 3, 0);
        let bb = train(BlackBoxFamily::Gbt, &train_d, &hp, 3).unwrap();
        make_suing_instance(&bb, &suing).unwrap()
    }

    #[test]
    fn instance_records_model_id_and_predictions() {
        let data = synth_generate(200, 4, 0.3, 5);
        let hp = HyperparamSpace::default().sample(BlackBoxFamily::Adaboost, 2, 0);
        let bb = train(BlackBoxFamily::Adaboost, &data, &hp, 2).unwrap();
        let instance = make_suing_instance(&bb, &data).unwrap();
        assert_eq!(instance.blackbox_id, bb.id());
        // Stored predictions equal a fresh recomputation.
        assert_eq!(instance.bb_labels, bb.predict(&data).unwrap());
    }

    #[test]
    fn constant_blackbox_instance_is_all_ones() {
        let data = synth_generate(100, 4, 0.2, 5);
        // An empty forest votes 1 everywhere.
        let bb = BlackBoxModel {
            family: BlackBoxFamily::Rf,
            params: crate::blackbox::FamilyParams::Rf(crate::blackbox::ForestParams {
                trees: vec![],
            }),
            seed: 0,
            fingerprint: crate::blackbox::SchemaFingerprint::of(&data.feature_names),
        };
        let instance = make_suing_instance(&bb, &data).unwrap();
        assert!(instance.bb_labels.iter().all(|&p| p == 1));
    }

    #[test]
    fn inactive_epsilon_equals_unconstrained_fidelity() {
        let instance = toy_instance();
        let params = AttackParams::default();
        let family = SurrogateFamily::default_logistic();
        let at_one = fairwash(&instance, &family, FairnessMetricId::Sp, 1.0, &params).unwrap();

        // Unconstrained surrogate: plain weighted fit on the bb labels.
        let learner = LogisticLearner(LogisticConfig::default());
        let weights = vec![1.0; instance.len()];
        let set =
            crate::explainers::WeightedSet::new(&instance.features, &instance.bb_labels, &weights)
                .unwrap();
        let direct = learner.fit(&set).unwrap();
        let preds = explainer_predict(&direct, &instance.features).unwrap();
        let direct_fidelity = metrics::fidelity(&preds, &instance.bb_labels).unwrap();
        assert_eq!(at_one.point.fidelity, direct_fidelity);
    }

    #[test]
    fn sweep_single_value_grid() {
        let instance = toy_instance();
        let grid = EpsilonGrid::new(vec![0.5]).unwrap();
        let sweep = pareto_sweep(
            &instance,
            &SurrogateFamily::default_tree(),
            FairnessMetricId::Sp,
            &grid,
            &AttackParams::default(),
        )
        .unwrap();
        assert_eq!(sweep.entries.len(), 1);
        assert!(sweep.front.points.len() <= 1);
    }

    #[test]
    fn sweep_is_deterministic() {
        let instance = toy_instance();
        let grid = EpsilonGrid::new(vec![0.02, 0.1, 0.3, 0.8]).unwrap();
        let family = SurrogateFamily::default_tree();
        let params = AttackParams::default();
        let a = pareto_sweep(&instance, &family, FairnessMetricId::Sp, &grid, &params).unwrap();
        let b = pareto_sweep(&instance, &family, FairnessMetricId::Sp, &grid, &params).unwrap();
        let pts = |s: &SweepResult| -> Vec<TradeoffPoint> {
            s.entries
                .iter()
                .filter_map(|e| e.outcome.as_ref().ok().map(|o| o.point.clone()))
                .collect()
        };
        assert_eq!(pts(&a), pts(&b));
        assert_eq!(a.front_entries, b.front_entries);
    }

    #[test]
    fn front_points_respect_their_epsilon() {
        let instance = toy_instance();
        let grid = EpsilonGrid::new(vec![0.05, 0.2, 0.5, 1.0]).unwrap();
        let sweep = pareto_sweep(
            &instance,
            &SurrogateFamily::default_logistic(),
            FairnessMetricId::Sp,
            &grid,
            &AttackParams::default(),
        )
        .unwrap();
        for p in &sweep.front.points {
            assert!(
                p.unfairness <= p.epsilon + 0.01,
                "front point at eps {} has unfairness {}",
                p.epsilon,
                p.unfairness
            );
        }
    }

    #[test]
    fn grid_validation() {
        assert!(EpsilonGrid::new(vec![]).is_err());
        assert!(EpsilonGrid::new(vec![0.2, 0.1]).is_err());
        assert!(EpsilonGrid::new(vec![0.1, 1.2]).is_err());
        assert_eq!(EpsilonGrid::default().len(), 300);
        let g = EpsilonGrid::uniform(300);
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(*g.values().last().unwrap(), 1.0);
    }

    #[test]
    fn explainer_file_round_trip() {
        let instance = toy_instance();
        let outcome = fairwash(
            &instance,
            &SurrogateFamily::default_tree(),
            FairnessMetricId::Sp,
            0.3,
            &AttackParams::default(),
        )
        .unwrap();
        let text = outcome.explainer.to_json();
        let back = FairwashedExplainer::from_json(&text).unwrap();
        assert_eq!(back, outcome.explainer);
    }
}
