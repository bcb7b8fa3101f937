//! Generalization beyond the suing group and transferability across
//! black-box models.

use crate::attack::{
    fairwash, AttackError, AttackParams, FairwashedExplainer, PointFlags, SurrogateFamily,
    SweepResult, TradeoffPoint,
};
use crate::blackbox::{BlackBoxError, BlackBoxModel};
use crate::dataspace::{Dataset, Partition};
use crate::exec::{map_indexed, mix_seed};
use crate::explainers::{explainer_predict, ExplainerError};
use crate::metrics::{self, FairnessMetricId, MetricsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    BlackBox(#[from] BlackBoxError),
    #[error(transparent)]
    Explainer(#[from] ExplainerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("split provenance violation: {0}")]
    ProvenanceViolation(String),
    #[error("need at least {0} black-box models")]
    TooFewModels(usize),
    #[error("no successful sweep entries to evaluate")]
    EmptySweep,
}

/// Re-evaluates a trained explainer against a black-box on an arbitrary set:
/// fidelity against the black-box's predictions there, unfairness of the
/// explainer's predictions conditioned on that set's true labels.
pub fn evaluate_on(
    explainer: &FairwashedExplainer,
    blackbox: &BlackBoxModel,
    eval_set: &Dataset,
    metric: FairnessMetricId,
) -> Result<TradeoffPoint, EvalError> {
    let e_preds = explainer_predict(&explainer.model, &eval_set.features)?;
    let b_preds = blackbox.predict(eval_set)?;
    let fidelity = metrics::fidelity(&e_preds, &b_preds)?;
    let unf = metrics::unfairness(&e_preds, &eval_set.labels, &eval_set.groups, metric)?;
    let accuracy = metrics::accuracy(&e_preds, &eval_set.labels)?;
    Ok(TradeoffPoint {
        epsilon: explainer.provenance.epsilon,
        fidelity,
        unfairness: unf.value,
        accuracy,
        flags: PointFlags {
            metric_undefined: unf.undefined,
            ..PointFlags::default()
        },
        eval_set: eval_set
            .provenance
            .map_or_else(|| "custom".to_string(), |p| p.partition.as_str().to_string()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub epsilon: f64,
    pub fidelity_sg: f64,
    pub fidelity_test: f64,
    pub unfairness_sg: f64,
    pub unfairness_test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub mean_fidelity_gap: f64,
    pub max_fidelity_gap: f64,
    pub mean_unfairness_gap: f64,
    pub max_unfairness_gap: f64,
}

/// Per-ε suing-group vs test-set comparison of a sweep's explainers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub summary: GapSummary,
}

fn check_disjoint_provenance(suing: &Dataset, test: &Dataset) -> Result<(), EvalError> {
    let (Some(sp), Some(tp)) = (suing.provenance, test.provenance) else {
        return Err(EvalError::ProvenanceViolation(
            "missing split provenance on suing or test set".into(),
        ));
    };
    if sp.origin != tp.origin || sp.seed != tp.seed || sp.resample_index != tp.resample_index {
        return Err(EvalError::ProvenanceViolation(
            "suing and test sets come from different splits".into(),
        ));
    }
    if sp.partition == tp.partition {
        return Err(EvalError::ProvenanceViolation(format!(
            "both sets are the `{}` partition of the same split",
            sp.partition.as_str()
        )));
    }
    if sp.partition != Partition::Suing || tp.partition != Partition::Test {
        return Err(EvalError::ProvenanceViolation(format!(
            "expected suing/test partitions, got {}/{}",
            sp.partition.as_str(),
            tp.partition.as_str()
        )));
    }
    Ok(())
}

/// Re-evaluates every successful sweep explainer on the test set and
/// summarizes the absolute fidelity and unfairness gaps.
///
/// `enforce_provenance` verifies through split provenance that the test set
/// is disjoint from the suing group; tests that deliberately reuse a set can
/// disable it.
pub fn generalization_report(
    sweep: &SweepResult,
    blackbox: &BlackBoxModel,
    suing: &Dataset,
    test: &Dataset,
    metric: FairnessMetricId,
    enforce_provenance: bool,
) -> Result<GapReport, EvalError> {
    if enforce_provenance {
        check_disjoint_provenance(suing, test)?;
    }
    let ok_entries: Vec<(&f64, &crate::attack::AttackOutcome)> = sweep
        .entries
        .iter()
        .filter_map(|e| e.outcome.as_ref().ok().map(|o| (&e.epsilon, o)))
        .collect();
    if ok_entries.is_empty() {
        return Err(EvalError::EmptySweep);
    }
    let rows: Vec<Result<GapRow, EvalError>> = map_indexed(&ok_entries, |_, (eps, outcome)| {
        let test_point = evaluate_on(&outcome.explainer, blackbox, test, metric)?;
        Ok(GapRow {
            epsilon: **eps,
            fidelity_sg: outcome.point.fidelity,
            fidelity_test: test_point.fidelity,
            unfairness_sg: outcome.point.unfairness,
            unfairness_test: test_point.unfairness,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n = rows.len() as f64;
    let fid_gaps = rows.iter().map(|r| (r.fidelity_sg - r.fidelity_test).abs());
    let unf_gaps = rows.iter().map(|r| (r.unfairness_sg - r.unfairness_test).abs());
    let summary = GapSummary {
        mean_fidelity_gap: fid_gaps.clone().sum::<f64>() / n,
        max_fidelity_gap: fid_gaps.fold(0.0, f64::max),
        mean_unfairness_gap: unf_gaps.clone().sum::<f64>() / n,
        max_unfairness_gap: unf_gaps.fold(0.0, f64::max),
    };
    Ok(GapReport { rows, summary })
}

/// One (teacher, student) evaluation: `fidelity` of the teacher's fairwashed
/// explainer against the student's predictions, `label_agreement` between
/// teacher and student, `unfairness` of the explainer. Blank cells mark a
/// teacher whose attack was infeasible at this ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCell {
    pub teacher: String,
    pub student: String,
    pub label_agreement: f64,
    pub fidelity: Option<f64>,
    pub unfairness: Option<f64>,
    pub blank: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferReport {
    pub epsilon: f64,
    pub metric: FairnessMetricId,
    pub family: String,
    pub cells: Vec<TransferCell>,
}

/// Fairwashes one explainer per teacher model and evaluates it against every
/// student model's predictions on the suing group.
pub fn transfer_experiment(
    models: &[BlackBoxModel],
    suing: &Dataset,
    family: &SurrogateFamily,
    metric: FairnessMetricId,
    epsilon: f64,
    params: &AttackParams,
) -> Result<TransferReport, EvalError> {
    if models.len() < 2 {
        return Err(EvalError::TooFewModels(2));
    }
    let preds: Vec<Vec<u8>> = models
        .iter()
        .map(|m| m.predict(suing))
        .collect::<Result<_, _>>()?;

    // One attack per teacher; cells against each student are cheap.
    let teacher_rows: Vec<Result<Vec<TransferCell>, EvalError>> =
        map_indexed(models, |t_idx, teacher| {
            let instance = crate::attack::make_suing_instance(teacher, suing)?;
            let task_params = AttackParams {
                seed: mix_seed(params.seed, t_idx as u64),
                ..*params
            };
            let attack_result = fairwash(&instance, family, metric, epsilon, &task_params);
            let explainer_preds = match &attack_result {
                Ok(outcome) => {
                    Some(explainer_predict(&outcome.explainer.model, &suing.features)?)
                }
                Err(AttackError::Explainer(ExplainerError::Infeasible)) => None,
                Err(e) => return Err(EvalError::Attack(clone_attack_error(e))),
            };
            let mut cells = Vec::with_capacity(models.len());
            for (s_idx, student) in models.iter().enumerate() {
                let agreement = metrics::label_agreement(&preds[t_idx], &preds[s_idx])?;
                let cell = match &explainer_preds {
                    Some(ep) => TransferCell {
                        teacher: teacher.id(),
                        student: student.id(),
                        label_agreement: agreement,
                        fidelity: Some(metrics::fidelity(ep, &preds[s_idx])?),
                        unfairness: Some(
                            metrics::unfairness(ep, &suing.labels, &suing.groups, metric)?.value,
                        ),
                        blank: false,
                    },
                    None => TransferCell {
                        teacher: teacher.id(),
                        student: student.id(),
                        label_agreement: agreement,
                        fidelity: None,
                        unfairness: None,
                        blank: true,
                    },
                };
                cells.push(cell);
            }
            Ok(cells)
        });

    let mut cells = Vec::new();
    for row in teacher_rows {
        cells.extend(row?);
    }
    Ok(TransferReport {
        epsilon,
        metric,
        family: family.name().to_string(),
        cells,
    })
}

// AttackError is not Clone (io errors inside); stringify for transport out
// of the parallel closure.
fn clone_attack_error(e: &AttackError) -> AttackError {
    AttackError::AllEpsilonsFailed(e.to_string())
}

/// Pairwise agreement matrix of the models' predictions on one set.
/// Symmetric with a unit diagonal.
pub fn label_agreement_matrix(
    models: &[BlackBoxModel],
    eval_set: &Dataset,
) -> Result<Vec<Vec<f64>>, EvalError> {
    if models.is_empty() {
        return Err(EvalError::TooFewModels(1));
    }
    let preds: Vec<Vec<u8>> = models
        .iter()
        .map(|m| m.predict(eval_set))
        .collect::<Result<_, _>>()?;
    let k = models.len();
    let mut matrix = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let a = metrics::label_agreement(&preds[i], &preds[j])?;
            matrix[i][j] = a;
            matrix[j][i] = a;
        }
    }
    Ok(matrix)
}
