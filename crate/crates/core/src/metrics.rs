//! Group fairness metrics, fidelity and accuracy.
//!
//! All metrics are computed from exact integer event counts; the single
//! division happens at the end, so results are bit-reproducible. A metric
//! whose conditioning cell is empty (e.g. no negative labels in one group)
//! is reported as 0 with an `undefined` flag instead of NaN, so that sweeps
//! over resampled splits never abort on a degenerate cell.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// The four statistical fairness notions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessMetricId {
    /// Statistical parity: positive-prediction rate gap.
    Sp,
    /// Predictive equality: false-positive rate gap.
    Pe,
    /// Equal opportunity: true-positive rate gap.
    EOpp,
    /// Equalized odds: both FPR and TPR gaps, scalarized as their max.
    EOdds,
}

impl FairnessMetricId {
    pub const ALL: [FairnessMetricId; 4] = [
        FairnessMetricId::Sp,
        FairnessMetricId::Pe,
        FairnessMetricId::EOpp,
        FairnessMetricId::EOdds,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FairnessMetricId::Sp => "sp",
            FairnessMetricId::Pe => "pe",
            FairnessMetricId::EOpp => "eopp",
            FairnessMetricId::EOdds => "eodds",
        }
    }
}

impl fmt::Display for FairnessMetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FairnessMetricId {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sp" => Ok(FairnessMetricId::Sp),
            "pe" => Ok(FairnessMetricId::Pe),
            "eopp" => Ok(FairnessMetricId::EOpp),
            "eodds" => Ok(FairnessMetricId::EOdds),
            other => Err(MetricsError::UnknownMetric(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("input vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("only one group value present in the input")]
    SingleGroup,
    #[error("empty input")]
    EmptyInput,
    #[error("unknown metric id `{0}` (expected sp, pe, eopp or eodds)")]
    UnknownMetric(String),
}

/// Event counts for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupTally {
    /// Rows in this group.
    pub n: u64,
    /// Rows predicted positive (ŷ = 1).
    pub pred_pos: u64,
    /// ŷ = 1 ∧ y = 1.
    pub true_pos: u64,
    /// ŷ = 1 ∧ y = 0.
    pub false_pos: u64,
    /// y = 1.
    pub cond_pos: u64,
    /// y = 0.
    pub cond_neg: u64,
}

/// Exact event counts per group (index = group value).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupCounts {
    pub group: [GroupTally; 2],
}

/// A metric value together with its definedness flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// True when a conditioning cell had zero count; `value` is then 0.
    pub undefined: bool,
}

impl MetricValue {
    fn defined(value: f64) -> Self {
        MetricValue {
            value,
            undefined: false,
        }
    }

    const UNDEFINED: MetricValue = MetricValue {
        value: 0.0,
        undefined: true,
    };
}

fn check_binary_inputs(
    preds: &[u8],
    labels: &[u8],
    groups: &[u8],
) -> Result<(), MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(preds.len(), labels.len()));
    }
    if preds.len() != groups.len() {
        return Err(MetricsError::LengthMismatch(preds.len(), groups.len()));
    }
    debug_assert!(preds.iter().all(|&v| v <= 1), "predictions must be 0/1");
    debug_assert!(labels.iter().all(|&v| v <= 1), "labels must be 0/1");
    debug_assert!(groups.iter().all(|&v| v <= 1), "groups must be 0/1");
    Ok(())
}

/// Tallies prediction/label events per group.
pub fn count_groups(
    preds: &[u8],
    labels: &[u8],
    groups: &[u8],
) -> Result<GroupCounts, MetricsError> {
    check_binary_inputs(preds, labels, groups)?;
    let mut tallies = [GroupTally::default(); 2];
    for i in 0..preds.len() {
        let t = &mut tallies[groups[i] as usize];
        t.n += 1;
        if labels[i] == 1 {
            t.cond_pos += 1;
        } else {
            t.cond_neg += 1;
        }
        if preds[i] == 1 {
            t.pred_pos += 1;
            if labels[i] == 1 {
                t.true_pos += 1;
            } else {
                t.false_pos += 1;
            }
        }
    }
    if tallies[0].n == 0 || tallies[1].n == 0 {
        return Err(MetricsError::SingleGroup);
    }
    Ok(GroupCounts { group: tallies })
}

/// Exact signed difference num0/den0 − num1/den1, divided once at the end.
fn rate_gap(num0: u64, den0: u64, num1: u64, den1: u64) -> MetricValue {
    if den0 == 0 || den1 == 0 {
        return MetricValue::UNDEFINED;
    }
    let num = (num0 as i128) * (den1 as i128) - (num1 as i128) * (den0 as i128);
    let den = (den0 as i128) * (den1 as i128);
    MetricValue::defined(num as f64 / den as f64)
}

impl GroupCounts {
    /// Signed statistical-parity gap (group 0 minus group 1).
    pub fn sp_signed(&self) -> MetricValue {
        let [g0, g1] = self.group;
        rate_gap(g0.pred_pos, g0.n, g1.pred_pos, g1.n)
    }

    /// Signed false-positive-rate gap.
    pub fn pe_signed(&self) -> MetricValue {
        let [g0, g1] = self.group;
        rate_gap(g0.false_pos, g0.cond_neg, g1.false_pos, g1.cond_neg)
    }

    /// Signed true-positive-rate gap.
    pub fn eopp_signed(&self) -> MetricValue {
        let [g0, g1] = self.group;
        rate_gap(g0.true_pos, g0.cond_pos, g1.true_pos, g1.cond_pos)
    }

    /// Signed gap for the requested metric. For equalized odds this is the
    /// value of whichever of (PE, EOpp) has the larger magnitude, PE on ties.
    pub fn signed(&self, metric: FairnessMetricId) -> MetricValue {
        match metric {
            FairnessMetricId::Sp => self.sp_signed(),
            FairnessMetricId::Pe => self.pe_signed(),
            FairnessMetricId::EOpp => self.eopp_signed(),
            FairnessMetricId::EOdds => {
                let pe = self.pe_signed();
                let eopp = self.eopp_signed();
                let picked = if pe.value.abs() >= eopp.value.abs() {
                    pe.value
                } else {
                    eopp.value
                };
                MetricValue {
                    value: picked,
                    undefined: pe.undefined || eopp.undefined,
                }
            }
        }
    }

    /// Absolute gap for the requested metric.
    pub fn unfairness(&self, metric: FairnessMetricId) -> MetricValue {
        let s = self.signed(metric);
        MetricValue {
            value: s.value.abs(),
            undefined: s.undefined,
        }
    }
}

/// Absolute gap of the requested metric. For PE/EOpp/EOdds, `labels` must be
/// the ground-truth labels the metric conditions on.
pub fn unfairness(
    preds: &[u8],
    labels: &[u8],
    groups: &[u8],
    metric: FairnessMetricId,
) -> Result<MetricValue, MetricsError> {
    Ok(count_groups(preds, labels, groups)?.unfairness(metric))
}

/// Group-0-minus-group-1 gap before taking the absolute value.
pub fn signed_disparity(
    preds: &[u8],
    labels: &[u8],
    groups: &[u8],
    metric: FairnessMetricId,
) -> Result<MetricValue, MetricsError> {
    Ok(count_groups(preds, labels, groups)?.signed(metric))
}

fn agreement(a: &[u8], b: &[u8]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Fraction of positions where the explainer agrees with the black-box.
pub fn fidelity(explainer_preds: &[u8], blackbox_preds: &[u8]) -> Result<f64, MetricsError> {
    agreement(explainer_preds, blackbox_preds)
}

/// Fraction of correct predictions.
pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64, MetricsError> {
    agreement(preds, labels)
}

/// Fraction of positions where two models agree; same computation as
/// [`fidelity`], kept as a separate name for reporting clarity.
pub fn label_agreement(preds_a: &[u8], preds_b: &[u8]) -> Result<f64, MetricsError> {
    agreement(preds_a, preds_b)
}

/// Per-metric definedness flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    pub sp: bool,
    pub pe: bool,
    pub eopp: bool,
    pub eodds: bool,
}

/// All four gaps of one prediction vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub sp: f64,
    pub pe: f64,
    pub eopp: f64,
    pub eodds: f64,
    pub flags: MetricFlags,
}

impl FairnessReport {
    pub fn compute(preds: &[u8], labels: &[u8], groups: &[u8]) -> Result<Self, MetricsError> {
        let counts = count_groups(preds, labels, groups)?;
        let sp = counts.unfairness(FairnessMetricId::Sp);
        let pe = counts.unfairness(FairnessMetricId::Pe);
        let eopp = counts.unfairness(FairnessMetricId::EOpp);
        // eodds = max(pe, eopp) by construction.
        let eodds = counts.unfairness(FairnessMetricId::EOdds);
        Ok(FairnessReport {
            sp: sp.value,
            pe: pe.value,
            eopp: eopp.value,
            eodds: eodds.value,
            flags: MetricFlags {
                sp: sp.undefined,
                pe: pe.undefined,
                eopp: eopp.undefined,
                eodds: eodds.undefined,
            },
        })
    }

    pub fn get(&self, metric: FairnessMetricId) -> f64 {
        match metric {
            FairnessMetricId::Sp => self.sp,
            FairnessMetricId::Pe => self.pe,
            FairnessMetricId::EOpp => self.eopp,
            FairnessMetricId::EOdds => self.eodds,
        }
    }
}
