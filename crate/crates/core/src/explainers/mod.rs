//! Interpretable surrogate model families with instance-weighted training.
//!
//! All three base families (logistic regression, decision tree, rule list)
//! fit a weighted sample set and predict {0, 1}. A randomized mixture of
//! base models is also a valid explainer; it predicts by weighted majority
//! vote so that its output stays deterministic.

mod logistic;
mod rules;
mod tree;

pub use logistic::{fit_logistic, logistic_loss, logistic_xent, LogisticConfig, LogisticModel};
pub use rules::{
    fit_rulelist, mine_rules, render_rulelist, Rule, RuleConstraint, RuleList, RuleListConfig,
    RuleSet,
};
pub use tree::{fit_tree, TreeModel, TreeNode};

use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExplainerError {
    #[error("total sample weight must be positive")]
    ZeroTotalWeight,
    #[error("weights must be finite and non-negative")]
    InvalidWeight,
    #[error("loss became non-finite (diverging step size?)")]
    NonFiniteLoss,
    #[error("feature count mismatch: model expects {expected}, data has {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("rule set is empty")]
    EmptyRuleSet,
    #[error("no rule list satisfies the unfairness constraint")]
    Infeasible,
    #[error("targets/weights length mismatch with features")]
    LengthMismatch,
}

/// A weighted training set: features with per-row binary targets and
/// non-negative weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSet<'a> {
    pub features: &'a Matrix,
    pub targets: &'a [u8],
    pub weights: &'a [f64],
}

impl<'a> WeightedSet<'a> {
    pub fn new(
        features: &'a Matrix,
        targets: &'a [u8],
        weights: &'a [f64],
    ) -> Result<Self, ExplainerError> {
        if targets.len() != features.n_rows() || weights.len() != features.n_rows() {
            return Err(ExplainerError::LengthMismatch);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ExplainerError::InvalidWeight);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ExplainerError::ZeroTotalWeight);
        }
        Ok(WeightedSet {
            features,
            targets,
            weights,
        })
    }

    /// Uniform weights of 1.
    pub fn unweighted(features: &'a Matrix, targets: &'a [u8], ones: &'a [f64]) -> Result<Self, ExplainerError> {
        WeightedSet::new(features, targets, ones)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Any interpretable surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Explainer {
    Logistic(LogisticModel),
    Tree(TreeModel),
    RuleList(RuleList),
    Randomized(RandomizedClassifier),
}

/// Mixture over base explainers. Prediction is the weighted majority vote of
/// the members, so it is deterministic; ties predict 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedClassifier {
    pub members: Vec<MixtureMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMember {
    pub model: Explainer,
    pub weight: f64,
}

impl Explainer {
    pub fn n_features(&self) -> usize {
        match self {
            Explainer::Logistic(m) => m.weights.len(),
            Explainer::Tree(m) => m.n_features,
            Explainer::RuleList(m) => m.n_features,
            Explainer::Randomized(m) => m
                .members
                .first()
                .map_or(0, |member| member.model.n_features()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Explainer::Logistic(_) => "logistic",
            Explainer::Tree(_) => "tree",
            Explainer::RuleList(_) => "rulelist",
            Explainer::Randomized(_) => "randomized",
        }
    }

    /// Predicts one row. Callers batching over a matrix should use
    /// [`explainer_predict`], which validates the column count once.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        match self {
            Explainer::Logistic(m) => m.predict_row(row),
            Explainer::Tree(m) => m.predict_row(row),
            Explainer::RuleList(m) => m.predict_row(row),
            Explainer::Randomized(m) => {
                let total: f64 = m.members.iter().map(|mm| mm.weight).sum();
                let vote: f64 = m
                    .members
                    .iter()
                    .map(|mm| mm.weight * mm.model.predict_row(row) as f64)
                    .sum();
                (vote >= 0.5 * total) as u8
            }
        }
    }
}

/// Batch prediction with a schema-compatibility check.
pub fn explainer_predict(model: &Explainer, features: &Matrix) -> Result<Vec<u8>, ExplainerError> {
    let expected = model.n_features();
    if features.n_cols() != expected {
        return Err(ExplainerError::SchemaMismatch {
            expected,
            got: features.n_cols(),
        });
    }
    Ok(features.iter_rows().map(|row| model.predict_row(row)).collect())
}

/// Versioned JSON wrapper for persisted explainers.
#[derive(Debug, Serialize, Deserialize)]
pub struct ExplainerFile {
    pub version: u32,
    pub model: Explainer,
}

pub const EXPLAINER_FILE_VERSION: u32 = 1;

pub fn to_json(model: &Explainer) -> String {
    serde_json::to_string_pretty(&ExplainerFile {
        version: EXPLAINER_FILE_VERSION,
        model: model.clone(),
    })
    .expect("explainer serialization cannot fail")
}

pub fn from_json(text: &str) -> Result<Explainer, serde_json::Error> {
    let file: ExplainerFile = serde_json::from_str(text)?;
    Ok(file.model)
}

/// Fits one surrogate family on a weighted sample set; the cost-sensitive
/// subroutine of the constrained-training reduction, and the entry point the
/// Rashomon search uses to move across families uniformly.
pub trait BaseLearner: Sync {
    fn fit(&self, set: &WeightedSet) -> Result<Explainer, ExplainerError>;
    fn name(&self) -> &'static str;
}

/// Weighted logistic regression learner.
pub struct LogisticLearner(pub LogisticConfig);

impl BaseLearner for LogisticLearner {
    fn fit(&self, set: &WeightedSet) -> Result<Explainer, ExplainerError> {
        fit_logistic(set, &self.0).map(Explainer::Logistic)
    }

    fn name(&self) -> &'static str {
        "logistic"
    }
}

/// Weighted CART learner.
pub struct TreeLearner {
    pub max_depth: usize,
}

impl BaseLearner for TreeLearner {
    fn fit(&self, set: &WeightedSet) -> Result<Explainer, ExplainerError> {
        Ok(Explainer::Tree(fit_tree(set, self.max_depth)))
    }

    fn name(&self) -> &'static str {
        "tree"
    }
}

/// Weighted rule-list learner over a pre-mined rule set (no fairness
/// constraint; the native constraint path goes through [`fit_rulelist`]).
pub struct RuleListLearner {
    pub rules: RuleSet,
    pub config: RuleListConfig,
}

impl BaseLearner for RuleListLearner {
    fn fit(&self, set: &WeightedSet) -> Result<Explainer, ExplainerError> {
        fit_rulelist(set, &self.rules, &self.config, None).map(Explainer::RuleList)
    }

    fn name(&self) -> &'static str {
        "rulelist"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_all_zero_weights_negative_bias() {
        let m = LogisticModel {
            weights: vec![0.0, 0.0],
            bias: -1.0,
        };
        let features = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]);
        let preds = explainer_predict(&Explainer::Logistic(m), &features).unwrap();
        assert_eq!(preds, vec![0, 0]);
    }

    #[test]
    fn schema_mismatch_detected() {
        let m = LogisticModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
        };
        let features = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]);
        assert!(matches!(
            explainer_predict(&Explainer::Logistic(m), &features),
            Err(ExplainerError::SchemaMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn randomized_majority_vote_with_tie_to_one() {
        let always = |bias: f64| {
            Explainer::Logistic(LogisticModel {
                weights: vec![0.0],
                bias,
            })
        };
        let mixture = Explainer::Randomized(RandomizedClassifier {
            members: vec![
                MixtureMember {
                    model: always(1.0),
                    weight: 0.5,
                },
                MixtureMember {
                    model: always(-1.0),
                    weight: 0.5,
                },
            ],
        });
        // Vote mass for 1 is exactly half the total: tie predicts 1.
        assert_eq!(mixture.predict_row(&[0.0]), 1);
    }

    #[test]
    fn json_round_trip() {
        let m = Explainer::Logistic(LogisticModel {
            weights: vec![0.25, -1.5],
            bias: 0.75,
        });
        let text = to_json(&m);
        let back = from_json(&text).unwrap();
        assert_eq!(back, m);
    }
}
