//! Desk-scale black-box classifiers and their hyperparameter search.
//!
//! Four families: AdaBoost over decision stumps, a random forest, a small
//! MLP and gradient boosted trees. Training is deterministic given the
//! hyperparameters and a seed; candidates of the random search each derive a
//! private RNG from (seed, draw index), so the search result is independent
//! of scheduling. Score ties at the decision threshold predict 1.

mod adaboost;
mod forest;
mod gbt;
mod mlp;

pub use adaboost::{AdaboostParams, Stump};
pub use forest::ForestParams;
pub use gbt::GbtParams;
pub use mlp::{DenseLayer, MlpParams};

use crate::dataspace::Dataset;
use crate::exec::{map_indexed, mix_seed};
use crate::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlackBoxError {
    #[error("training labels are constant")]
    DegenerateTraining,
    #[error("all {0} search candidates failed to train")]
    AllCandidatesFailed(usize),
    #[error("schema mismatch: model expects {expected} columns, got {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("model fingerprint does not match the dataset's feature names")]
    FingerprintMismatch,
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error("unknown black-box family `{0}`")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlackBoxFamily {
    Adaboost,
    Rf,
    Mlp,
    Gbt,
}

impl BlackBoxFamily {
    pub const ALL: [BlackBoxFamily; 4] = [
        BlackBoxFamily::Adaboost,
        BlackBoxFamily::Rf,
        BlackBoxFamily::Mlp,
        BlackBoxFamily::Gbt,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BlackBoxFamily::Adaboost => "adaboost",
            BlackBoxFamily::Rf => "rf",
            BlackBoxFamily::Mlp => "mlp",
            BlackBoxFamily::Gbt => "gbt",
        }
    }
}

impl fmt::Display for BlackBoxFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlackBoxFamily {
    type Err = BlackBoxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaboost" => Ok(BlackBoxFamily::Adaboost),
            "rf" => Ok(BlackBoxFamily::Rf),
            "mlp" => Ok(BlackBoxFamily::Mlp),
            "gbt" => Ok(BlackBoxFamily::Gbt),
            other => Err(BlackBoxError::UnknownFamily(other.to_string())),
        }
    }
}

/// Ties a model to the feature layout it was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFingerprint {
    pub names_hash: u64,
    pub n_cols: usize,
}

impl SchemaFingerprint {
    pub fn of(feature_names: &[String]) -> Self {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for name in feature_names {
            for &b in name.as_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0x1f;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        SchemaFingerprint {
            names_hash: h,
            n_cols: feature_names.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FamilyParams {
    Adaboost(AdaboostParams),
    Rf(ForestParams),
    Mlp(MlpParams),
    Gbt(GbtParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackBoxModel {
    pub family: BlackBoxFamily,
    pub params: FamilyParams,
    pub seed: u64,
    pub fingerprint: SchemaFingerprint,
}

impl BlackBoxModel {
    /// Raw decision scores: probability-like in [0, 1] for rf/mlp,
    /// margins for adaboost, log-odds for gbt.
    fn score_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            FamilyParams::Adaboost(p) => p.margin(row),
            FamilyParams::Rf(p) => p.vote_fraction(row),
            FamilyParams::Mlp(p) => p.probability(row),
            FamilyParams::Gbt(p) => p.log_odds(row),
        }
    }

    fn threshold(&self) -> f64 {
        match &self.params {
            // Probabilities threshold at 0.5, margins/log-odds at 0.
            FamilyParams::Rf(_) | FamilyParams::Mlp(_) => 0.5,
            FamilyParams::Adaboost(_) | FamilyParams::Gbt(_) => 0.0,
        }
    }

    /// Predicts on a raw feature matrix, checking only the column count.
    pub fn predict_features(&self, features: &Matrix) -> Result<Vec<u8>, BlackBoxError> {
        if features.n_cols() != self.fingerprint.n_cols {
            return Err(BlackBoxError::SchemaMismatch {
                expected: self.fingerprint.n_cols,
                got: features.n_cols(),
            });
        }
        let t = self.threshold();
        Ok(features
            .iter_rows()
            .map(|row| (self.score_row(row) >= t) as u8)
            .collect())
    }

    /// Predicts on a dataset, verifying the full schema fingerprint.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<u8>, BlackBoxError> {
        if SchemaFingerprint::of(&data.feature_names) != self.fingerprint {
            return Err(BlackBoxError::FingerprintMismatch);
        }
        self.predict_features(&data.features)
    }

    /// Stable identifier derived from family, seed and parameter bytes.
    pub fn id(&self) -> String {
        let bytes = serde_json::to_vec(&self.params).expect("params serialize");
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{}-{:016x}", self.family, h)
    }
}

/// Versioned on-disk form.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    family: BlackBoxFamily,
    params: FamilyParams,
    seed: u64,
    fingerprint: SchemaFingerprint,
}

pub const MODEL_FILE_VERSION: u32 = 1;

pub fn model_to_json(model: &BlackBoxModel) -> String {
    serde_json::to_string_pretty(&ModelFile {
        version: MODEL_FILE_VERSION,
        family: model.family,
        params: model.params.clone(),
        seed: model.seed,
        fingerprint: model.fingerprint,
    })
    .expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<BlackBoxModel, BlackBoxError> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.version != MODEL_FILE_VERSION {
        return Err(BlackBoxError::Version(file.version));
    }
    Ok(BlackBoxModel {
        family: file.family,
        params: file.params,
        seed: file.seed,
        fingerprint: file.fingerprint,
    })
}

pub fn save_model(model: &BlackBoxModel, path: impl AsRef<Path>) -> Result<(), BlackBoxError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(|source| BlackBoxError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BlackBoxModel, BlackBoxError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| BlackBoxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}

/// One sampled hyperparameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HyperPoint {
    Adaboost {
        rounds: u32,
    },
    Rf {
        trees: u32,
        max_depth: u32,
    },
    Mlp {
        widths: Vec<usize>,
        learning_rate: f64,
        epochs: u32,
    },
    Gbt {
        rounds: u32,
        depth: u32,
        shrinkage: f64,
    },
}

/// Per-family sampling ranges for the random search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    pub adaboost_rounds: RangeInclusive<u32>,
    pub rf_trees: RangeInclusive<u32>,
    pub rf_depth: RangeInclusive<u32>,
    pub mlp_width: RangeInclusive<usize>,
    pub mlp_layers: RangeInclusive<usize>,
    /// Log-uniform.
    pub mlp_learning_rate: (f64, f64),
    pub mlp_epochs: RangeInclusive<u32>,
    pub gbt_rounds: RangeInclusive<u32>,
    pub gbt_depth: RangeInclusive<u32>,
    pub gbt_shrinkage: (f64, f64),
}

impl Default for HyperparamSpace {
    fn default() -> Self {
        HyperparamSpace {
            adaboost_rounds: 50..=500,
            rf_trees: 50..=300,
            rf_depth: 3..=16,
            mlp_width: 8..=64,
            mlp_layers: 1..=2,
            mlp_learning_rate: (1e-3, 1e-1),
            mlp_epochs: 20..=200,
            gbt_rounds: 50..=500,
            gbt_depth: 2..=6,
            gbt_shrinkage: (0.05, 0.3),
        }
    }
}

impl HyperparamSpace {
    /// Deterministic draw keyed by (seed, draw index).
    pub fn sample(&self, family: BlackBoxFamily, seed: u64, draw: u32) -> HyperPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, draw as u64));
        match family {
            BlackBoxFamily::Adaboost => HyperPoint::Adaboost {
                rounds: rng.gen_range(self.adaboost_rounds.clone()),
            },
            BlackBoxFamily::Rf => HyperPoint::Rf {
                trees: rng.gen_range(self.rf_trees.clone()),
                max_depth: rng.gen_range(self.rf_depth.clone()),
            },
            BlackBoxFamily::Mlp => {
                let n_layers = rng.gen_range(self.mlp_layers.clone());
                let widths = (0..n_layers)
                    .map(|_| rng.gen_range(self.mlp_width.clone()))
                    .collect();
                let (lo, hi) = self.mlp_learning_rate;
                let learning_rate = (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp();
                HyperPoint::Mlp {
                    widths,
                    learning_rate,
                    epochs: rng.gen_range(self.mlp_epochs.clone()),
                }
            }
            BlackBoxFamily::Gbt => {
                let (lo, hi) = self.gbt_shrinkage;
                HyperPoint::Gbt {
                    rounds: rng.gen_range(self.gbt_rounds.clone()),
                    depth: rng.gen_range(self.gbt_depth.clone()),
                    shrinkage: lo + rng.gen::<f64>() * (hi - lo),
                }
            }
        }
    }
}

/// Trains one model at a fixed hyperparameter point.
pub fn train(
    family: BlackBoxFamily,
    train_data: &Dataset,
    hp: &HyperPoint,
    seed: u64,
) -> Result<BlackBoxModel, BlackBoxError> {
    let labels = &train_data.labels;
    if labels.iter().all(|&y| y == 0) || labels.iter().all(|&y| y == 1) {
        return Err(BlackBoxError::DegenerateTraining);
    }
    let features = &train_data.features;
    let params = match (family, hp) {
        (BlackBoxFamily::Adaboost, HyperPoint::Adaboost { rounds }) => {
            FamilyParams::Adaboost(adaboost::train(features, labels, *rounds))
        }
        (BlackBoxFamily::Rf, HyperPoint::Rf { trees, max_depth }) => FamilyParams::Rf(
            forest::train(features, labels, *trees, *max_depth as usize, seed),
        ),
        (
            BlackBoxFamily::Mlp,
            HyperPoint::Mlp {
                widths,
                learning_rate,
                epochs,
            },
        ) => FamilyParams::Mlp(mlp::train(
            features,
            labels,
            widths,
            *learning_rate,
            *epochs,
            seed,
        )),
        (
            BlackBoxFamily::Gbt,
            HyperPoint::Gbt {
                rounds,
                depth,
                shrinkage,
            },
        ) => FamilyParams::Gbt(gbt::train(
            features,
            labels,
            *rounds,
            *depth as usize,
            *shrinkage,
        )),
        _ => panic!("hyperparameter point does not match family {family}"),
    };
    Ok(BlackBoxModel {
        family,
        params,
        seed,
        fingerprint: SchemaFingerprint::of(&train_data.feature_names),
    })
}

/// Uniform random hyperparameter search.
///
/// Draws `n_iter` candidates, trains each with a private seed derived from
/// (seed, draw index), and returns the one with the highest validation
/// accuracy. Ties keep the earlier draw. Candidates that fail to train are
/// skipped.
pub fn search(
    family: BlackBoxFamily,
    train_data: &Dataset,
    validation_data: &Dataset,
    space: &HyperparamSpace,
    n_iter: u32,
    seed: u64,
) -> Result<BlackBoxModel, BlackBoxError> {
    assert!(n_iter >= 1, "need at least one search iteration");
    let draws: Vec<u32> = (0..n_iter).collect();
    let candidates = map_indexed(&draws, |_, &draw| {
        let hp = space.sample(family, seed, draw);
        train(family, train_data, &hp, mix_seed(seed, draw as u64))
            .ok()
            .and_then(|model| {
                let preds = model.predict(validation_data).ok()?;
                let acc = crate::metrics::accuracy(&preds, &validation_data.labels).ok()?;
                Some((model, acc))
            })
    });
    let mut best: Option<(BlackBoxModel, f64)> = None;
    for candidate in candidates.into_iter().flatten() {
        match &best {
            None => best = Some(candidate),
            Some((_, best_acc)) if candidate.1 > *best_acc => best = Some(candidate),
            _ => {}
        }
    }
    best.map(|(model, _)| model)
        .ok_or(BlackBoxError::AllCandidatesFailed(n_iter as usize))
}
