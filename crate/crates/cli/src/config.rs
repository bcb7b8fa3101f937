//! Experiment configuration (JSON).
//!
//! All seeds are explicit with fixed defaults; nothing is derived from the
//! clock, so a config fully determines every output byte.

use crate::error::{CliError, CliResult};
use fairwash_core::attack::{AttackParams, EpsilonGrid, SurrogateFamily};
use fairwash_core::blackbox::BlackBoxFamily;
use fairwash_core::exec::mix_seed;
use fairwash_core::explainers::{LogisticConfig, RuleListConfig};
use fairwash_core::fairtrain::EgParams;
use fairwash_core::metrics::FairnessMetricId;
use fairwash_core::rashomon::RashomonParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV dataset path.
    pub dataset: PathBuf,
    /// JSON schema path.
    pub schema: PathBuf,
    /// Drop rows with non-admissible categorical values instead of failing.
    #[serde(default)]
    pub drop_unknown_rows: bool,
    #[serde(default)]
    pub split: SplitConfig,
    /// Which resampled split the run uses.
    #[serde(default)]
    pub resample_index: u32,
    #[serde(default)]
    pub blackbox: BlackboxConfig,
    #[serde(default)]
    pub explainer: ExplainerConfig,
    #[serde(default = "default_metric")]
    pub metric: FairnessMetricId,
    #[serde(default)]
    pub epsilon: EpsilonConfig,
    #[serde(default)]
    pub constrained: ConstrainedConfig,
    #[serde(default)]
    pub transfer: TransferConfig,
    #[serde(default)]
    pub rashomon: RashomonConfig,
    /// Output directory; `--out` overrides.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_metric() -> FairnessMetricId {
    FairnessMetricId::Sp
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub seed: u64,
    pub n_resamples: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.67, 0.165, 0.165],
            seed: 42,
            n_resamples: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlackboxConfig {
    /// Families trained by `train-blackbox` and `transfer`.
    pub families: Vec<BlackBoxFamily>,
    /// Random-search iterations per family.
    pub search_iterations: u32,
    pub seed: u64,
    /// The model attacked by `attack`, `generalize` and `rashomon`, and the
    /// teacher in `transfer`.
    pub target: BlackBoxFamily,
    /// Fraction of the training partition carved out as the search's
    /// validation set.
    pub validation_fraction: f64,
}

impl Default for BlackboxConfig {
    fn default() -> Self {
        BlackboxConfig {
            families: BlackBoxFamily::ALL.to_vec(),
            search_iterations: 25,
            seed: 7,
            target: BlackBoxFamily::Mlp,
            validation_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Logistic,
    Tree,
    Rulelist,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainerConfig {
    pub family: SurrogateKind,
    pub seed: u64,
    #[serde(default)]
    pub logistic: LogisticConfig,
    pub tree_max_depth: usize,
    pub rule_max_len: usize,
    pub rule_min_support: f64,
    #[serde(default)]
    pub rules: RuleListConfig,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            family: SurrogateKind::Logistic,
            seed: 11,
            logistic: LogisticConfig::default(),
            tree_max_depth: 4,
            rule_max_len: 2,
            rule_min_support: 0.05,
            rules: RuleListConfig::default(),
        }
    }
}

impl ExplainerConfig {
    pub fn surrogate(&self) -> SurrogateFamily {
        match self.family {
            SurrogateKind::Logistic => SurrogateFamily::Logistic(LogisticConfig {
                seed: self.seed,
                ..self.logistic
            }),
            SurrogateKind::Tree => SurrogateFamily::Tree {
                max_depth: self.tree_max_depth,
            },
            SurrogateKind::Rulelist => SurrogateFamily::RuleList {
                max_len: self.rule_max_len,
                min_support: self.rule_min_support,
                config: self.rules,
            },
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonConfig {
    /// Number of uniform grid values in [0, 1].
    pub grid: Option<usize>,
    /// Explicit ε values (strictly increasing); takes precedence.
    pub values: Option<Vec<f64>>,
}

impl EpsilonConfig {
    pub fn to_grid(&self) -> CliResult<EpsilonGrid> {
        match (&self.values, self.grid) {
            (Some(values), _) => EpsilonGrid::new(values.clone())
                .map_err(|e| CliError::Usage(format!("epsilon.values: {e}"))),
            (None, Some(n)) if n >= 2 => Ok(EpsilonGrid::uniform(n)),
            (None, Some(n)) => Err(CliError::Usage(format!(
                "epsilon.grid must be at least 2, got {n}"
            ))),
            (None, None) => Ok(EpsilonGrid::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstrainedConfig {
    pub iterations: u32,
    pub bound: f64,
    pub learning_rate: Option<f64>,
    pub tolerance: f64,
    pub pick_slack: f64,
}

impl Default for ConstrainedConfig {
    fn default() -> Self {
        let eg = EgParams::default();
        ConstrainedConfig {
            iterations: eg.iterations,
            bound: eg.bound,
            learning_rate: eg.learning_rate,
            tolerance: eg.tolerance,
            pick_slack: 0.01,
        }
    }
}

impl ConstrainedConfig {
    pub fn attack_params(&self, seed: u64) -> AttackParams {
        AttackParams {
            eg: EgParams {
                iterations: self.iterations,
                learning_rate: self.learning_rate,
                bound: self.bound,
                tolerance: self.tolerance,
            },
            pick_slack: self.pick_slack,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    /// One transfer matrix per ε.
    pub epsilons: Vec<f64>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            epsilons: vec![0.03, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RashomonConfig {
    pub fidelity_levels: Vec<f64>,
    pub iterations: u32,
    pub learning_rate: f64,
    pub bound: f64,
    pub slack: f64,
}

impl Default for RashomonConfig {
    fn default() -> Self {
        let p = RashomonParams::default();
        RashomonConfig {
            fidelity_levels: (0..8).map(|k| 0.70 + 0.04 * k as f64).collect(),
            iterations: p.iterations,
            learning_rate: p.learning_rate,
            bound: p.bound,
            slack: p.slack,
        }
    }
}

impl RashomonConfig {
    pub fn params(&self) -> RashomonParams {
        RashomonParams {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            bound: self.bound,
            slack: self.slack,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::Usage(format!("cannot parse config {}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        for (role, path) in [("dataset", &self.dataset), ("schema", &self.schema)] {
            if !path.exists() {
                return Err(CliError::Usage(format!(
                    "{role} file does not exist: {}",
                    path.display()
                )));
            }
        }
        if self.blackbox.families.is_empty() {
            return Err(CliError::Usage("blackbox.families must be non-empty".into()));
        }
        if !(0.0..0.5).contains(&self.blackbox.validation_fraction) {
            return Err(CliError::Usage(
                "blackbox.validation_fraction must be in [0, 0.5)".into(),
            ));
        }
        Ok(())
    }

    /// Replaces every module seed with one derived from `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.split.seed = mix_seed(seed, 1);
        self.blackbox.seed = mix_seed(seed, 2);
        self.explainer.seed = mix_seed(seed, 3);
    }
}
