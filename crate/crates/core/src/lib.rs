//! Core library for analyzing global fairwashing attacks.
//!
//! An unfair black-box classifier can be "explained" by an interpretable
//! surrogate that is trained to match the black-box's predictions on a suing
//! group while obeying an explicit unfairness bound. This crate provides the
//! whole pipeline for studying that attack:
//!
//! * [`dataspace`] — CSV ingestion, one-hot encoding, deterministic
//!   train / suing-group / test splits and a synthetic fixture generator.
//! * [`metrics`] — the four group-fairness gaps (statistical parity,
//!   predictive equality, equal opportunity, equalized odds), fidelity,
//!   accuracy and label agreement, all computed with exact integer counting.
//! * [`blackbox`] — desk-scale AdaBoost, random forest, MLP and gradient
//!   boosted tree classifiers with a seeded 25-iteration random
//!   hyperparameter search.
//! * [`explainers`] — logistic regression, CART decision trees and rule
//!   lists (branch-and-bound with a native fairness constraint), all
//!   supporting instance weights.
//! * [`fairtrain`] — the exponentiated-gradient reduction that trains
//!   logistic / tree surrogates under an unfairness constraint.
//! * [`attack`] — the fairwashing attack itself and the ε-sweep producing
//!   fidelity–unfairness Pareto fronts.
//! * [`eval`] — generalization beyond the suing group and transferability
//!   across black-box models.
//! * [`rashomon`] — the range of signed disparity achievable by surrogates
//!   whose loss stays under a bound (manipulability quantification).
//!
//! Data-parallel loops (ε-sweeps, transfer matrices, range grids) dispatch
//! through [`exec`]; with the default `parallel` feature they run on rayon,
//! without it they fall back to sequential iteration. Results are identical
//! either way: every task derives its RNG from a task index and outputs are
//! collected in input order.

pub mod attack;
pub mod blackbox;
pub mod dataspace;
pub mod eval;
pub mod exec;
pub mod explainers;
pub mod fairtrain;
pub mod matrix;
pub mod metrics;
pub mod rashomon;

pub use matrix::Matrix;
