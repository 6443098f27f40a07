//! Poisoning attacks against the group fairness of linear classifiers.
//!
//! The crate provides the full pipeline needed to study these attacks at
//! desk scale:
//!
//! - [`data`]: dataset container, synthetic two-Gaussian generator with a
//!   rotation-based sensitive attribute, CSV ingestion, and seeded
//!   train/validation/test splitting.
//! - [`model`]: differentiable linear classifiers (logistic regression and a
//!   squared-hinge linear SVM) trained by a damped Newton solver, plus
//!   cross-validated regularization selection.
//! - [`fairness`]: group confusion tables and the fairness metrics derived
//!   from them (demographic parity, disparate impact, average odds
//!   difference, per-group error rates).
//! - [`attack`]: the poisoning engine: attacker objective, KKT-based
//!   implicit gradients, projected gradient ascent, and the greedy
//!   multi-point loop, together with an error-generic baseline.
//! - [`transfer`]: non-differentiable target models (naive Bayes, decision
//!   tree, random forest, RBF SVM) used to evaluate black-box transfer.
//! - [`experiment`]: reproducible experiment protocols (separation sweep,
//!   poison-fraction sweep, transferability study) with tidy CSV / JSON
//!   reporting.

pub mod attack;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fairness;
pub(crate) mod linalg;
pub mod model;
pub(crate) mod rng;
pub mod transfer;

pub use attack::{
    attacker_loss, build_objective, flip_targets, generic_objective, init_points,
    optimize_point, poison_gradient, run_attack, run_generic_attack, AttackConfig,
    AttackObjective, AttackOutcome, BoundsMode, BoxBounds, Budget, LambdaPolicy, PoisonPoint,
    TraceRecord,
};
pub use data::{
    generate_synthetic, load_csv, partition_by_group, split, DataSplit, GroupTag, SampleSet,
    SyntheticConfig, DEFAULT_ROTATION,
};
pub use error::{Error, Result};
pub use experiment::{
    run_fraction_sweep, run_separation_sweep, run_transfer_study, AggregateRecord, AttackKind,
    ExperimentConfig, ExperimentReport, FailureRecord, MetricAggregate, RunRecord, Scenario,
};
pub use fairness::{
    average_odds_difference, confusion, demographic_parity, disparate_impact, evaluate_model,
    evaluate_predictions, rates, GroupCounts, GroupRates, GroupedConfusion, MetricsRecord,
};
pub use model::{
    decision_values, loss_terms, predict, select_c, train, LinearModel, LossKind, LossTerms,
    ModelSpec, RegC, TrainConfig,
};
pub use transfer::{
    train_decision_tree, train_gaussian_nb, train_random_forest, train_rbf_svm, TargetModel,
};
