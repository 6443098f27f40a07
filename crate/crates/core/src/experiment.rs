//! Repeated-run poisoning studies with aggregated reporting.
//!
//! Three protocols are covered: a class-separation sweep on synthetic
//! data, a poison-fraction sweep on a fixed dataset, and a transfer study
//! that crafts points against a logistic-regression surrogate and applies
//! them to six model families. Every protocol runs each configuration
//! several times, evaluates clean and poisoned models on the same held-out
//! test set, and reports per-run rows plus mean and standard deviation
//! aggregates. Runs execute in parallel; results merge in sweep order, so
//! reports are deterministic for a fixed master seed.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{run_attack, run_generic_attack, AttackConfig, Budget, PoisonPoint};
use crate::data::{generate_synthetic, split, GroupTag, SampleSet, SyntheticConfig};
use crate::error::{Error, Result};
use crate::fairness::{evaluate_model, evaluate_predictions, MetricsRecord, DEFAULT_FAIRNESS_EPSILON};
use crate::model::{predict, select_c, train, LinearModel, LossKind, TrainConfig};
use crate::rng::derive_seed;
use crate::transfer::{
    default_gamma, train_decision_tree, train_gaussian_nb, train_random_forest, train_rbf_svm,
    DEFAULT_FOREST_TREES, DEFAULT_TREE_MAX_DEPTH, DEFAULT_TREE_MIN_LEAF,
};

/// Version stamp written into every report, JSON and CSV alike.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Depth cap for forest members; single trees use the shallower default.
const FOREST_MAX_DEPTH: usize = 16;
/// Fixed hyperparameters of the RBF-kernel target.
const RBF_REG_C: f64 = 1.0;
const RBF_TOLERANCE: f64 = 1e-3;
/// Share of the surrogate pool that becomes the attacker's training set;
/// the rest is the attacker's validation set.
const ATTACKER_TRAIN_SHARE: f64 = 0.6;

// Seed streams drawn from a run seed. Values are arbitrary but must stay
// pairwise distinct.
const STREAM_SPLIT: u64 = 0x52554e53;
const STREAM_SELECT: u64 = 0x52554e43;
const STREAM_SELECT_HINGE: u64 = 0x52554e48;
const STREAM_ATTACK: u64 = 0x52554e41;
const STREAM_GENERIC: u64 = 0x52554e47;
const STREAM_FOREST: u64 = 0x52554e46;
const STREAM_POOL: u64 = 0x53555250;
const STREAM_POOL_SPLIT: u64 = 0x53555054;
const STREAM_SURROGATE_DATA: u64 = 0x53555244;
const STREAM_SURROGATE_SPLIT: u64 = 0x53555253;
const STREAM_SURROGATE_SELECT: u64 = 0x53555243;
const STREAM_SURROGATE_ATTACK: u64 = 0x53555241;

/// What the attacker was allowed to see when crafting the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Points optimized against the attacked model and its training data.
    WhiteBox,
    /// Points optimized against a surrogate trained on data the target
    /// never sees, then injected into the target's training set.
    BlackBox {
        /// Trainer of the surrogate model.
        surrogate_spec: TrainConfig,
        /// Seed that produced the surrogate's data.
        surrogate_data_seed: u64,
    },
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Scenario::WhiteBox => "white_box",
            Scenario::BlackBox { .. } => "black_box",
        }
    }

    pub fn surrogate_data_seed(&self) -> Option<u64> {
        match self {
            Scenario::WhiteBox => None,
            Scenario::BlackBox { surrogate_data_seed, .. } => Some(*surrogate_data_seed),
        }
    }
}

/// Which objective drove the crafting loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Group-weighted loss over relabeled held-out samples.
    Fairness,
    /// Plain held-out loss under true labels.
    Generic,
}

impl AttackKind {
    pub fn label(&self) -> &'static str {
        match self {
            AttackKind::Fairness => "fairness",
            AttackKind::Generic => "generic",
        }
    }
}

/// Shared knobs of all three protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Base seed; run `r` of any sweep point uses `master_seed + r`.
    pub master_seed: u64,
    /// Synthetic dataset size drawn per run of the separation sweep.
    pub n_samples: usize,
    /// Family of the attacked model, and of the surrogate outside the
    /// transfer study.
    pub loss_kind: LossKind,
    /// Regularization grid for cross-validated selection.
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    /// Train, validation, test shares of each run's target data.
    pub split_fractions: (f64, f64, f64),
    pub fairness_epsilon: f64,
    /// Share of a fixed dataset carved off as the black-box attacker's own
    /// pool before the target split is drawn.
    pub surrogate_pool_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            n_samples: 2000,
            loss_kind: LossKind::Logistic,
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            cv_folds: 5,
            split_fractions: (0.5, 0.3, 0.2),
            fairness_epsilon: DEFAULT_FAIRNESS_EPSILON,
            surrogate_pool_fraction: 0.3,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_samples < 4 {
            problems.push(format!("n_samples must be >= 4, got {}", self.n_samples));
        }
        if self.c_grid.is_empty() {
            problems.push("c_grid must not be empty".into());
        }
        if !self.surrogate_pool_fraction.is_finite()
            || self.surrogate_pool_fraction <= 0.0
            || self.surrogate_pool_fraction >= 1.0
        {
            problems.push(format!(
                "surrogate_pool_fraction must be in (0, 1), got {}",
                self.surrogate_pool_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.fairness_epsilon) {
            problems.push(format!(
                "fairness_epsilon must be in [0, 1), got {}",
                self.fairness_epsilon
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    fn run_seed(&self, run: usize) -> u64 {
        self.master_seed.wrapping_add(run as u64)
    }
}

/// One attacked model evaluated in one run: clean and poisoned metrics on
/// the same test samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: Scenario,
    /// Human-readable description of the data the run drew from.
    pub dataset: String,
    /// Value of the swept axis: class separation, requested poison
    /// fraction, or realized poison fraction in the transfer study.
    pub sweep_value: f64,
    /// Number of crafted points.
    pub budget: usize,
    pub run: usize,
    /// Seed every per-run random choice was derived from.
    pub seed: u64,
    pub attack_kind: AttackKind,
    pub target_model: String,
    pub clean: MetricsRecord,
    pub poisoned: MetricsRecord,
}

/// A run that errored. Failed runs never contribute to aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub sweep_value: Option<f64>,
    pub run: usize,
    pub seed: u64,
    pub message: String,
}

/// Mean and sample standard deviation of one metric over the records with
/// a defined value; `count` is how many contributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Aggregates of one (scenario, attack, target model, sweep value) cell.
/// `runs` is the configured repetition count, `completed` how many records
/// actually landed in the cell; metrics undefined in every contributing
/// record are omitted, and `completed - count` of an entry is its number
/// of pairwise exclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub scenario: String,
    pub attack_kind: AttackKind,
    pub target_model: String,
    pub sweep_value: f64,
    pub runs: usize,
    pub completed: usize,
    pub metrics: BTreeMap<String, MetricAggregate>,
}

/// Everything one protocol produced, ready to serialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// Protocol that produced the report.
    pub protocol: String,
    pub master_seed: u64,
    /// Configured repetitions per sweep point.
    pub runs: usize,
    /// Fixed settings of models that take no part in the sweeps.
    pub hyperparameters: BTreeMap<String, String>,
    pub records: Vec<RunRecord>,
    pub failures: Vec<FailureRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

impl ExperimentReport {
    fn assemble(
        protocol: &str,
        config: &ExperimentConfig,
        runs: usize,
        hyperparameters: BTreeMap<String, String>,
        outcomes: Vec<std::result::Result<Vec<RunRecord>, FailureRecord>>,
    ) -> Self {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for outcome in outcomes {
            match outcome {
                Ok(mut rows) => records.append(&mut rows),
                Err(failure) => failures.push(failure),
            }
        }
        let aggregates = aggregate(&records, runs);
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            protocol: protocol.to_string(),
            master_seed: config.master_seed,
            runs,
            hyperparameters,
            records,
            failures,
            aggregates,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut body = self.to_json_string()?;
        body.push('\n');
        Ok(std::fs::write(path, body)?)
    }

    /// Tidy per-run table: one row per attacked model per run, clean and
    /// poisoned metric columns side by side, undefined cells empty.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        self.write_csv_into(&mut writer)?;
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::InvalidData(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        self.write_csv_into(&mut writer)
    }

    fn write_csv_into<W: std::io::Write>(&self, writer: &mut csv::Writer<W>) -> Result<()> {
        let mut header = vec![
            "schema_version".to_string(),
            "protocol".to_string(),
            "scenario".to_string(),
            "surrogate_data_seed".to_string(),
            "dataset".to_string(),
            "sweep_value".to_string(),
            "budget".to_string(),
            "run".to_string(),
            "seed".to_string(),
            "attack_kind".to_string(),
            "target_model".to_string(),
        ];
        for prefix in ["clean", "poisoned"] {
            for metric in METRIC_NAMES {
                header.push(format!("{prefix}_{metric}"));
            }
        }
        writer.write_record(&header)?;
        for record in &self.records {
            let mut row = vec![
                self.schema_version.to_string(),
                self.protocol.clone(),
                record.scenario.label().to_string(),
                record.scenario.surrogate_data_seed().map(|s| s.to_string()).unwrap_or_default(),
                record.dataset.clone(),
                format_float(record.sweep_value),
                record.budget.to_string(),
                record.run.to_string(),
                record.seed.to_string(),
                record.attack_kind.label().to_string(),
                record.target_model.clone(),
            ];
            metric_cells(&record.clean, &mut row);
            metric_cells(&record.poisoned, &mut row);
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

const METRIC_NAMES: [&str; 9] = [
    "accuracy",
    "demographic_parity",
    "disparate_impact",
    "average_odds_difference",
    "fnr_unprivileged",
    "fnr_privileged",
    "fpr_unprivileged",
    "fpr_privileged",
    "unfair",
];

/// Shortest decimal form that parses back to the same value.
fn format_float(value: f64) -> String {
    format!("{value}")
}

fn metric_cells(metrics: &MetricsRecord, row: &mut Vec<String>) {
    for (_, value) in metric_entries("", metrics) {
        row.push(value.map(format_float).unwrap_or_default());
    }
}

/// Flatten a record into named optional values, `unfair` as a 0/1
/// indicator, in [`METRIC_NAMES`] order.
fn metric_entries(prefix: &str, metrics: &MetricsRecord) -> Vec<(String, Option<f64>)> {
    let values = [
        Some(metrics.accuracy),
        metrics.demographic_parity,
        metrics.disparate_impact,
        metrics.average_odds_difference,
        metrics.fnr_unprivileged,
        metrics.fnr_privileged,
        metrics.fpr_unprivileged,
        metrics.fpr_privileged,
        metrics.unfair.map(|unfair| if unfair { 1.0 } else { 0.0 }),
    ];
    METRIC_NAMES
        .iter()
        .zip(values)
        .map(|(name, value)| {
            let key = if prefix.is_empty() { (*name).to_string() } else { format!("{prefix}_{name}") };
            (key, value)
        })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, variance.sqrt())
}

/// Group records into cells and aggregate each metric over the runs where
/// it is defined. Cells appear in record order.
fn aggregate(records: &[RunRecord], runs: usize) -> Vec<AggregateRecord> {
    type Key = (String, AttackKind, String, u64);
    let mut cells: Vec<(Key, Vec<&RunRecord>)> = Vec::new();
    for record in records {
        let key = (
            record.scenario.label().to_string(),
            record.attack_kind,
            record.target_model.clone(),
            record.sweep_value.to_bits(),
        );
        match cells.iter_mut().find(|(existing, _)| *existing == key) {
            Some((_, members)) => members.push(record),
            None => cells.push((key, vec![record])),
        }
    }

    cells
        .into_iter()
        .map(|((scenario, attack_kind, target_model, sweep_bits), members)| {
            let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for member in &members {
                for (name, value) in metric_entries("clean", &member.clean)
                    .into_iter()
                    .chain(metric_entries("poisoned", &member.poisoned))
                {
                    if let Some(v) = value {
                        series.entry(name).or_default().push(v);
                    }
                }
            }
            let metrics = series
                .into_iter()
                .map(|(name, values)| {
                    let (mean, std) = mean_std(&values);
                    (name, MetricAggregate { mean, std, count: values.len() })
                })
                .collect();
            AggregateRecord {
                scenario,
                attack_kind,
                target_model,
                sweep_value: f64::from_bits(sweep_bits),
                runs,
                completed: members.len(),
                metrics,
            }
        })
        .collect()
}

fn model_name(loss_kind: LossKind) -> &'static str {
    match loss_kind {
        LossKind::Logistic => "logistic_regression",
        LossKind::SquaredHinge => "linear_svm",
    }
}

/// Cross-validate the regularization constant on `data`, then train on all
/// of it.
fn train_selected(
    data: &SampleSet,
    loss_kind: LossKind,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(LinearModel, TrainConfig)> {
    let reg = select_c(data, loss_kind, &config.c_grid, config.cv_folds, seed)?;
    let train_config = TrainConfig::new(loss_kind, reg.chosen);
    let model = train(data, &train_config)?;
    Ok((model, train_config))
}

/// Split off a rounded `fraction` share of `data` at random. Both parts
/// must end up non-empty.
fn carve(data: &SampleSet, fraction: f64, seed: u64) -> Result<(SampleSet, SampleSet)> {
    let n = data.n();
    let k = (fraction * n as f64).round() as usize;
    if k == 0 || k >= n {
        return Err(Error::InvalidData(format!(
            "cannot carve a {fraction} share out of {n} samples"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    Ok((data.select(&indices[..k]), data.select(&indices[k..])))
}

/// Append crafted points to a training set the attacker never saw.
fn poison_into(train: &SampleSet, points: &[PoisonPoint]) -> Result<SampleSet> {
    if points.is_empty() {
        return Ok(train.clone());
    }
    let mut features = Array2::<f64>::zeros((points.len(), train.dim()));
    let mut labels = Array1::<f64>::zeros(points.len());
    for (i, point) in points.iter().enumerate() {
        features.row_mut(i).assign(&point.features);
        labels[i] = point.label;
    }
    train.with_appended(&features, &labels, &vec![GroupTag::None; points.len()])
}

/// Craft points against a surrogate trained on the attacker's own data.
/// Returns the points and the surrogate's trainer for the report.
fn black_box_points(
    attacker_train: &SampleSet,
    attacker_validation: &SampleSet,
    loss_kind: LossKind,
    config: &ExperimentConfig,
    attack: &AttackConfig,
    select_seed: u64,
) -> Result<(Vec<PoisonPoint>, TrainConfig)> {
    let reg = select_c(attacker_train, loss_kind, &config.c_grid, config.cv_folds, select_seed)?;
    let surrogate_config = TrainConfig::new(loss_kind, reg.chosen);
    let outcome = run_attack(attacker_train, attacker_validation, attack, &surrogate_config)?;
    Ok((outcome.poison_points, surrogate_config))
}

/// Target and surrogate draws for one separation-sweep run. Both use the
/// same generator settings but independent seeds, so their samples are
/// disjoint.
pub(crate) fn synthetic_pair(
    config: &ExperimentConfig,
    separation: f64,
    run: usize,
) -> Result<(SampleSet, SampleSet, u64)> {
    let seed = config.run_seed(run);
    let target = generate_synthetic(&SyntheticConfig::new(config.n_samples, separation, seed))?;
    let surrogate_seed = derive_seed(seed, STREAM_SURROGATE_DATA);
    let surrogate =
        generate_synthetic(&SyntheticConfig::new(config.n_samples, separation, surrogate_seed))?;
    Ok((target, surrogate, surrogate_seed))
}

fn separation_run(
    config: &ExperimentConfig,
    separation: f64,
    run: usize,
    attack: &AttackConfig,
) -> Result<Vec<RunRecord>> {
    let seed = config.run_seed(run);
    let (target, surrogate, surrogate_seed) = synthetic_pair(config, separation, run)?;
    let parts = split(&target, config.split_fractions, derive_seed(seed, STREAM_SPLIT))?;
    let (clean_model, train_config) =
        train_selected(&parts.train, config.loss_kind, config, derive_seed(seed, STREAM_SELECT))?;
    let clean = evaluate_model(&clean_model, &parts.test, config.fairness_epsilon)?;
    let budget = attack.budget.resolve(parts.train.n())?;
    let dataset = format!("synthetic(n={}, separation={})", config.n_samples, separation);
    let target_model = model_name(config.loss_kind).to_string();
    let mut records = Vec::with_capacity(2);

    let white_attack = AttackConfig {
        budget: Budget::Count(budget),
        seed: derive_seed(seed, STREAM_ATTACK),
        ..attack.clone()
    };
    let outcome = run_attack(&parts.train, &parts.validation, &white_attack, &train_config)?;
    let poisoned_model = train(&outcome.poisoned_train, &train_config)?;
    records.push(RunRecord {
        scenario: Scenario::WhiteBox,
        dataset: dataset.clone(),
        sweep_value: separation,
        budget,
        run,
        seed,
        attack_kind: AttackKind::Fairness,
        target_model: target_model.clone(),
        clean: clean.clone(),
        poisoned: evaluate_model(&poisoned_model, &parts.test, config.fairness_epsilon)?,
    });

    let surrogate_parts =
        split(&surrogate, config.split_fractions, derive_seed(seed, STREAM_SURROGATE_SPLIT))?;
    let black_attack = AttackConfig {
        budget: Budget::Count(budget),
        seed: derive_seed(seed, STREAM_SURROGATE_ATTACK),
        ..attack.clone()
    };
    let (points, surrogate_spec) = black_box_points(
        &surrogate_parts.train,
        &surrogate_parts.validation,
        config.loss_kind,
        config,
        &black_attack,
        derive_seed(seed, STREAM_SURROGATE_SELECT),
    )?;
    let poisoned_model = train(&poison_into(&parts.train, &points)?, &train_config)?;
    records.push(RunRecord {
        scenario: Scenario::BlackBox { surrogate_spec, surrogate_data_seed: surrogate_seed },
        dataset,
        sweep_value: separation,
        budget,
        run,
        seed,
        attack_kind: AttackKind::Fairness,
        target_model,
        clean,
        poisoned: evaluate_model(&poisoned_model, &parts.test, config.fairness_epsilon)?,
    });
    Ok(records)
}

/// Sweep the class separation of the synthetic generator. Each run draws a
/// fresh dataset, fits the attacked model with cross-validated
/// regularization, and mounts the attack both white-box and black-box,
/// the latter against a surrogate fitted to an independent draw.
pub fn run_separation_sweep(
    config: &ExperimentConfig,
    separations: &[f64],
    runs_per_separation: usize,
    attack: &AttackConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    attack.validate()?;
    if separations.is_empty() {
        return Err(Error::InvalidConfig("no separation values given".into()));
    }
    if runs_per_separation == 0 {
        return Err(Error::InvalidConfig("runs_per_separation must be >= 1".into()));
    }

    let jobs: Vec<(f64, usize)> = separations
        .iter()
        .flat_map(|&s| (0..runs_per_separation).map(move |run| (s, run)))
        .collect();
    let outcomes = jobs
        .into_par_iter()
        .map(|(separation, run)| {
            separation_run(config, separation, run, attack).map_err(|error| FailureRecord {
                sweep_value: Some(separation),
                run,
                seed: config.run_seed(run),
                message: error.to_string(),
            })
        })
        .collect();
    Ok(ExperimentReport::assemble(
        "separation_sweep",
        config,
        runs_per_separation,
        BTreeMap::new(),
        outcomes,
    ))
}

fn fraction_run(
    config: &ExperimentConfig,
    data: &SampleSet,
    dataset_name: &str,
    fraction: f64,
    run: usize,
    attack: &AttackConfig,
    include_generic_baseline: bool,
) -> Result<Vec<RunRecord>> {
    let seed = config.run_seed(run);
    let pool_seed = derive_seed(seed, STREAM_POOL);
    let (pool, rest) = carve(data, config.surrogate_pool_fraction, pool_seed)?;
    let parts = split(&rest, config.split_fractions, derive_seed(seed, STREAM_SPLIT))?;
    let (clean_model, train_config) =
        train_selected(&parts.train, config.loss_kind, config, derive_seed(seed, STREAM_SELECT))?;
    let clean = evaluate_model(&clean_model, &parts.test, config.fairness_epsilon)?;
    let budget = Budget::Fraction(fraction).resolve(parts.train.n())?;
    let target_model = model_name(config.loss_kind).to_string();
    let record = |scenario: Scenario, attack_kind: AttackKind, poisoned: MetricsRecord| RunRecord {
        scenario,
        dataset: dataset_name.to_string(),
        sweep_value: fraction,
        budget,
        run,
        seed,
        attack_kind,
        target_model: target_model.clone(),
        clean: clean.clone(),
        poisoned,
    };
    let mut records = Vec::with_capacity(3);

    let white_attack = AttackConfig {
        budget: Budget::Count(budget),
        seed: derive_seed(seed, STREAM_ATTACK),
        ..attack.clone()
    };
    let outcome = run_attack(&parts.train, &parts.validation, &white_attack, &train_config)?;
    let poisoned_model = train(&outcome.poisoned_train, &train_config)?;
    records.push(record(
        Scenario::WhiteBox,
        AttackKind::Fairness,
        evaluate_model(&poisoned_model, &parts.test, config.fairness_epsilon)?,
    ));

    let (attacker_train, attacker_validation) =
        carve(&pool, ATTACKER_TRAIN_SHARE, derive_seed(seed, STREAM_POOL_SPLIT))?;
    let black_attack = AttackConfig {
        budget: Budget::Count(budget),
        seed: derive_seed(seed, STREAM_SURROGATE_ATTACK),
        ..attack.clone()
    };
    let (points, surrogate_spec) = black_box_points(
        &attacker_train,
        &attacker_validation,
        config.loss_kind,
        config,
        &black_attack,
        derive_seed(seed, STREAM_SURROGATE_SELECT),
    )?;
    let poisoned_model = train(&poison_into(&parts.train, &points)?, &train_config)?;
    records.push(record(
        Scenario::BlackBox { surrogate_spec, surrogate_data_seed: pool_seed },
        AttackKind::Fairness,
        evaluate_model(&poisoned_model, &parts.test, config.fairness_epsilon)?,
    ));

    if include_generic_baseline {
        let generic_attack = AttackConfig {
            budget: Budget::Count(budget),
            seed: derive_seed(seed, STREAM_GENERIC),
            ..attack.clone()
        };
        let outcome =
            run_generic_attack(&parts.train, &parts.validation, &generic_attack, &train_config)?;
        let poisoned_model = train(&outcome.poisoned_train, &train_config)?;
        records.push(record(
            Scenario::WhiteBox,
            AttackKind::Generic,
            evaluate_model(&poisoned_model, &parts.test, config.fairness_epsilon)?,
        ));
    }
    Ok(records)
}

/// Sweep the poison budget on a fixed dataset. Each run re-draws the
/// surrogate pool and the target split, then mounts white-box and
/// black-box fairness attacks and, optionally, a white-box error-generic
/// baseline. The budget in `attack` is ignored; each swept fraction sets
/// it. A fraction of zero leaves the training set untouched, so clean and
/// poisoned metrics coincide exactly.
pub fn run_fraction_sweep(
    config: &ExperimentConfig,
    data: &SampleSet,
    dataset_name: &str,
    fractions: &[f64],
    runs: usize,
    attack: &AttackConfig,
    include_generic_baseline: bool,
) -> Result<ExperimentReport> {
    config.validate()?;
    attack.validate()?;
    if fractions.is_empty() {
        return Err(Error::InvalidConfig("no poison fractions given".into()));
    }
    if fractions.iter().any(|f| !f.is_finite() || !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidConfig(format!(
            "poison fractions must be in [0, 1], got {fractions:?}"
        )));
    }
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be >= 1".into()));
    }

    let jobs: Vec<(f64, usize)> =
        fractions.iter().flat_map(|&f| (0..runs).map(move |run| (f, run))).collect();
    let outcomes = jobs
        .into_par_iter()
        .map(|(fraction, run)| {
            fraction_run(config, data, dataset_name, fraction, run, attack, include_generic_baseline)
                .map_err(|error| FailureRecord {
                    sweep_value: Some(fraction),
                    run,
                    seed: config.run_seed(run),
                    message: error.to_string(),
                })
        })
        .collect();
    Ok(ExperimentReport::assemble("fraction_sweep", config, runs, BTreeMap::new(), outcomes))
}

fn transfer_run(
    config: &ExperimentConfig,
    data: &SampleSet,
    dataset_name: &str,
    run: usize,
    attack: &AttackConfig,
) -> Result<Vec<RunRecord>> {
    let seed = config.run_seed(run);
    let pool_seed = derive_seed(seed, STREAM_POOL);
    let (pool, rest) = carve(data, config.surrogate_pool_fraction, pool_seed)?;
    let parts = split(&rest, config.split_fractions, derive_seed(seed, STREAM_SPLIT))?;
    let budget = attack.budget.resolve(parts.train.n())?;
    let sweep_value = budget as f64 / parts.train.n() as f64;

    let (attacker_train, attacker_validation) =
        carve(&pool, ATTACKER_TRAIN_SHARE, derive_seed(seed, STREAM_POOL_SPLIT))?;
    let black_attack = AttackConfig {
        budget: Budget::Count(budget),
        seed: derive_seed(seed, STREAM_SURROGATE_ATTACK),
        ..attack.clone()
    };
    let (points, surrogate_spec) = black_box_points(
        &attacker_train,
        &attacker_validation,
        LossKind::Logistic,
        config,
        &black_attack,
        derive_seed(seed, STREAM_SURROGATE_SELECT),
    )?;
    let poisoned_train = poison_into(&parts.train, &points)?;
    let scenario = Scenario::BlackBox { surrogate_spec, surrogate_data_seed: pool_seed };

    let mut records = Vec::with_capacity(6);
    let mut push = |target_model: &str,
                    clean_predictions: Array1<f64>,
                    poisoned_predictions: Array1<f64>|
     -> Result<()> {
        records.push(RunRecord {
            scenario: scenario.clone(),
            dataset: dataset_name.to_string(),
            sweep_value,
            budget,
            run,
            seed,
            attack_kind: AttackKind::Fairness,
            target_model: target_model.to_string(),
            clean: evaluate_predictions(&parts.test, &clean_predictions, config.fairness_epsilon)?,
            poisoned: evaluate_predictions(
                &parts.test,
                &poisoned_predictions,
                config.fairness_epsilon,
            )?,
        });
        Ok(())
    };
    let test_features = parts.test.features();

    let (clean_lr, lr_config) =
        train_selected(&parts.train, LossKind::Logistic, config, derive_seed(seed, STREAM_SELECT))?;
    let poisoned_lr = train(&poisoned_train, &lr_config)?;
    push(
        "logistic_regression",
        predict(&clean_lr, test_features),
        predict(&poisoned_lr, test_features),
    )?;

    let (clean_svm, svm_config) = train_selected(
        &parts.train,
        LossKind::SquaredHinge,
        config,
        derive_seed(seed, STREAM_SELECT_HINGE),
    )?;
    let poisoned_svm = train(&poisoned_train, &svm_config)?;
    push("linear_svm", predict(&clean_svm, test_features), predict(&poisoned_svm, test_features))?;

    let gamma = default_gamma(parts.train.dim());
    let clean_rbf = train_rbf_svm(&parts.train, RBF_REG_C, gamma, RBF_TOLERANCE)?;
    let poisoned_rbf = train_rbf_svm(&poisoned_train, RBF_REG_C, gamma, RBF_TOLERANCE)?;
    push("rbf_svm", clean_rbf.predict(test_features), poisoned_rbf.predict(test_features))?;

    let clean_nb = train_gaussian_nb(&parts.train)?;
    let poisoned_nb = train_gaussian_nb(&poisoned_train)?;
    push("gaussian_nb", clean_nb.predict(test_features), poisoned_nb.predict(test_features))?;

    let clean_tree = train_decision_tree(&parts.train, DEFAULT_TREE_MAX_DEPTH, DEFAULT_TREE_MIN_LEAF)?;
    let poisoned_tree =
        train_decision_tree(&poisoned_train, DEFAULT_TREE_MAX_DEPTH, DEFAULT_TREE_MIN_LEAF)?;
    push("decision_tree", clean_tree.predict(test_features), poisoned_tree.predict(test_features))?;

    let forest_seed = derive_seed(seed, STREAM_FOREST);
    let clean_forest =
        train_random_forest(&parts.train, DEFAULT_FOREST_TREES, FOREST_MAX_DEPTH, None, forest_seed)?;
    let poisoned_forest = train_random_forest(
        &poisoned_train,
        DEFAULT_FOREST_TREES,
        FOREST_MAX_DEPTH,
        None,
        forest_seed,
    )?;
    push(
        "random_forest",
        clean_forest.predict(test_features),
        poisoned_forest.predict(test_features),
    )?;

    Ok(records)
}

/// Measure how points crafted against a logistic-regression surrogate
/// carry over to other families. Each run injects one set of points and
/// trains six targets on the clean and the poisoned data: logistic
/// regression, linear SVM, RBF SVM, Gaussian naive Bayes, a decision tree,
/// and a random forest, all evaluated on the same test samples.
pub fn run_transfer_study(
    config: &ExperimentConfig,
    data: &SampleSet,
    dataset_name: &str,
    runs: usize,
    attack: &AttackConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    attack.validate()?;
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be >= 1".into()));
    }

    let outcomes = (0..runs)
        .into_par_iter()
        .map(|run| {
            transfer_run(config, data, dataset_name, run, attack).map_err(|error| FailureRecord {
                sweep_value: None,
                run,
                seed: config.run_seed(run),
                message: error.to_string(),
            })
        })
        .collect();
    let hyperparameters = BTreeMap::from([
        ("surrogate".to_string(), "logistic regression, cross-validated reg_c".to_string()),
        ("rbf_svm".to_string(), format!("reg_c={RBF_REG_C}, gamma=1/d, tolerance={RBF_TOLERANCE}")),
        (
            "decision_tree".to_string(),
            format!("max_depth={DEFAULT_TREE_MAX_DEPTH}, min_leaf={DEFAULT_TREE_MIN_LEAF}"),
        ),
        (
            "random_forest".to_string(),
            format!("trees={DEFAULT_FOREST_TREES}, max_depth={FOREST_MAX_DEPTH}"),
        ),
    ]);
    Ok(ExperimentReport::assemble("transfer_study", config, runs, hyperparameters, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 7,
            n_samples: 160,
            c_grid: vec![1.0],
            cv_folds: 2,
            ..ExperimentConfig::default()
        }
    }

    fn small_attack() -> AttackConfig {
        AttackConfig {
            max_iterations: 6,
            stop_tolerance: 1e-3,
            ..AttackConfig::new(Budget::Fraction(0.05))
        }
    }

    fn synthetic_fixture(n: usize, seed: u64) -> SampleSet {
        generate_synthetic(&SyntheticConfig::new(n, 4.0, seed)).unwrap()
    }

    fn row_keys(data: &SampleSet) -> HashSet<Vec<u64>> {
        data.features()
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v.to_bits()).collect())
            .collect()
    }

    #[test]
    fn separation_sweep_shape_and_determinism() {
        let config = small_config();
        let attack = small_attack();
        let report = run_separation_sweep(&config, &[2.0, 6.0], 2, &attack).unwrap();

        assert_eq!(report.schema_version, REPORT_SCHEMA_VERSION);
        assert_eq!(report.protocol, "separation_sweep");
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        assert_eq!(report.records.len(), 8);
        assert_eq!(report.aggregates.len(), 4);
        for cell in &report.aggregates {
            assert_eq!(cell.runs, 2);
            assert_eq!(cell.completed, 2);
            assert_eq!(cell.metrics["clean_accuracy"].count, 2);
        }
        let seeds: HashSet<u64> = report.records.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, HashSet::from([7, 8]));

        // Scenarios of one run share the clean model and the test set.
        for pair in report.records.chunks(2) {
            assert_eq!(pair[0].scenario.label(), "white_box");
            assert_eq!(pair[1].scenario.label(), "black_box");
            assert_eq!(pair[0].clean, pair[1].clean);
            assert_eq!(pair[0].budget, pair[1].budget);
            assert!(pair[0].budget > 0);
        }

        let again = run_separation_sweep(&config, &[2.0, 6.0], 2, &attack).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn surrogate_draw_shares_no_rows_with_target() {
        let config = small_config();
        let (target, surrogate, surrogate_seed) = synthetic_pair(&config, 3.0, 0).unwrap();
        assert_ne!(surrogate_seed, config.run_seed(0));
        assert!(row_keys(&target).is_disjoint(&row_keys(&surrogate)));
    }

    #[test]
    fn carve_partitions_without_loss() {
        let data = synthetic_fixture(97, 11);
        let (first, rest) = carve(&data, 0.3, 5).unwrap();
        assert_eq!(first.n(), 29);
        assert_eq!(first.n() + rest.n(), data.n());

        let mut rows: Vec<Vec<u64>> = Vec::new();
        for part in [&first, &rest] {
            for row in part.features().rows() {
                rows.push(row.iter().map(|v| v.to_bits()).collect());
            }
        }
        rows.sort();
        let mut original: Vec<Vec<u64>> = data
            .features()
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|v| v.to_bits()).collect())
            .collect();
        original.sort();
        assert_eq!(rows, original);

        assert!(carve(&data, 0.001, 5).is_err());
        assert!(carve(&data, 0.999, 5).is_err());
    }

    #[test]
    fn zero_fraction_leaves_metrics_unchanged() {
        let config = small_config();
        let data = synthetic_fixture(200, 3);
        let report =
            run_fraction_sweep(&config, &data, "fixture", &[0.0], 1, &small_attack(), false)
                .unwrap();
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        assert_eq!(report.records.len(), 2);
        for record in &report.records {
            assert_eq!(record.budget, 0);
            assert_eq!(record.clean, record.poisoned);
        }
    }

    #[test]
    fn generic_baseline_adds_a_row_per_run() {
        let config = small_config();
        let data = synthetic_fixture(200, 3);
        let attack = small_attack();
        let report =
            run_fraction_sweep(&config, &data, "fixture", &[0.05], 1, &attack, true).unwrap();
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        let kinds: Vec<(&str, AttackKind)> = report
            .records
            .iter()
            .map(|r| (r.scenario.label(), r.attack_kind))
            .collect();
        assert_eq!(
            kinds,
            vec![
                ("white_box", AttackKind::Fairness),
                ("black_box", AttackKind::Fairness),
                ("white_box", AttackKind::Generic),
            ]
        );
        // round(0.05 * round(0.5 * (200 - round(0.3 * 200)))) crafted points.
        assert!(report.records.iter().all(|r| r.budget == 4));

        let without =
            run_fraction_sweep(&config, &data, "fixture", &[0.05], 1, &attack, false).unwrap();
        assert_eq!(without.records.len(), 2);
    }

    #[test]
    fn transfer_study_covers_six_families() {
        let config = small_config();
        let data = synthetic_fixture(240, 9);
        let report = run_transfer_study(&config, &data, "fixture", 1, &small_attack()).unwrap();
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        let names: Vec<&str> = report.records.iter().map(|r| r.target_model.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "logistic_regression",
                "linear_svm",
                "rbf_svm",
                "gaussian_nb",
                "decision_tree",
                "random_forest",
            ]
        );
        assert!(report.records.iter().all(|r| r.scenario.label() == "black_box"));
        assert!(report.records.iter().all(|r| r.budget == report.records[0].budget));
        assert_eq!(report.aggregates.len(), 6);
        assert!(report.hyperparameters.contains_key("surrogate"));
    }

    #[test]
    fn failed_runs_are_recorded_and_excluded() {
        // One negative sample cannot be stratified into two folds, so
        // every run fails at model selection.
        let mut config = small_config();
        config.c_grid = vec![0.5, 1.0];
        let base = synthetic_fixture(80, 2);
        let mut labels = base.labels().clone();
        for v in labels.iter_mut() {
            *v = 1.0;
        }
        labels[0] = -1.0;
        let data = SampleSet::new(
            base.features().clone(),
            labels,
            base.groups().to_vec(),
            base.feature_names().to_vec(),
        )
        .unwrap();

        let report =
            run_fraction_sweep(&config, &data, "fixture", &[0.05], 1, &small_attack(), false)
                .unwrap();
        assert!(report.records.is_empty());
        assert!(report.aggregates.is_empty());
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].run, 0);
        assert_eq!(report.failures[0].sweep_value, Some(0.05));
        assert!(!report.failures[0].message.is_empty());
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let metrics = |accuracy: f64, dp: Option<f64>| MetricsRecord {
            accuracy,
            demographic_parity: dp,
            disparate_impact: None,
            average_odds_difference: None,
            fnr_unprivileged: None,
            fnr_privileged: None,
            fpr_unprivileged: None,
            fpr_privileged: None,
            unfair: dp.map(|v| v < 0.0),
            fairness_epsilon: 0.2,
        };
        let record = |run: usize, model: &str, accuracy: f64, dp: Option<f64>| RunRecord {
            scenario: Scenario::WhiteBox,
            dataset: "hand".into(),
            sweep_value: 1.5,
            budget: 3,
            run,
            seed: run as u64,
            attack_kind: AttackKind::Fairness,
            target_model: model.into(),
            clean: metrics(accuracy, dp),
            poisoned: metrics(accuracy / 2.0, None),
        };
        let records = vec![
            record(0, "a", 0.8, Some(-0.1)),
            record(1, "a", 0.6, None),
            record(0, "b", 1.0, Some(0.25)),
        ];
        let cells = aggregate(&records, 2);
        assert_eq!(cells.len(), 2);

        let a = &cells[0];
        assert_eq!(a.target_model, "a");
        assert_eq!(a.completed, 2);
        assert_eq!(a.runs, 2);
        let accuracy = a.metrics["clean_accuracy"];
        assert!((accuracy.mean - 0.7).abs() < 1e-12);
        assert!((accuracy.std - (0.02f64).sqrt()).abs() < 1e-12);
        assert_eq!(accuracy.count, 2);
        let dp = a.metrics["clean_demographic_parity"];
        assert_eq!(dp.count, 1);
        assert!((dp.mean + 0.1).abs() < 1e-12);
        assert_eq!(dp.std, 0.0);
        assert_eq!(a.metrics["clean_unfair"].count, 1);
        assert!((a.metrics["clean_unfair"].mean - 1.0).abs() < 1e-12);
        // Metrics undefined everywhere are omitted rather than reported
        // as NaN.
        assert!(!a.metrics.contains_key("poisoned_demographic_parity"));

        let b = &cells[1];
        assert_eq!(b.target_model, "b");
        assert_eq!(b.completed, 1);
        assert_eq!(b.metrics["clean_accuracy"].std, 0.0);
    }

    #[test]
    fn report_round_trips_through_json_and_csv() {
        let config = small_config();
        let data = synthetic_fixture(200, 3);
        let report =
            run_fraction_sweep(&config, &data, "fixture, with comma", &[0.0, 0.05], 1, &small_attack(), false)
                .unwrap();

        let json = report.to_json_string().unwrap();
        let parsed: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);

        let csv_text = report.to_csv_string().unwrap();
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let headers = reader.headers().unwrap().clone();
        assert_eq!(headers.len(), 11 + 2 * METRIC_NAMES.len());
        assert_eq!(&headers[0], "schema_version");
        assert_eq!(&headers[11], "clean_accuracy");
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), report.records.len());
        for (row, record) in rows.iter().zip(&report.records) {
            assert_eq!(&row[0], "1");
            assert_eq!(&row[1], "fraction_sweep");
            assert_eq!(&row[4], "fixture, with comma");
            assert_eq!(row[11].parse::<f64>().unwrap(), record.clean.accuracy);
        }
    }

    #[test]
    fn report_files_land_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config();
        let data = synthetic_fixture(200, 3);
        let report =
            run_fraction_sweep(&config, &data, "fixture", &[0.0], 1, &small_attack(), false)
                .unwrap();
        let csv_path = dir.path().join("runs.csv");
        let json_path = dir.path().join("summary.json");
        report.write_csv(&csv_path).unwrap();
        report.write_json(&json_path).unwrap();
        assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), report.to_csv_string().unwrap());
        let parsed: ExperimentReport =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(parsed, report);
    }
}
