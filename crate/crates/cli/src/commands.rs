//! The five subcommand workflows. Every command validates its inputs,
//! creates the output directory, echoes the effective configuration into
//! it, and writes deterministic artifacts.

use std::path::{Path, PathBuf};

use fairpoison::data::write_csv;
use fairpoison::{
    evaluate_model, evaluate_predictions, generate_synthetic, load_csv, run_attack,
    run_fraction_sweep, run_generic_attack, run_separation_sweep, run_transfer_study, select_c,
    split, train, AttackConfig, AttackOutcome, BoundsMode, DataSplit, Error, ExperimentConfig,
    ExperimentReport, LinearModel, MetricsRecord, PoisonPoint, Result, SampleSet, SyntheticConfig,
    TargetModel, TrainConfig,
};
use log::{info, warn};

use crate::config::{RunConfig, SweepKind};

/// Create the output directory and drop the effective config into it.
fn prepare_out_dir(out_dir: &Path, config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.toml"), config.effective_toml())?;
    Ok(())
}

fn write_text(path: PathBuf, mut body: String) -> Result<()> {
    if !body.ends_with('\n') {
        body.push('\n');
    }
    info!("writing {}", path.display());
    Ok(std::fs::write(path, body)?)
}

fn write_json(path: PathBuf, value: &impl serde::Serialize) -> Result<()> {
    write_text(path, serde_json::to_string_pretty(value)?)
}

fn synthetic_config(config: &RunConfig) -> SyntheticConfig {
    SyntheticConfig {
        n_samples: config.n_samples,
        separation: config.separation,
        rotation: config.rotation,
        seed: config.seed,
    }
}

fn load_dataset(config: &RunConfig, path: &Path) -> Result<SampleSet> {
    let data = load_csv(
        path,
        &config.label_column,
        &config.sensitive_column,
        &config.favorable_value,
        &config.privileged_value,
    )?;
    info!("loaded {} samples x {} features from {}", data.n(), data.dim(), path.display());
    Ok(data)
}

/// The dataset named by `data`, or a synthetic draw written to the output
/// directory so the run stays reproducible from its artifacts.
fn obtain_dataset(config: &RunConfig, out_dir: &Path) -> Result<SampleSet> {
    match &config.data {
        Some(path) => load_dataset(config, path),
        None => {
            let data = generate_synthetic(&synthetic_config(config))?;
            info!(
                "no dataset given; generated {} synthetic samples (separation {})",
                data.n(),
                config.separation
            );
            write_csv(&data, out_dir.join("data.csv"))?;
            Ok(data)
        }
    }
}

/// Pick the regularization constant (cross-validated when a grid is
/// configured) and assemble the trainer.
fn resolve_trainer(config: &RunConfig, data: &SampleSet) -> Result<TrainConfig> {
    let reg_c = if config.c_grid.is_empty() {
        config.reg_c
    } else {
        let reg = select_c(data, config.loss_kind, &config.c_grid, config.cv_folds, config.seed)?;
        info!("cross-validation selected reg_c = {}", reg.chosen);
        reg.chosen
    };
    Ok(TrainConfig {
        loss_kind: config.loss_kind,
        reg_c,
        tolerance: config.solver_tolerance,
        max_iterations: config.solver_max_iterations,
    })
}

fn attack_config(config: &RunConfig) -> AttackConfig {
    let bounds = match (&config.bounds_lower, &config.bounds_upper) {
        (Some(lower), Some(upper)) => {
            BoundsMode::Fixed { lower: lower.clone(), upper: upper.clone() }
        }
        _ => BoundsMode::TrainMinMax,
    };
    AttackConfig {
        budget: config.budget(),
        step_size: config.step_size,
        stop_tolerance: config.stop_tolerance,
        max_iterations: config.attack_max_iterations,
        bounds,
        lambda: config.lambda,
        seed: config.seed,
    }
}

fn experiment_config(config: &RunConfig) -> ExperimentConfig {
    let test_fraction = 1.0 - config.train_fraction - config.validation_fraction;
    ExperimentConfig {
        master_seed: config.seed,
        n_samples: config.n_samples,
        loss_kind: config.loss_kind,
        c_grid: if config.c_grid.is_empty() { vec![config.reg_c] } else { config.c_grid.clone() },
        cv_folds: config.cv_folds,
        split_fractions: (config.train_fraction, config.validation_fraction, test_fraction),
        fairness_epsilon: config.fairness_epsilon,
        surrogate_pool_fraction: config.surrogate_pool_fraction,
    }
}

pub fn generate(config: &RunConfig, out_dir: &Path) -> Result<()> {
    prepare_out_dir(out_dir, config)?;
    let data = generate_synthetic(&synthetic_config(config))?;
    write_csv(&data, out_dir.join("data.csv"))?;
    info!("wrote {} samples to {}", data.n(), out_dir.join("data.csv").display());
    Ok(())
}

pub fn train_command(config: &RunConfig, out_dir: &Path) -> Result<()> {
    prepare_out_dir(out_dir, config)?;
    let data = obtain_dataset(config, out_dir)?;
    let trainer = resolve_trainer(config, &data)?;
    let model = train(&data, &trainer)?;
    write_text(out_dir.join("model.json"), model.to_json())?;

    let metrics = match &config.eval_data {
        Some(path) => evaluate_model(&model, &load_dataset(config, path)?, config.fairness_epsilon)?,
        None => evaluate_model(&model, &data, config.fairness_epsilon)?,
    };
    info!("accuracy {:.4}, disparate impact {:?}", metrics.accuracy, metrics.disparate_impact);
    write_json(out_dir.join("metrics.json"), &metrics)
}

/// Poison-point rows in the dataset CSV layout: feature columns, `label`,
/// and an untagged `group`, so the file can be loaded back or appended to
/// the training CSV directly.
fn write_poison_points(
    path: PathBuf,
    points: &[PoisonPoint],
    feature_names: &[String],
) -> Result<()> {
    info!("writing {}", path.display());
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = feature_names.to_vec();
    header.push("label".into());
    header.push("group".into());
    writer.write_record(&header)?;
    for point in points {
        let mut record: Vec<String> = point.features.iter().map(|v| format!("{v}")).collect();
        record.push(format!("{}", point.label as i64));
        record.push("none".into());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Training and validation sets for the attack, either from explicit
/// files or by splitting one dataset; the split leaves a test set for
/// before/after metrics.
fn attack_inputs(config: &RunConfig, out_dir: &Path) -> Result<(SampleSet, SampleSet, Option<SampleSet>)> {
    match (&config.train_data, &config.validation_data) {
        (Some(train_path), Some(validation_path)) => {
            if config.data.is_some() {
                return Err(Error::InvalidConfig(
                    "'data' conflicts with 'train_data'/'validation_data'; give one or the other"
                        .into(),
                ));
            }
            Ok((load_dataset(config, train_path)?, load_dataset(config, validation_path)?, None))
        }
        (None, None) => {
            let data = obtain_dataset(config, out_dir)?;
            let test_fraction = 1.0 - config.train_fraction - config.validation_fraction;
            let parts = split(
                &data,
                (config.train_fraction, config.validation_fraction, test_fraction),
                config.seed,
            )?;
            write_csv(&parts.train, out_dir.join("train.csv"))?;
            write_csv(&parts.validation, out_dir.join("validation.csv"))?;
            write_csv(&parts.test, out_dir.join("test.csv"))?;
            let DataSplit { train, validation, test } = parts;
            Ok((train, validation, Some(test)))
        }
        _ => Err(Error::InvalidConfig(
            "'train_data' and 'validation_data' must be given together".into(),
        )),
    }
}

pub fn attack(config: &RunConfig, out_dir: &Path) -> Result<()> {
    prepare_out_dir(out_dir, config)?;
    let (train_set, validation, test) = attack_inputs(config, out_dir)?;
    let trainer = resolve_trainer(config, &train_set)?;
    let attack = attack_config(config);

    let clean_model = train(&train_set, &trainer)?;
    write_text(out_dir.join("clean_model.json"), clean_model.to_json())?;

    let outcome: AttackOutcome = if config.generic {
        info!("crafting error-generic baseline points");
        run_generic_attack(&train_set, &validation, &attack, &trainer)?
    } else {
        run_attack(&train_set, &validation, &attack, &trainer)?
    };
    info!(
        "crafted {} poison points (lambda = {})",
        outcome.poison_points.len(),
        outcome.lambda
    );

    write_poison_points(
        out_dir.join("poison_points.csv"),
        &outcome.poison_points,
        train_set.feature_names(),
    )?;
    let trace_path = out_dir.join("attack_trace.csv");
    info!("writing {}", trace_path.display());
    let mut trace = csv::Writer::from_path(trace_path)?;
    for record in &outcome.trace {
        trace.serialize(record)?;
    }
    trace.flush()?;

    let poisoned_model = train(&outcome.poisoned_train, &trainer)?;
    write_text(out_dir.join("poisoned_model.json"), poisoned_model.to_json())?;

    if let Some(test) = test {
        let clean = evaluate_model(&clean_model, &test, config.fairness_epsilon)?;
        let poisoned = evaluate_model(&poisoned_model, &test, config.fairness_epsilon)?;
        info!(
            "test accuracy {:.4} -> {:.4}, disparate impact {:?} -> {:?}",
            clean.accuracy, poisoned.accuracy, clean.disparate_impact, poisoned.disparate_impact
        );
        write_json(out_dir.join("clean_metrics.json"), &clean)?;
        write_json(out_dir.join("poisoned_metrics.json"), &poisoned)?;
    }
    Ok(())
}

/// A stored model of either kind: a linear model or a transfer target.
enum StoredModel {
    Linear(LinearModel),
    Target(TargetModel),
}

fn read_model(path: &Path) -> Result<StoredModel> {
    let text = std::fs::read_to_string(path)?;
    match LinearModel::from_json(&text) {
        Ok(model) => Ok(StoredModel::Linear(model)),
        Err(linear_error) => match TargetModel::from_json(&text) {
            Ok(model) => Ok(StoredModel::Target(model)),
            Err(target_error) => Err(Error::InvalidData(format!(
                "{} is neither a linear model ({linear_error}) nor a transfer target \
                 ({target_error})",
                path.display()
            ))),
        },
    }
}

pub fn evaluate(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let data_path = config.data.as_ref().ok_or_else(|| {
        Error::InvalidConfig("'data' is required: give --data or set it in the config".into())
    })?;
    let model_path = config.model.as_ref().ok_or_else(|| {
        Error::InvalidConfig("'model' is required: give --model or set it in the config".into())
    })?;
    prepare_out_dir(out_dir, config)?;
    let data = load_dataset(config, data_path)?;
    let metrics: MetricsRecord = match read_model(model_path)? {
        StoredModel::Linear(model) => evaluate_model(&model, &data, config.fairness_epsilon)?,
        StoredModel::Target(model) => {
            evaluate_predictions(&data, &model.predict(data.features()), config.fairness_epsilon)?
        }
    };
    let body = serde_json::to_string_pretty(&metrics)?;
    println!("{body}");
    write_json(out_dir.join("metrics.json"), &metrics)
}

pub fn experiment(config: &RunConfig, out_dir: &Path) -> Result<()> {
    prepare_out_dir(out_dir, config)?;
    let experiment_config = experiment_config(config);
    let attack = attack_config(config);

    let report: ExperimentReport = match config.sweep {
        SweepKind::Separation => {
            let runs = config.runs.unwrap_or(10);
            info!(
                "separation sweep over {:?}, {} runs each",
                config.separations, runs
            );
            run_separation_sweep(&experiment_config, &config.separations, runs, &attack)?
        }
        SweepKind::Fraction => {
            let runs = config.runs.unwrap_or(10);
            let (data, name) = experiment_dataset(config, out_dir)?;
            info!("fraction sweep over {:?}, {} runs each", config.fractions, runs);
            run_fraction_sweep(
                &experiment_config,
                &data,
                &name,
                &config.fractions,
                runs,
                &attack,
                config.include_generic,
            )?
        }
        SweepKind::Transfer => {
            let runs = config.runs.unwrap_or(5);
            let (data, name) = experiment_dataset(config, out_dir)?;
            info!("transfer study, {} runs", runs);
            run_transfer_study(&experiment_config, &data, &name, runs, &attack)?
        }
    };

    for failure in &report.failures {
        warn!(
            "run {} (sweep value {:?}) failed: {}",
            failure.run, failure.sweep_value, failure.message
        );
    }
    if !report.failures.is_empty() {
        warn!("{} of the runs failed and are excluded from aggregates", report.failures.len());
    }
    info!(
        "{} run records, {} aggregate cells",
        report.records.len(),
        report.aggregates.len()
    );
    report.write_csv(out_dir.join("report.csv"))?;
    report.write_json(out_dir.join("report.json"))?;
    info!("report written to {}", out_dir.display());
    Ok(())
}

fn experiment_dataset(config: &RunConfig, out_dir: &Path) -> Result<(SampleSet, String)> {
    let name = match &config.data {
        Some(path) => path.display().to_string(),
        None => format!("synthetic(n={}, separation={})", config.n_samples, config.separation),
    };
    Ok((obtain_dataset(config, out_dir)?, name))
}
