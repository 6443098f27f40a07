//! Command-line entry point for the poisoning workflows.
//!
//! Every subcommand reads an optional flat TOML config file, applies flag
//! overrides on top, validates the merged result, and writes its outputs
//! (plus an echo of the effective config) into a run directory. Logs go
//! to stderr; data goes to files and, for `evaluate`, to stdout.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairpoison::Error;
use toml::Value;

use config::Override;

#[derive(Parser)]
#[command(name = "fairpoison", version, about = "Poisoning attacks against fair classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for data generation, splits, and the attack
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (defaults to "<command>-out")
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel runs (defaults to all processors)
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of samples to draw
        #[arg(long)]
        n: Option<usize>,
        /// Gap between the group means; larger is easier to classify
        #[arg(long)]
        separation: Option<f64>,
        /// Rotation of the group axis, in radians
        #[arg(long)]
        rotation: Option<f64>,
    },
    /// Train a linear model and report its fairness metrics
    Train {
        #[command(flatten)]
        common: Common,
        /// Training dataset CSV (synthetic data is drawn when omitted)
        #[arg(long)]
        data: Option<PathBuf>,
        /// Held-out dataset for the reported metrics
        #[arg(long)]
        eval_data: Option<PathBuf>,
        /// Margin loss: "logistic" or "squared_hinge"
        #[arg(long)]
        loss: Option<String>,
        /// Fixed regularization constant (ignored when c_grid is set)
        #[arg(long)]
        reg_c: Option<f64>,
    },
    /// Craft poison points against a training set and retrain on them
    Attack {
        #[command(flatten)]
        common: Common,
        /// Single dataset to split into train/validation/test
        #[arg(long)]
        data: Option<PathBuf>,
        /// Pre-split training CSV (requires --validation-data)
        #[arg(long)]
        train_data: Option<PathBuf>,
        /// Pre-split validation CSV (requires --train-data)
        #[arg(long)]
        validation_data: Option<PathBuf>,
        /// Poison budget as a fraction of the training set
        #[arg(long, conflicts_with = "budget_count")]
        budget_fraction: Option<f64>,
        /// Poison budget as an absolute number of points
        #[arg(long)]
        budget_count: Option<usize>,
        /// Initial gradient-ascent step size in standardized space
        #[arg(long)]
        step_size: Option<f64>,
        /// Craft error-generic points (accuracy attack) instead of
        /// fairness-targeted ones
        #[arg(long)]
        generic: bool,
    },
    /// Compute fairness metrics for a stored model on a dataset
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV to evaluate on
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model JSON written by `train` or `attack`
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run a multi-seed study and write per-run and aggregate reports
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Study axis: "separation", "fraction", or "transfer"
        #[arg(long)]
        sweep: Option<String>,
        /// Repetitions per sweep point
        #[arg(long)]
        runs: Option<usize>,
        /// Fixed dataset CSV (fraction and transfer sweeps; synthetic
        /// data is drawn when omitted)
        #[arg(long)]
        data: Option<PathBuf>,
        /// Number of synthetic samples when no dataset is given
        #[arg(long)]
        n: Option<usize>,
        /// Add an error-generic baseline to the fraction sweep
        #[arg(long)]
        include_generic: bool,
    },
}

fn path_value(path: &Option<PathBuf>) -> Option<Value> {
    path.as_ref().map(|p| Value::String(p.display().to_string()))
}

fn common_overrides(common: &Common) -> Vec<Override> {
    vec![
        ("seed", common.seed.map(|v| Value::Integer(v as i64))),
        ("jobs", common.jobs.map(|v| Value::Integer(v as i64))),
    ]
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Train { .. } => "train",
            Command::Attack { .. } => "attack",
            Command::Evaluate { .. } => "evaluate",
            Command::Experiment { .. } => "experiment",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Generate { common, .. }
            | Command::Train { common, .. }
            | Command::Attack { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Experiment { common, .. } => common,
        }
    }

    /// Flag values as config overrides; absent flags leave the config
    /// file (or defaults) in charge.
    fn overrides(&self) -> Vec<Override> {
        let mut overrides = common_overrides(self.common());
        match self {
            Command::Generate { n, separation, rotation, .. } => {
                overrides.push(("n_samples", n.map(|v| Value::Integer(v as i64))));
                overrides.push(("separation", separation.map(Value::Float)));
                overrides.push(("rotation", rotation.map(Value::Float)));
            }
            Command::Train { data, eval_data, loss, reg_c, .. } => {
                overrides.push(("data", path_value(data)));
                overrides.push(("eval_data", path_value(eval_data)));
                overrides.push(("loss", loss.clone().map(Value::String)));
                overrides.push(("reg_c", reg_c.map(Value::Float)));
            }
            Command::Attack {
                data,
                train_data,
                validation_data,
                budget_fraction,
                budget_count,
                step_size,
                generic,
                ..
            } => {
                overrides.push(("data", path_value(data)));
                overrides.push(("train_data", path_value(train_data)));
                overrides.push(("validation_data", path_value(validation_data)));
                overrides.push(("budget_fraction", budget_fraction.map(Value::Float)));
                overrides.push(("budget_count", budget_count.map(|v| Value::Integer(v as i64))));
                overrides.push(("step_size", step_size.map(Value::Float)));
                overrides.push(("generic", generic.then_some(Value::Boolean(true))));
            }
            Command::Evaluate { data, model, .. } => {
                overrides.push(("data", path_value(data)));
                overrides.push(("model", path_value(model)));
            }
            Command::Experiment { sweep, runs, data, n, include_generic, .. } => {
                overrides.push(("sweep", sweep.clone().map(Value::String)));
                overrides.push(("runs", runs.map(|v| Value::Integer(v as i64))));
                overrides.push(("data", path_value(data)));
                overrides.push(("n_samples", n.map(|v| Value::Integer(v as i64))));
                overrides
                    .push(("include_generic", include_generic.then_some(Value::Boolean(true))));
            }
        }
        overrides
    }
}

/// Exit codes by failure class: 2 bad config or flags, 3 filesystem,
/// 4 malformed or unusable data, 5 solver breakdown.
fn exit_code(error: &Error) -> u8 {
    match error {
        Error::InvalidConfig(_) => 2,
        Error::Io(_) | Error::EmptyFile { .. } => 3,
        Error::Csv(inner) if matches!(inner.kind(), csv::ErrorKind::Io(_)) => 3,
        Error::InvalidData(_)
        | Error::MissingColumn { .. }
        | Error::NonNumericCell { .. }
        | Error::UngroupedSample { .. }
        | Error::SingleClass
        | Error::MissingGroup(_)
        | Error::DimensionMismatch { .. }
        | Error::Stratification { .. }
        | Error::Csv(_)
        | Error::Json(_) => 4,
        Error::NonConvergence { .. } | Error::SingularHessian => 5,
    }
}

fn run(command: &Command) -> fairpoison::Result<()> {
    let common = command.common();
    let config = config::resolve(common.config.as_deref(), command.overrides())?;

    let threads = config.jobs.unwrap_or_else(num_threads);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool setup failed: {e}")))?;

    let out_dir = common
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}-out", command.name())));

    match command {
        Command::Generate { .. } => commands::generate(&config, &out_dir),
        Command::Train { .. } => commands::train_command(&config, &out_dir),
        Command::Attack { .. } => commands::attack(&config, &out_dir),
        Command::Evaluate { .. } => commands::evaluate(&config, &out_dir),
        Command::Experiment { .. } => commands::experiment(&config, &out_dir),
    }
}

fn num_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            log::error!("{error}");
            ExitCode::from(exit_code(&error))
        }
    }
}
