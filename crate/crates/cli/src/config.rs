//! Flat key = value configuration shared by every subcommand.
//!
//! Values come from an optional TOML config file, overridden by command
//! line flags. Resolution collects every problem before failing: unknown
//! keys, type mismatches, and violated value constraints are reported
//! together in one error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fairpoison::{Budget, Error, LambdaPolicy, LossKind, Result};
use toml::Value;

/// Which study the `experiment` subcommand runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Separation,
    Fraction,
    Transfer,
}

impl SweepKind {
    pub fn label(&self) -> &'static str {
        match self {
            SweepKind::Separation => "separation",
            SweepKind::Fraction => "fraction",
            SweepKind::Transfer => "transfer",
        }
    }
}

/// Every knob the subcommands read, after defaults, file values, and flag
/// overrides are merged.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n_samples: usize,
    pub separation: f64,
    pub rotation: f64,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub validation_data: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub label_column: String,
    pub sensitive_column: String,
    pub favorable_value: String,
    pub privileged_value: String,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub loss_kind: LossKind,
    pub reg_c: f64,
    /// Regularization grid; empty means train at `reg_c` without
    /// cross-validation.
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    pub budget_fraction: Option<f64>,
    pub budget_count: Option<usize>,
    pub step_size: f64,
    pub stop_tolerance: f64,
    pub attack_max_iterations: usize,
    pub lambda: LambdaPolicy,
    pub bounds_lower: Option<Vec<f64>>,
    pub bounds_upper: Option<Vec<f64>>,
    /// Craft against the plain held-out loss instead of the fairness
    /// objective.
    pub generic: bool,
    pub fairness_epsilon: f64,
    pub sweep: SweepKind,
    pub separations: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Repetitions per sweep point; the subcommand picks its default.
    pub runs: Option<usize>,
    pub include_generic: bool,
    pub surrogate_pool_fraction: f64,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn budget(&self) -> Budget {
        match (self.budget_fraction, self.budget_count) {
            (_, Some(count)) => Budget::Count(count),
            (Some(fraction), None) => Budget::Fraction(fraction),
            (None, None) => Budget::Fraction(0.05),
        }
    }

    /// Serialize the effective configuration as a flat TOML document that
    /// [`resolve`] accepts back unchanged. Keys are sorted, so reruns
    /// produce byte-identical files.
    pub fn effective_toml(&self) -> String {
        let mut map: BTreeMap<&'static str, Value> = BTreeMap::new();
        let mut put = |key: &'static str, value: Value| {
            map.insert(key, value);
        };
        put("n_samples", Value::Integer(self.n_samples as i64));
        put("separation", Value::Float(self.separation));
        put("rotation", Value::Float(self.rotation));
        put("seed", Value::Integer(self.seed as i64));
        if let Some(path) = &self.data {
            put("data", Value::String(path.display().to_string()));
        }
        if let Some(path) = &self.train_data {
            put("train_data", Value::String(path.display().to_string()));
        }
        if let Some(path) = &self.validation_data {
            put("validation_data", Value::String(path.display().to_string()));
        }
        if let Some(path) = &self.eval_data {
            put("eval_data", Value::String(path.display().to_string()));
        }
        if let Some(path) = &self.model {
            put("model", Value::String(path.display().to_string()));
        }
        put("label_column", Value::String(self.label_column.clone()));
        put("sensitive_column", Value::String(self.sensitive_column.clone()));
        put("favorable_value", Value::String(self.favorable_value.clone()));
        put("privileged_value", Value::String(self.privileged_value.clone()));
        put("train_fraction", Value::Float(self.train_fraction));
        put("validation_fraction", Value::Float(self.validation_fraction));
        put(
            "loss_kind",
            Value::String(
                match self.loss_kind {
                    LossKind::Logistic => "logistic",
                    LossKind::SquaredHinge => "squared_hinge",
                }
                .to_string(),
            ),
        );
        put("reg_c", Value::Float(self.reg_c));
        put("c_grid", float_array(&self.c_grid));
        put("cv_folds", Value::Integer(self.cv_folds as i64));
        put("solver_tolerance", Value::Float(self.solver_tolerance));
        put("solver_max_iterations", Value::Integer(self.solver_max_iterations as i64));
        if let Some(fraction) = self.budget_fraction {
            put("budget_fraction", Value::Float(fraction));
        }
        if let Some(count) = self.budget_count {
            put("budget_count", Value::Integer(count as i64));
        }
        put("step_size", Value::Float(self.step_size));
        put("stop_tolerance", Value::Float(self.stop_tolerance));
        put("attack_max_iterations", Value::Integer(self.attack_max_iterations as i64));
        put(
            "lambda",
            match self.lambda {
                LambdaPolicy::PriorsRatio => Value::String("priors_ratio".into()),
                LambdaPolicy::Fixed(value) => Value::Float(value),
            },
        );
        if let Some(lower) = &self.bounds_lower {
            put("bounds_lower", float_array(lower));
        }
        if let Some(upper) = &self.bounds_upper {
            put("bounds_upper", float_array(upper));
        }
        put("generic", Value::Boolean(self.generic));
        put("fairness_epsilon", Value::Float(self.fairness_epsilon));
        put("sweep", Value::String(self.sweep.label().to_string()));
        put("separations", float_array(&self.separations));
        put("fractions", float_array(&self.fractions));
        if let Some(runs) = self.runs {
            put("runs", Value::Integer(runs as i64));
        }
        put("include_generic", Value::Boolean(self.include_generic));
        put("surrogate_pool_fraction", Value::Float(self.surrogate_pool_fraction));
        if let Some(jobs) = self.jobs {
            put("jobs", Value::Integer(jobs as i64));
        }
        toml::to_string(&map).expect("flat scalar map serializes")
    }
}

fn float_array(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| Value::Float(v)).collect())
}

/// One flag override; `None` values leave the file/default value alone.
pub type Override = (&'static str, Option<Value>);

/// Merge defaults, the optional config file, and flag overrides into a
/// validated [`RunConfig`]. Every problem is reported at once.
pub fn resolve(file: Option<&Path>, overrides: Vec<Override>) -> Result<RunConfig> {
    let mut values: BTreeMap<String, Value> = BTreeMap::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        let table: toml::Table = text.parse().map_err(|e| {
            Error::InvalidConfig(format!("{}: {e}", path.display()))
        })?;
        for (key, value) in table {
            if matches!(value, Value::Table(_)) {
                return Err(Error::InvalidConfig(format!(
                    "{}: config must be flat, but '{key}' is a table",
                    path.display()
                )));
            }
            values.insert(key, value);
        }
    }
    for (key, value) in overrides {
        if let Some(value) = value {
            values.insert(key.to_string(), value);
        }
    }

    let mut bag = Bag { values, problems: Vec::new() };
    let config = extract(&mut bag);
    for key in bag.values.keys() {
        bag.problems.push(format!("unknown config key '{key}'"));
    }
    if bag.problems.is_empty() {
        Ok(config)
    } else {
        Err(Error::InvalidConfig(bag.problems.join("; ")))
    }
}

struct Bag {
    values: BTreeMap<String, Value>,
    problems: Vec<String>,
}

impl Bag {
    fn problem(&mut self, message: String) {
        self.problems.push(message);
    }

    fn take_f64(&mut self, key: &str, default: f64) -> f64 {
        match self.values.remove(key) {
            None => default,
            Some(Value::Float(v)) => v,
            Some(Value::Integer(v)) => v as f64,
            Some(other) => {
                self.problem(format!("'{key}' must be a number, got {other}"));
                default
            }
        }
    }

    fn take_usize(&mut self, key: &str, default: usize) -> usize {
        match self.values.remove(key) {
            None => default,
            Some(Value::Integer(v)) if v >= 0 => v as usize,
            Some(other) => {
                self.problem(format!("'{key}' must be a non-negative integer, got {other}"));
                default
            }
        }
    }

    fn take_opt_usize(&mut self, key: &str) -> Option<usize> {
        match self.values.remove(key) {
            None => None,
            Some(Value::Integer(v)) if v >= 0 => Some(v as usize),
            Some(other) => {
                self.problem(format!("'{key}' must be a non-negative integer, got {other}"));
                None
            }
        }
    }

    fn take_opt_f64(&mut self, key: &str) -> Option<f64> {
        match self.values.remove(key) {
            None => None,
            Some(Value::Float(v)) => Some(v),
            Some(Value::Integer(v)) => Some(v as f64),
            Some(other) => {
                self.problem(format!("'{key}' must be a number, got {other}"));
                None
            }
        }
    }

    fn take_u64(&mut self, key: &str, default: u64) -> u64 {
        match self.values.remove(key) {
            None => default,
            Some(Value::Integer(v)) if v >= 0 => v as u64,
            Some(other) => {
                self.problem(format!("'{key}' must be a non-negative integer, got {other}"));
                default
            }
        }
    }

    fn take_string(&mut self, key: &str, default: &str) -> String {
        match self.values.remove(key) {
            None => default.to_string(),
            Some(Value::String(v)) => v,
            Some(other) => {
                self.problem(format!("'{key}' must be a string, got {other}"));
                default.to_string()
            }
        }
    }

    fn take_opt_path(&mut self, key: &str) -> Option<PathBuf> {
        match self.values.remove(key) {
            None => None,
            Some(Value::String(v)) => Some(PathBuf::from(v)),
            Some(other) => {
                self.problem(format!("'{key}' must be a path string, got {other}"));
                None
            }
        }
    }

    fn take_bool(&mut self, key: &str, default: bool) -> bool {
        match self.values.remove(key) {
            None => default,
            Some(Value::Boolean(v)) => v,
            Some(other) => {
                self.problem(format!("'{key}' must be a boolean, got {other}"));
                default
            }
        }
    }

    fn take_floats(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.values.remove(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(v) => out.push(v),
                        Value::Integer(v) => out.push(v as f64),
                        other => {
                            self.problem(format!(
                                "'{key}' must contain only numbers, got {other}"
                            ));
                            return default.to_vec();
                        }
                    }
                }
                out
            }
            Some(other) => {
                self.problem(format!("'{key}' must be an array of numbers, got {other}"));
                default.to_vec()
            }
        }
    }

    fn take_opt_floats(&mut self, key: &str) -> Option<Vec<f64>> {
        if self.values.contains_key(key) {
            Some(self.take_floats(key, &[]))
        } else {
            None
        }
    }
}

fn extract(bag: &mut Bag) -> RunConfig {
    let loss_kind = match bag.take_string("loss_kind", "logistic").as_str() {
        "logistic" => LossKind::Logistic,
        "squared_hinge" => LossKind::SquaredHinge,
        other => {
            bag.problem(format!(
                "'loss_kind' must be 'logistic' or 'squared_hinge', got '{other}'"
            ));
            LossKind::Logistic
        }
    };
    let lambda = match bag.values.remove("lambda") {
        None => LambdaPolicy::PriorsRatio,
        Some(Value::String(s)) if s == "priors_ratio" => LambdaPolicy::PriorsRatio,
        Some(Value::Float(v)) => LambdaPolicy::Fixed(v),
        Some(Value::Integer(v)) => LambdaPolicy::Fixed(v as f64),
        Some(other) => {
            bag.problem(format!(
                "'lambda' must be 'priors_ratio' or a number, got {other}"
            ));
            LambdaPolicy::PriorsRatio
        }
    };
    let sweep = match bag.take_string("sweep", "separation").as_str() {
        "separation" => SweepKind::Separation,
        "fraction" => SweepKind::Fraction,
        "transfer" => SweepKind::Transfer,
        other => {
            bag.problem(format!(
                "'sweep' must be 'separation', 'fraction', or 'transfer', got '{other}'"
            ));
            SweepKind::Separation
        }
    };

    let config = RunConfig {
        n_samples: bag.take_usize("n_samples", 2000),
        separation: bag.take_f64("separation", 5.0),
        rotation: bag.take_f64("rotation", fairpoison::DEFAULT_ROTATION),
        seed: bag.take_u64("seed", 0),
        data: bag.take_opt_path("data"),
        train_data: bag.take_opt_path("train_data"),
        validation_data: bag.take_opt_path("validation_data"),
        eval_data: bag.take_opt_path("eval_data"),
        model: bag.take_opt_path("model"),
        label_column: bag.take_string("label_column", "label"),
        sensitive_column: bag.take_string("sensitive_column", "group"),
        favorable_value: bag.take_string("favorable_value", "1"),
        privileged_value: bag.take_string("privileged_value", "privileged"),
        train_fraction: bag.take_f64("train_fraction", 0.5),
        validation_fraction: bag.take_f64("validation_fraction", 0.3),
        loss_kind,
        reg_c: bag.take_f64("reg_c", 1.0),
        c_grid: bag.take_floats("c_grid", &[]),
        cv_folds: bag.take_usize("cv_folds", 5),
        solver_tolerance: bag.take_f64("solver_tolerance", 1e-8),
        solver_max_iterations: bag.take_usize("solver_max_iterations", 1000),
        budget_fraction: bag.take_opt_f64("budget_fraction"),
        budget_count: bag.take_opt_usize("budget_count"),
        step_size: bag.take_f64("step_size", 0.1),
        stop_tolerance: bag.take_f64("stop_tolerance", 1e-5),
        attack_max_iterations: bag.take_usize("attack_max_iterations", 100),
        lambda,
        bounds_lower: bag.take_opt_floats("bounds_lower"),
        bounds_upper: bag.take_opt_floats("bounds_upper"),
        generic: bag.take_bool("generic", false),
        fairness_epsilon: bag.take_f64("fairness_epsilon", 0.2),
        sweep,
        separations: bag.take_floats("separations", &[1.0, 3.0, 5.0, 7.0, 9.0]),
        fractions: bag.take_floats("fractions", &[0.0, 0.05, 0.1, 0.15, 0.2]),
        runs: bag.take_opt_usize("runs"),
        include_generic: bag.take_bool("include_generic", false),
        surrogate_pool_fraction: bag.take_f64("surrogate_pool_fraction", 0.3),
        jobs: bag.take_opt_usize("jobs"),
    };
    validate(&config, bag);
    config
}

fn validate(config: &RunConfig, bag: &mut Bag) {
    if config.n_samples < 4 {
        bag.problem(format!("'n_samples' must be >= 4, got {}", config.n_samples));
    }
    if config.seed > i64::MAX as u64 {
        bag.problem(format!("'seed' must fit a TOML integer, got {}", config.seed));
    }
    for (key, value) in [
        ("train_fraction", config.train_fraction),
        ("validation_fraction", config.validation_fraction),
    ] {
        if !value.is_finite() || value <= 0.0 || value >= 1.0 {
            bag.problem(format!("'{key}' must be in (0, 1), got {value}"));
        }
    }
    if config.train_fraction + config.validation_fraction >= 1.0 {
        bag.problem(format!(
            "'train_fraction' + 'validation_fraction' must leave room for a test set, got {}",
            config.train_fraction + config.validation_fraction
        ));
    }
    if !config.reg_c.is_finite() || config.reg_c <= 0.0 {
        bag.problem(format!("'reg_c' must be > 0, got {}", config.reg_c));
    }
    if config.c_grid.iter().any(|c| !c.is_finite() || *c <= 0.0) {
        bag.problem(format!("'c_grid' entries must be > 0, got {:?}", config.c_grid));
    }
    if config.c_grid.len() > 1 && config.cv_folds < 2 {
        bag.problem(format!(
            "'cv_folds' must be >= 2 to cross-validate, got {}",
            config.cv_folds
        ));
    }
    if !config.solver_tolerance.is_finite() || config.solver_tolerance <= 0.0 {
        bag.problem(format!(
            "'solver_tolerance' must be > 0, got {}",
            config.solver_tolerance
        ));
    }
    if config.solver_max_iterations == 0 {
        bag.problem("'solver_max_iterations' must be >= 1".into());
    }
    if config.budget_fraction.is_some() && config.budget_count.is_some() {
        bag.problem("'budget_fraction' and 'budget_count' are mutually exclusive".into());
    }
    if let Some(fraction) = config.budget_fraction {
        if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
            bag.problem(format!("'budget_fraction' must be in [0, 1], got {fraction}"));
        }
    }
    if !config.step_size.is_finite() || config.step_size <= 0.0 {
        bag.problem(format!("'step_size' must be > 0, got {}", config.step_size));
    }
    if !config.stop_tolerance.is_finite() || config.stop_tolerance < 0.0 {
        bag.problem(format!("'stop_tolerance' must be >= 0, got {}", config.stop_tolerance));
    }
    if config.attack_max_iterations == 0 {
        bag.problem("'attack_max_iterations' must be >= 1".into());
    }
    if let LambdaPolicy::Fixed(value) = config.lambda {
        if !value.is_finite() || value < 0.0 {
            bag.problem(format!("'lambda' must be >= 0, got {value}"));
        }
    }
    match (&config.bounds_lower, &config.bounds_upper) {
        (Some(lower), Some(upper)) if lower.len() != upper.len() => {
            bag.problem(format!(
                "'bounds_lower' and 'bounds_upper' must have equal lengths, got {} and {}",
                lower.len(),
                upper.len()
            ));
        }
        (Some(_), None) | (None, Some(_)) => {
            bag.problem("'bounds_lower' and 'bounds_upper' must be given together".into());
        }
        _ => {}
    }
    if !(0.0..1.0).contains(&config.fairness_epsilon) {
        bag.problem(format!(
            "'fairness_epsilon' must be in [0, 1), got {}",
            config.fairness_epsilon
        ));
    }
    if config.separations.is_empty() {
        bag.problem("'separations' must not be empty".into());
    }
    if config.separations.iter().any(|s| !s.is_finite() || *s < 0.0) {
        bag.problem(format!(
            "'separations' entries must be >= 0, got {:?}",
            config.separations
        ));
    }
    if config.fractions.is_empty() {
        bag.problem("'fractions' must not be empty".into());
    }
    if config.fractions.iter().any(|f| !f.is_finite() || !(0.0..=1.0).contains(f)) {
        bag.problem(format!(
            "'fractions' entries must be in [0, 1], got {:?}",
            config.fractions
        ));
    }
    if config.runs == Some(0) {
        bag.problem("'runs' must be >= 1".into());
    }
    if !config.surrogate_pool_fraction.is_finite()
        || config.surrogate_pool_fraction <= 0.0
        || config.surrogate_pool_fraction >= 1.0
    {
        bag.problem(format!(
            "'surrogate_pool_fraction' must be in (0, 1), got {}",
            config.surrogate_pool_fraction
        ));
    }
    if config.jobs == Some(0) {
        bag.problem("'jobs' must be >= 1".into());
    }
}
