//! Python bindings for the poisoning pipeline.
//!
//! The module mirrors the library's main flow: build or load a [`Dataset`],
//! split it, fit a [`Model`], craft poison with [`run_attack`], and score
//! the damage with [`evaluate`]. Matrices cross the boundary as plain lists
//! of row lists, so the module needs nothing installed on the Python side.
//!
//! The compiled artifact is `libfairpoison_py.so`; copy or symlink it onto
//! `sys.path` as `fairpoison.so` and `import fairpoison`.

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use fairpoison::fairness::DEFAULT_FAIRNESS_EPSILON;
use fairpoison::{
    evaluate_model, generate_synthetic, load_csv, run_attack as attack_fairness,
    run_generic_attack as attack_generic, select_c as cross_validate_c, train as fit_linear,
    transfer, AttackConfig, AttackOutcome, Budget, GroupTag, LambdaPolicy, LinearModel, LossKind,
    MetricsRecord, SampleSet, SyntheticConfig, TrainConfig,
};

// Target-model defaults not exported by the core crate; keep in sync with
// the experiment protocols there.
const FOREST_MAX_DEPTH: usize = 16;
const RBF_REG_C: f64 = 1.0;
const RBF_TOLERANCE: f64 = 1e-3;

/// Map library errors onto Python exceptions: I/O failures raise `OSError`,
/// everything else `ValueError`.
fn py_err(err: fairpoison::Error) -> PyErr {
    match err {
        fairpoison::Error::Io(_) => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_group(name: &str) -> PyResult<GroupTag> {
    match name {
        "privileged" => Ok(GroupTag::Privileged),
        "unprivileged" => Ok(GroupTag::Unprivileged),
        "none" => Ok(GroupTag::None),
        other => Err(PyValueError::new_err(format!(
            "unknown group '{other}'; expected 'privileged', 'unprivileged', or 'none'"
        ))),
    }
}

fn group_name(tag: GroupTag) -> &'static str {
    match tag {
        GroupTag::Privileged => "privileged",
        GroupTag::Unprivileged => "unprivileged",
        GroupTag::None => "none",
    }
}

fn parse_loss(name: &str) -> PyResult<LossKind> {
    match name {
        "logistic" => Ok(LossKind::Logistic),
        "squared_hinge" => Ok(LossKind::SquaredHinge),
        other => Err(PyValueError::new_err(format!(
            "unknown loss '{other}'; expected 'logistic' or 'squared_hinge'"
        ))),
    }
}

fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::Logistic => "logistic",
        LossKind::SquaredHinge => "squared_hinge",
    }
}

/// Assemble a rectangular list of row lists into a matrix.
fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("feature matrix must have at least one row"));
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(PyValueError::new_err("feature matrix must have at least one column"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(PyValueError::new_err(format!(
                "ragged feature matrix: row 0 has {d} columns, row {i} has {}",
                row.len()
            )));
        }
    }
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, d), flat).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn matrix_to_rows(matrix: &Array2<f64>) -> Vec<Vec<f64>> {
    matrix.rows().into_iter().map(|row| row.to_vec()).collect()
}

/// In-memory dataset: an n x d feature matrix, labels in {-1, +1}, and a
/// group name per sample.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
pub struct Dataset {
    inner: SampleSet,
}

#[pymethods]
impl Dataset {
    /// Build a dataset from rows of finite features, labels in {-1, +1},
    /// and group names ('privileged', 'unprivileged', 'none'). Feature
    /// names default to x1..xd.
    #[new]
    #[pyo3(signature = (features, labels, groups, feature_names=None))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        groups: Vec<String>,
        feature_names: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let features = matrix_from_rows(features)?;
        let names = feature_names
            .unwrap_or_else(|| (1..=features.ncols()).map(|j| format!("x{j}")).collect());
        let groups = groups.iter().map(|g| parse_group(g)).collect::<PyResult<Vec<_>>>()?;
        let inner =
            SampleSet::new(features, Array1::from(labels), groups, names).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Sample the synthetic two-Gaussian task at the given class
    /// separation. `rotation` is the group-assignment angle in radians and
    /// defaults to the generator's standard value.
    #[staticmethod]
    #[pyo3(signature = (n_samples, separation, seed, rotation=None))]
    fn synthetic(
        n_samples: usize,
        separation: f64,
        seed: u64,
        rotation: Option<f64>,
    ) -> PyResult<Self> {
        let mut config = SyntheticConfig::new(n_samples, separation, seed);
        if let Some(angle) = rotation {
            config.rotation = angle;
        }
        Ok(Self { inner: generate_synthetic(&config).map_err(py_err)? })
    }

    /// Load a headered CSV file. Labels map to +1 iff the label cell equals
    /// `favorable_value`; the sensitive cell maps to 'privileged' iff it
    /// equals `privileged_value`, to 'none' for the literal cell `none`,
    /// and to 'unprivileged' otherwise. Every other column must be numeric.
    #[staticmethod]
    fn from_csv(
        path: &str,
        label_column: &str,
        sensitive_column: &str,
        favorable_value: &str,
        privileged_value: &str,
    ) -> PyResult<Self> {
        let inner = load_csv(path, label_column, sensitive_column, favorable_value, privileged_value)
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Number of samples.
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Number of features.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Feature matrix as a list of rows.
    fn features(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.features())
    }

    /// Labels in {-1.0, +1.0}.
    fn labels(&self) -> Vec<f64> {
        self.inner.labels().to_vec()
    }

    /// Group name per sample.
    fn groups(&self) -> Vec<String> {
        self.inner.groups().iter().map(|&g| group_name(g).to_string()).collect()
    }

    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    /// Partition into train/validation/test with a seeded shuffle. The
    /// fractions must be positive and sum to 1.
    fn split(
        &self,
        train_fraction: f64,
        validation_fraction: f64,
        test_fraction: f64,
        seed: u64,
    ) -> PyResult<(Dataset, Dataset, Dataset)> {
        let fractions = (train_fraction, validation_fraction, test_fraction);
        let parts = fairpoison::split(&self.inner, fractions, seed).map_err(py_err)?;
        Ok((
            Dataset { inner: parts.train },
            Dataset { inner: parts.validation },
            Dataset { inner: parts.test },
        ))
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, dim={})", self.inner.n(), self.inner.dim())
    }
}

/// Trained linear classifier: sign(w . x + b).
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
pub struct Model {
    inner: LinearModel,
}

#[pymethods]
impl Model {
    /// Fit on `data` by regularized empirical risk minimization with the
    /// chosen margin loss ('logistic' or 'squared_hinge').
    #[staticmethod]
    #[pyo3(signature = (data, loss="logistic", reg_c=1.0))]
    fn train(data: &Dataset, loss: &str, reg_c: f64) -> PyResult<Self> {
        let config = TrainConfig::new(parse_loss(loss)?, reg_c);
        Ok(Self { inner: fit_linear(&data.inner, &config).map_err(py_err)? })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.to_vec()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.inner.bias
    }

    #[getter]
    fn loss(&self) -> &'static str {
        loss_name(self.inner.loss_kind)
    }

    #[getter]
    fn reg_c(&self) -> f64 {
        self.inner.reg_c
    }

    /// Hard labels in {-1.0, +1.0} for rows of features.
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(fairpoison::predict(&self.inner, &self.check_dim(features)?).to_vec())
    }

    /// Raw decision values w . x + b.
    fn decision_values(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(fairpoison::decision_values(&self.inner, &self.check_dim(features)?).to_vec())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: LinearModel::from_json(text).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(loss='{}', dim={}, reg_c={})",
            loss_name(self.inner.loss_kind),
            self.inner.dim(),
            self.inner.reg_c
        )
    }
}

impl Model {
    fn check_dim(&self, features: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
        let matrix = matrix_from_rows(features)?;
        if matrix.ncols() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "dimension mismatch: model expects {}, got {}",
                self.inner.dim(),
                matrix.ncols()
            )));
        }
        Ok(matrix)
    }
}

/// Accuracy and group fairness metrics of one model on one dataset.
/// Metrics that need both groups are None when a group is missing.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
pub struct Metrics {
    inner: MetricsRecord,
}

#[pymethods]
impl Metrics {
    #[getter]
    fn accuracy(&self) -> f64 {
        self.inner.accuracy
    }

    /// Positive-prediction rate of the unprivileged group minus that of the
    /// privileged group.
    #[getter]
    fn demographic_parity(&self) -> Option<f64> {
        self.inner.demographic_parity
    }

    /// Ratio of the same two rates, unprivileged over privileged.
    #[getter]
    fn disparate_impact(&self) -> Option<f64> {
        self.inner.disparate_impact
    }

    #[getter]
    fn average_odds_difference(&self) -> Option<f64> {
        self.inner.average_odds_difference
    }

    #[getter]
    fn fnr_unprivileged(&self) -> Option<f64> {
        self.inner.fnr_unprivileged
    }

    #[getter]
    fn fnr_privileged(&self) -> Option<f64> {
        self.inner.fnr_privileged
    }

    #[getter]
    fn fpr_unprivileged(&self) -> Option<f64> {
        self.inner.fpr_unprivileged
    }

    #[getter]
    fn fpr_privileged(&self) -> Option<f64> {
        self.inner.fpr_privileged
    }

    /// True when disparate impact falls below 1 - fairness_epsilon.
    #[getter]
    fn unfair(&self) -> Option<bool> {
        self.inner.unfair
    }

    #[getter]
    fn fairness_epsilon(&self) -> f64 {
        self.inner.fairness_epsilon
    }

    fn to_json(&self) -> String {
        // Plain floats and options; serialization cannot fail.
        serde_json::to_string_pretty(&self.inner).expect("metrics serialization")
    }

    fn __repr__(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "None".into(), |x| format!("{x:.4}"))
        }
        format!(
            "Metrics(accuracy={:.4}, demographic_parity={}, disparate_impact={})",
            self.inner.accuracy,
            opt(self.inner.demographic_parity),
            opt(self.inner.disparate_impact),
        )
    }
}

/// Result of a poisoning run: the augmented training set plus the crafted
/// points in crafting order.
#[pyclass]
pub struct AttackResult {
    outcome: AttackOutcome,
}

#[pymethods]
impl AttackResult {
    /// Clean training set with the crafted points appended (group 'none').
    #[getter]
    fn poisoned_train(&self) -> Dataset {
        Dataset { inner: self.outcome.poisoned_train.clone() }
    }

    /// Crafted feature vectors, one row per poison point.
    #[getter]
    fn poison_features(&self) -> Vec<Vec<f64>> {
        self.outcome.poison_points.iter().map(|p| p.features.to_vec()).collect()
    }

    #[getter]
    fn poison_labels(&self) -> Vec<f64> {
        self.outcome.poison_points.iter().map(|p| p.label).collect()
    }

    /// Attacker objective after each point was finalized.
    #[getter]
    fn objectives(&self) -> Vec<f64> {
        self.outcome.poison_points.iter().map(|p| p.objective).collect()
    }

    /// Weight applied to the privileged half of the attacker objective.
    #[getter]
    fn lambda_weight(&self) -> f64 {
        self.outcome.lambda
    }

    fn __repr__(&self) -> String {
        format!(
            "AttackResult(points={}, lambda_weight={:.4})",
            self.outcome.poison_points.len(),
            self.outcome.lambda
        )
    }
}

/// Non-linear reference classifier used to measure black-box transfer.
#[pyclass]
pub struct TargetModel {
    inner: transfer::TargetModel,
}

#[pymethods]
impl TargetModel {
    /// Classifier family: 'gaussian_nb', 'decision_tree', 'random_forest',
    /// or 'rbf_svm'.
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    /// Hard labels in {-1.0, +1.0}. The rows must have the dimension the
    /// model was trained on.
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(self.inner.predict(&matrix_from_rows(features)?).to_vec())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: transfer::TargetModel::from_json(text).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!("TargetModel(kind='{}')", self.inner.kind_name())
    }
}

/// Score `model` on `data`: accuracy plus every group fairness metric,
/// with the disparate-impact unfairness verdict at `fairness_epsilon`.
#[pyfunction]
#[pyo3(signature = (model, data, fairness_epsilon=DEFAULT_FAIRNESS_EPSILON))]
fn evaluate(model: &Model, data: &Dataset, fairness_epsilon: f64) -> PyResult<Metrics> {
    let inner =
        evaluate_model(&model.inner, &data.inner, fairness_epsilon).map_err(py_err)?;
    Ok(Metrics { inner })
}

/// Pick the regularization constant from `grid` by stratified k-fold
/// cross-validation; ties resolve to the smallest candidate.
#[pyfunction]
#[pyo3(signature = (data, grid, loss="logistic", folds=5, seed=0))]
fn select_c(data: &Dataset, grid: Vec<f64>, loss: &str, folds: usize, seed: u64) -> PyResult<f64> {
    let picked = cross_validate_c(&data.inner, parse_loss(loss)?, &grid, folds, seed)
        .map_err(py_err)?;
    Ok(picked.chosen)
}

fn assemble_attack_config(
    budget_fraction: Option<f64>,
    budget_count: Option<usize>,
    step_size: f64,
    stop_tolerance: f64,
    max_iterations: usize,
    seed: u64,
    lambda_weight: Option<f64>,
) -> PyResult<AttackConfig> {
    let budget = match (budget_fraction, budget_count) {
        (Some(_), Some(_)) => {
            return Err(PyValueError::new_err(
                "pass budget_fraction or budget_count, not both",
            ))
        }
        (Some(fraction), None) => Budget::Fraction(fraction),
        (None, Some(count)) => Budget::Count(count),
        (None, None) => Budget::Fraction(0.05),
    };
    let mut config = AttackConfig::new(budget);
    config.step_size = step_size;
    config.stop_tolerance = stop_tolerance;
    config.max_iterations = max_iterations;
    config.seed = seed;
    if let Some(value) = lambda_weight {
        config.lambda = LambdaPolicy::Fixed(value);
    }
    Ok(config)
}

/// Craft poison points that worsen the group fairness of a model retrained
/// on the augmented set, steering by the held-out `validation` set. The
/// default budget is 5% of the training size; `lambda_weight` overrides the
/// group-ratio weighting of the objective.
#[pyfunction]
#[pyo3(signature = (
    train, validation, budget_fraction=None, budget_count=None, loss="logistic",
    reg_c=1.0, step_size=0.1, stop_tolerance=1e-5, max_iterations=100, seed=0,
    lambda_weight=None,
))]
#[allow(clippy::too_many_arguments)]
fn run_attack(
    train: &Dataset,
    validation: &Dataset,
    budget_fraction: Option<f64>,
    budget_count: Option<usize>,
    loss: &str,
    reg_c: f64,
    step_size: f64,
    stop_tolerance: f64,
    max_iterations: usize,
    seed: u64,
    lambda_weight: Option<f64>,
) -> PyResult<AttackResult> {
    let attack = assemble_attack_config(
        budget_fraction,
        budget_count,
        step_size,
        stop_tolerance,
        max_iterations,
        seed,
        lambda_weight,
    )?;
    let trainer = TrainConfig::new(parse_loss(loss)?, reg_c);
    let outcome = attack_fairness(&train.inner, &validation.inner, &attack, &trainer)
        .map_err(py_err)?;
    Ok(AttackResult { outcome })
}

/// Error-generic baseline: craft poison that maximizes plain held-out loss
/// with no group weighting. Same knobs as `run_attack`.
#[pyfunction]
#[pyo3(signature = (
    train, validation, budget_fraction=None, budget_count=None, loss="logistic",
    reg_c=1.0, step_size=0.1, stop_tolerance=1e-5, max_iterations=100, seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn run_generic_attack(
    train: &Dataset,
    validation: &Dataset,
    budget_fraction: Option<f64>,
    budget_count: Option<usize>,
    loss: &str,
    reg_c: f64,
    step_size: f64,
    stop_tolerance: f64,
    max_iterations: usize,
    seed: u64,
) -> PyResult<AttackResult> {
    let attack = assemble_attack_config(
        budget_fraction,
        budget_count,
        step_size,
        stop_tolerance,
        max_iterations,
        seed,
        None,
    )?;
    let trainer = TrainConfig::new(parse_loss(loss)?, reg_c);
    let outcome = attack_generic(&train.inner, &validation.inner, &attack, &trainer)
        .map_err(py_err)?;
    Ok(AttackResult { outcome })
}

/// Train a non-linear reference classifier. `kind` picks the family:
/// 'gaussian_nb' (no knobs), 'decision_tree' (max_depth, min_leaf),
/// 'random_forest' (n_trees, max_depth, feature_subsample, seed), or
/// 'rbf_svm' (reg_c, gamma, tolerance). Unset knobs take the library
/// defaults.
#[pyfunction]
#[pyo3(signature = (
    data, kind, max_depth=None, min_leaf=None, n_trees=None,
    feature_subsample=None, reg_c=None, gamma=None, tolerance=None, seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn train_target(
    data: &Dataset,
    kind: &str,
    max_depth: Option<usize>,
    min_leaf: Option<usize>,
    n_trees: Option<usize>,
    feature_subsample: Option<usize>,
    reg_c: Option<f64>,
    gamma: Option<f64>,
    tolerance: Option<f64>,
    seed: u64,
) -> PyResult<TargetModel> {
    let inner = match kind {
        "gaussian_nb" => transfer::train_gaussian_nb(&data.inner),
        "decision_tree" => transfer::train_decision_tree(
            &data.inner,
            max_depth.unwrap_or(transfer::DEFAULT_TREE_MAX_DEPTH),
            min_leaf.unwrap_or(transfer::DEFAULT_TREE_MIN_LEAF),
        ),
        "random_forest" => transfer::train_random_forest(
            &data.inner,
            n_trees.unwrap_or(transfer::DEFAULT_FOREST_TREES),
            max_depth.unwrap_or(FOREST_MAX_DEPTH),
            feature_subsample,
            seed,
        ),
        "rbf_svm" => transfer::train_rbf_svm(
            &data.inner,
            reg_c.unwrap_or(RBF_REG_C),
            gamma.unwrap_or_else(|| transfer::default_gamma(data.inner.dim())),
            tolerance.unwrap_or(RBF_TOLERANCE),
        ),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown target kind '{other}'; expected 'gaussian_nb', 'decision_tree', \
                 'random_forest', or 'rbf_svm'"
            )))
        }
    };
    Ok(TargetModel { inner: inner.map_err(py_err)? })
}

#[pymodule]
#[pyo3(name = "fairpoison")]
fn bindings(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Metrics>()?;
    m.add_class::<AttackResult>()?;
    m.add_class::<TargetModel>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(select_c, m)?)?;
    m.add_function(wrap_pyfunction!(run_attack, m)?)?;
    m.add_function(wrap_pyfunction!(run_generic_attack, m)?)?;
    m.add_function(wrap_pyfunction!(train_target, m)?)?;
    m.add("DEFAULT_FAIRNESS_EPSILON", DEFAULT_FAIRNESS_EPSILON)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

// The #[pymethods] wrappers leave the plain Rust methods in place, so the
// binding layer is exercised here without starting an interpreter; the
// import path itself is covered by python/smoke_test.py.
#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::synthetic(300, 6.0, 7, None).unwrap()
    }

    #[test]
    fn synthetic_split_preserves_counts() {
        let data = toy();
        assert_eq!(data.__len__(), 300);
        assert_eq!(data.dim(), 2);
        let (train, validation, test) = data.split(0.5, 0.3, 0.2, 1).unwrap();
        assert_eq!(train.n() + validation.n() + test.n(), 300);
        assert!(validation.n() > 0 && test.n() > 0);
    }

    #[test]
    fn dataset_round_trips_rows() {
        let rows = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![2.0, 2.0],
            vec![3.0, 1.0],
        ];
        let labels = vec![1.0, -1.0, 1.0, -1.0];
        let groups: Vec<String> = ["privileged", "unprivileged", "unprivileged", "none"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let data = Dataset::new(rows.clone(), labels.clone(), groups.clone(), None).unwrap();
        assert_eq!(data.features(), rows);
        assert_eq!(data.labels(), labels);
        assert_eq!(data.groups(), groups);
        assert_eq!(data.feature_names(), vec!["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let ragged = vec![vec![0.0, 1.0], vec![1.0]];
        let tags = vec!["none".to_string(), "none".to_string()];
        assert!(Dataset::new(ragged, vec![1.0, -1.0], tags.clone(), None).is_err());

        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let bad_group = vec!["none".to_string(), "boss".to_string()];
        assert!(Dataset::new(rows.clone(), vec![1.0, -1.0], bad_group, None).is_err());

        let data = toy();
        assert!(Model::train(&data, "perceptron", 1.0).is_err());
        assert!(Model::train(&data, "logistic", -1.0).is_err());
    }

    #[test]
    fn model_json_round_trips() {
        let data = toy();
        let model = Model::train(&data, "squared_hinge", 0.5).unwrap();
        let restored = Model::from_json(&model.to_json()).unwrap();
        assert_eq!(restored.weights(), model.weights());
        assert_eq!(restored.bias(), model.bias());
        assert_eq!(restored.loss(), "squared_hinge");
        assert_eq!(restored.reg_c(), 0.5);
        let rows = data.features();
        assert_eq!(restored.predict(rows.clone()).unwrap(), model.predict(rows).unwrap());
    }

    #[test]
    fn predict_checks_dimension() {
        let data = toy();
        let model = Model::train(&data, "logistic", 1.0).unwrap();
        assert!(model.predict(vec![vec![1.0, 2.0, 3.0]]).is_err());
        let values = model.decision_values(vec![vec![1.0, 2.0]]).unwrap();
        let labels = model.predict(vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(labels[0], if values[0] >= 0.0 { 1.0 } else { -1.0 });
    }

    #[test]
    fn attack_pipeline_appends_budget_and_hurts_parity() {
        let data = toy();
        let (train, validation, _test) = data.split(0.5, 0.3, 0.2, 1).unwrap();
        let model = Model::train(&train, "logistic", 1.0).unwrap();
        let clean = evaluate(&model, &validation, DEFAULT_FAIRNESS_EPSILON).unwrap();
        assert!(clean.accuracy() > 0.7);

        let result = run_attack(
            &train, &validation, None, Some(8), "logistic", 1.0, 0.1, 1e-5, 40, 0, None,
        )
        .unwrap();
        assert_eq!(result.poisoned_train().n(), train.n() + 8);
        assert_eq!(result.poison_features().len(), 8);
        assert_eq!(result.poison_labels().len(), 8);
        assert_eq!(result.objectives().len(), 8);
        assert!(result.lambda_weight() > 0.0);

        let poisoned = Model::train(&result.poisoned_train(), "logistic", 1.0).unwrap();
        let after = evaluate(&poisoned, &validation, DEFAULT_FAIRNESS_EPSILON).unwrap();
        let before_dp = clean.demographic_parity().unwrap();
        let after_dp = after.demographic_parity().unwrap();
        assert!(
            after_dp <= before_dp + 1e-12,
            "poisoning should not shrink the parity gap: {before_dp} -> {after_dp}"
        );
    }

    #[test]
    fn generic_attack_respects_budget() {
        let data = toy();
        let (train, validation, _test) = data.split(0.5, 0.3, 0.2, 1).unwrap();
        let result = run_generic_attack(
            &train, &validation, Some(0.04), None, "logistic", 1.0, 0.1, 1e-5, 40, 0,
        )
        .unwrap();
        let expected = (train.n() as f64 * 0.04).round() as usize;
        assert_eq!(result.poison_features().len(), expected);
    }

    #[test]
    fn budget_arguments_are_exclusive() {
        let data = toy();
        let (train, validation, _test) = data.split(0.5, 0.3, 0.2, 1).unwrap();
        let result = run_attack(
            &train,
            &validation,
            Some(0.05),
            Some(3),
            "logistic",
            1.0,
            0.1,
            1e-5,
            40,
            0,
            None,
        );
        assert!(result.is_err());
    }

    #[test]
    fn select_c_picks_from_grid() {
        let data = toy();
        let grid = vec![0.1, 1.0, 10.0];
        let chosen = select_c(&data, grid.clone(), "logistic", 5, 0).unwrap();
        assert!(grid.contains(&chosen));
    }

    #[test]
    fn target_models_train_predict_and_round_trip() {
        let data = toy();
        let rows = data.features();
        for kind in ["gaussian_nb", "decision_tree", "random_forest", "rbf_svm"] {
            let target =
                train_target(&data, kind, None, None, None, None, None, None, None, 0).unwrap();
            assert_eq!(target.kind(), kind);
            let preds = target.predict(rows.clone()).unwrap();
            assert_eq!(preds.len(), data.n());
            assert!(preds.iter().all(|&p| p == 1.0 || p == -1.0));
            let restored = TargetModel::from_json(&target.to_json()).unwrap();
            assert_eq!(restored.predict(rows.clone()).unwrap(), preds);
        }
        assert!(train_target(&data, "mlp", None, None, None, None, None, None, None, 0).is_err());
    }

    #[test]
    fn metrics_serialize_with_every_field() {
        let data = toy();
        let model = Model::train(&data, "logistic", 1.0).unwrap();
        let metrics = evaluate(&model, &data, 0.2).unwrap();
        let text = metrics.to_json();
        for key in [
            "accuracy",
            "demographic_parity",
            "disparate_impact",
            "average_odds_difference",
            "fnr_unprivileged",
            "fpr_privileged",
            "unfair",
            "fairness_epsilon",
        ] {
            assert!(text.contains(key), "missing {key} in {text}");
        }
        assert_eq!(metrics.fairness_epsilon(), 0.2);
    }
}
