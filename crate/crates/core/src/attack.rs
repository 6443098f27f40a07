//! Gradient-based poisoning of linear classifiers.
//!
//! The attacker inserts a small number of crafted points into the training
//! set so that the retrained model discriminates against the unprivileged
//! group. Formally the attack solves a bilevel problem: maximize an
//! attacker objective A evaluated on held-out data, subject to the model
//! being a minimizer of the (poisoned) training objective and to a box
//! constraint on the crafted features.
//!
//! The fairness objective rewards models that push the unprivileged group
//! toward the unfavorable label and the privileged group toward the
//! favorable one:
//!
//! ```text
//! A(theta) = sum_{unprivileged k} loss(x_k, +1, theta)
//!          + lambda * sum_{privileged j} loss(x_j, -1, theta)
//! ```
//!
//! The sums run over the flip targets of the held-out set: unprivileged
//! samples whose true label is favorable and privileged samples whose true
//! label is unfavorable. Held-out samples already on the attacker's
//! desired side would only reward pushing the decision boundary further
//! out, so they carry no weight in A.
//!
//! Because the trained parameters are an implicit function of the crafted
//! point, the ascent direction comes from the classifier's stationarity
//! condition: d theta / d x_c = -H^{-1} J, where H is the training Hessian
//! and J collects the cross derivatives of the poison point's loss term.
//! Points are optimized one at a time by projected gradient ascent with
//! step halving, each retraining the model as it moves.
//!
//! All crafting happens in standardized feature space (clean-train mean
//! and standard deviation); results are mapped back to raw coordinates.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{partition_by_group, GroupTag, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::model::{decision_values, fit, loss_terms, LinearModel, TrainConfig};
use crate::rng::derive_seed;

/// Featurewise box constraint on crafted points.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl BoxBounds {
    pub fn new(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), actual: upper.len() });
        }
        if lower.iter().chain(upper.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("box bounds must be finite".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(lo, hi)| lo > hi) {
            return Err(Error::InvalidConfig("box lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &Array1<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &Array1<f64> {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Project a point onto the box.
    pub fn clamp(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut out = x.clone();
        for j in 0..self.dim() {
            out[j] = out[j].max(self.lower[j]).min(self.upper[j]);
        }
        out
    }

    pub fn contains(&self, x: &Array1<f64>) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|j| self.lower[j] <= x[j] && x[j] <= self.upper[j])
    }
}

/// Where the box constraint comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMode {
    /// Per-feature minimum and maximum of the clean training set, so the
    /// crafted points stay inside the observed data range.
    TrainMinMax,
    /// Caller-supplied raw-space bounds.
    Fixed { lower: Vec<f64>, upper: Vec<f64> },
}

/// How many points the attacker may insert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Rounded fraction of the clean training size.
    Fraction(f64),
    Count(usize),
}

impl Budget {
    pub fn resolve(&self, n_train: usize) -> Result<usize> {
        match *self {
            Budget::Fraction(f) => {
                if !f.is_finite() || !(0.0..=1.0).contains(&f) {
                    Err(Error::InvalidConfig(format!("poison fraction must be in [0, 1], got {f}")))
                } else {
                    Ok((f * n_train as f64).round() as usize)
                }
            }
            Budget::Count(k) => Ok(k),
        }
    }
}

/// Weighting of the privileged half of the attacker objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// Ratio of group sizes in the held-out set, unprivileged over
    /// privileged, so both halves contribute on the same scale.
    PriorsRatio,
    Fixed(f64),
}

/// Settings of the crafting loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub budget: Budget,
    /// Initial ascent step; halved whenever a step fails to improve the
    /// objective, and restored for each new point.
    pub step_size: f64,
    /// Stop once the absolute objective change falls to this or below.
    pub stop_tolerance: f64,
    pub max_iterations: usize,
    pub bounds: BoundsMode,
    pub lambda: LambdaPolicy,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(budget: Budget) -> Self {
        Self {
            budget,
            step_size: 0.1,
            stop_tolerance: 1e-5,
            max_iterations: 100,
            bounds: BoundsMode::TrainMinMax,
            lambda: LambdaPolicy::PriorsRatio,
            seed: 0,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            problems.push(format!("step_size must be > 0, got {}", self.step_size));
        }
        if !self.stop_tolerance.is_finite() || self.stop_tolerance < 0.0 {
            problems.push(format!("stop_tolerance must be >= 0, got {}", self.stop_tolerance));
        }
        if self.max_iterations == 0 {
            problems.push("max_iterations must be >= 1".into());
        }
        if let LambdaPolicy::Fixed(l) = self.lambda {
            if !l.is_finite() || l < 0.0 {
                problems.push(format!("lambda must be >= 0, got {l}"));
            }
        }
        if let BoundsMode::Fixed { lower, upper } = &self.bounds {
            if lower.len() != upper.len() {
                problems.push("fixed bounds must have matching lengths".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self::new(Budget::Fraction(0.05))
    }
}

/// The attacker objective: a weighted loss of the trained model over
/// relabeled held-out samples, together with the training set the inner
/// problem retrains on.
#[derive(Debug, Clone)]
pub struct AttackObjective {
    train: SampleSet,
    /// Held-out samples carrying the labels the attacker steers toward.
    targets: SampleSet,
    /// Per-target weight: 1 for unprivileged terms, lambda for privileged.
    weights: Array1<f64>,
    train_config: TrainConfig,
    lambda: f64,
}

impl AttackObjective {
    pub fn train(&self) -> &SampleSet {
        &self.train
    }

    pub fn targets(&self) -> &SampleSet {
        &self.targets
    }

    pub fn sample_weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub(crate) fn with_train(&self, train: SampleSet) -> Self {
        Self { train, ..self.clone() }
    }

    fn augmented(&self, x_c: &Array1<f64>, y_c: f64) -> Result<SampleSet> {
        let row = Array2::from_shape_vec((1, x_c.len()), x_c.to_vec())
            .expect("row shape follows from x_c length");
        self.train.with_appended(&row, &Array1::from_vec(vec![y_c]), &[GroupTag::None])
    }

    /// Gradient of the objective in the model parameters [w; b].
    pub(crate) fn theta_gradient(&self, model: &LinearModel) -> Result<Array1<f64>> {
        let terms = loss_terms(model, &self.targets)?;
        let d = model.dim();
        let mut grad = Array1::<f64>::zeros(d + 1);
        for k in 0..self.targets.n() {
            let wk = self.weights[k];
            for j in 0..d + 1 {
                grad[j] += wk * terms.gradients[[k, j]];
            }
        }
        Ok(grad)
    }
}

/// Attacker objective value of a model: the weighted loss over the
/// objective's relabeled targets.
pub fn attacker_loss(objective: &AttackObjective, model: &LinearModel) -> f64 {
    let values = decision_values(model, objective.targets.features());
    let mut total = 0.0;
    for k in 0..objective.targets.n() {
        let margin = objective.targets.labels()[k] * values[k];
        total += objective.weights[k] * model.loss_kind.loss(margin);
    }
    total
}

/// Build the fairness objective from a training set and held-out samples.
/// Unprivileged samples are relabeled +1 and weighted 1; privileged
/// samples are relabeled -1 and weighted by the lambda policy.
pub fn build_objective(
    train: &SampleSet,
    validation: &SampleSet,
    lambda: LambdaPolicy,
    train_config: &TrainConfig,
) -> Result<AttackObjective> {
    if validation.dim() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), actual: validation.dim() });
    }
    let (unpriv, privl) = partition_by_group(validation)?;
    let lambda = match lambda {
        LambdaPolicy::Fixed(l) => {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {l}")));
            }
            l
        }
        LambdaPolicy::PriorsRatio => {
            if unpriv.n() == 0 {
                return Err(Error::MissingGroup("unprivileged"));
            }
            if privl.n() == 0 {
                return Err(Error::MissingGroup("privileged"));
            }
            unpriv.n() as f64 / privl.n() as f64
        }
    };
    let p = unpriv.n();
    let m = privl.n();
    if p + m == 0 {
        return Err(Error::InvalidData("attack needs a non-empty held-out set".into()));
    }
    let d = train.dim();
    let mut features = Array2::<f64>::zeros((p + m, d));
    let mut labels = Array1::<f64>::zeros(p + m);
    let mut groups = Vec::with_capacity(p + m);
    let mut weights = Array1::<f64>::zeros(p + m);
    for i in 0..p {
        features.row_mut(i).assign(&unpriv.features().row(i));
        labels[i] = 1.0;
        groups.push(GroupTag::Unprivileged);
        weights[i] = 1.0;
    }
    for i in 0..m {
        features.row_mut(p + i).assign(&privl.features().row(i));
        labels[p + i] = -1.0;
        groups.push(GroupTag::Privileged);
        weights[p + i] = lambda;
    }
    let targets = SampleSet::new(features, labels, groups, train.feature_names().to_vec())?;
    Ok(AttackObjective {
        train: train.clone(),
        targets,
        weights,
        train_config: train_config.clone(),
        lambda,
    })
}

/// Select the held-out samples whose predictions the attack aims to flip:
/// unprivileged samples with the favorable label (+1) and privileged
/// samples with the unfavorable one (-1). On these subsets the attacker's
/// steering labels coincide with the true labels, so maximizing A pushes
/// predictions across the boundary instead of inflating margins that are
/// already on the attacker's side.
pub fn flip_targets(validation: &SampleSet) -> Result<SampleSet> {
    let keep: Vec<usize> = (0..validation.n())
        .filter(|&i| match validation.groups()[i] {
            GroupTag::Unprivileged => validation.labels()[i] > 0.0,
            GroupTag::Privileged => validation.labels()[i] < 0.0,
            GroupTag::None => false,
        })
        .collect();
    let unpriv = keep.iter().filter(|&&i| validation.groups()[i] == GroupTag::Unprivileged).count();
    if unpriv == 0 {
        return Err(Error::InvalidData(
            "no flip targets: the held-out set has no unprivileged samples with label +1".into(),
        ));
    }
    if unpriv == keep.len() {
        return Err(Error::InvalidData(
            "no flip targets: the held-out set has no privileged samples with label -1".into(),
        ));
    }
    let mut features = Array2::<f64>::zeros((keep.len(), validation.dim()));
    let mut labels = Array1::<f64>::zeros(keep.len());
    let mut groups = Vec::with_capacity(keep.len());
    for (row, &i) in keep.iter().enumerate() {
        features.row_mut(row).assign(&validation.features().row(i));
        labels[row] = validation.labels()[i];
        groups.push(validation.groups()[i]);
    }
    SampleSet::new(features, labels, groups, validation.feature_names().to_vec())
}

/// Build the error-generic baseline objective: the plain held-out loss
/// under the true labels, all weights 1. Maximizing it degrades accuracy
/// without targeting either group.
pub fn generic_objective(
    train: &SampleSet,
    validation: &SampleSet,
    train_config: &TrainConfig,
) -> Result<AttackObjective> {
    if validation.dim() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), actual: validation.dim() });
    }
    Ok(AttackObjective {
        train: train.clone(),
        targets: validation.clone(),
        weights: Array1::ones(validation.n()),
        train_config: train_config.clone(),
        lambda: 1.0,
    })
}

/// Implicit gradient of the attacker objective in the crafted features.
///
/// `model` must be the classifier trained on the objective's training set
/// plus the point (x_c, y_c). The explicit term vanishes because the
/// objective touches x_c only through the trained parameters, leaving
/// -J^T H^{-1} grad_theta(A).
pub fn poison_gradient(
    objective: &AttackObjective,
    model: &LinearModel,
    x_c: &Array1<f64>,
    y_c: f64,
) -> Result<Array1<f64>> {
    let d = objective.train.dim();
    if x_c.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x_c.len() });
    }
    let augmented = objective.augmented(x_c, y_c)?;
    let hessian = loss_terms(model, &augmented)?.hessian;
    let target_grad = objective.theta_gradient(model)?;
    let v = solve_spd(&hessian, &target_grad)?;

    let margin = y_c * model.decision(x_c.view());
    let g = model.loss_kind.dloss(margin);
    let curv = model.loss_kind.d2loss(margin);
    let v_w = v.slice(s![..d]);
    let v_b = v[d];
    // J^T v in closed form: row a < d of J is curv * x_a * w + g * y * e_a,
    // the bias row is curv * w.
    let spread = curv * (x_c.dot(&v_w) + v_b);
    let mut grad = Array1::<f64>::zeros(d);
    for j in 0..d {
        grad[j] = -(spread * model.weights[j] + g * y_c * v_w[j]);
    }
    Ok(grad)
}

/// One crafted training point, in the coordinate space of the objective
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PoisonPoint {
    pub features: Array1<f64>,
    pub label: f64,
    /// Attacker objective after this point was finalized.
    pub objective: f64,
    /// Gradient iterations spent on this point.
    pub iterations: usize,
}

/// One step of the crafting loop, for diagnostics and plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub point_index: usize,
    /// 0 is the starting state; accepted steps keep the candidate.
    pub iteration: usize,
    pub objective: f64,
    pub step_size: f64,
    pub accepted: bool,
}

/// Optimize a single poison point by projected gradient ascent with step
/// halving. Works in whatever feature space the objective's data lives in;
/// the returned trace uses point_index 0.
pub fn optimize_point(
    objective: &AttackObjective,
    x0: &Array1<f64>,
    y_c: f64,
    bounds: &BoxBounds,
    config: &AttackConfig,
) -> Result<(PoisonPoint, Vec<TraceRecord>)> {
    config.validate()?;
    if y_c != 1.0 && y_c != -1.0 {
        return Err(Error::InvalidConfig(format!("poison label must be -1 or +1, got {y_c}")));
    }
    let d = objective.train.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x0.len() });
    }
    if bounds.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: bounds.dim() });
    }

    let mut x = bounds.clamp(x0);
    let mut model = fit(&objective.augmented(&x, y_c)?, &objective.train_config, None)?;
    let mut value = attacker_loss(objective, &model);
    let mut eta = config.step_size;
    let mut trace = vec![TraceRecord {
        point_index: 0,
        iteration: 0,
        objective: value,
        step_size: eta,
        accepted: true,
    }];

    let mut iterations = 0;
    for iteration in 1..=config.max_iterations {
        iterations = iteration;
        let grad = poison_gradient(objective, &model, &x, y_c)?;
        let candidate = bounds.clamp(&(&x + &(&grad * eta)));
        if candidate == x {
            // Zero gradient or pinned to the box; no step can move us.
            break;
        }
        let retrained = fit(
            &objective.augmented(&candidate, y_c)?,
            &objective.train_config,
            Some((&model.weights, model.bias)),
        )?;
        let candidate_value = attacker_loss(objective, &retrained);
        let delta = candidate_value - value;
        let accepted = candidate_value > value;
        trace.push(TraceRecord {
            point_index: 0,
            iteration,
            objective: candidate_value,
            step_size: eta,
            accepted,
        });
        if accepted {
            x = candidate;
            model = retrained;
            value = candidate_value;
        } else {
            eta *= 0.5;
            if eta < 1e-12 {
                break;
            }
        }
        if delta.abs() <= config.stop_tolerance {
            break;
        }
    }

    Ok((PoisonPoint { features: x, label: y_c, objective: value, iterations }, trace))
}

/// Starting points for the crafting loop: training samples drawn uniformly
/// with replacement, with flipped labels.
pub fn init_points(train: &SampleSet, count: usize, seed: u64) -> Vec<(Array1<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT));
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..train.n());
            (train.features().row(i).to_owned(), -train.labels()[i])
        })
        .collect()
}

/// Everything a finished attack produces.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    /// Clean training set with the crafted points appended (raw feature
    /// space, group tag `None`).
    pub poisoned_train: SampleSet,
    /// Crafted points in raw feature space, in crafting order.
    pub poison_points: Vec<PoisonPoint>,
    pub trace: Vec<TraceRecord>,
    /// Weight applied to the privileged half of the objective.
    pub lambda: f64,
}

/// Run the fairness poisoning attack end to end.
///
/// The objective is built over the flip targets of `validation` (see
/// [`flip_targets`]). Features are standardized to the clean training
/// set's mean and standard deviation for crafting, and mapped back
/// afterwards. Points are optimized greedily: each is crafted once,
/// against a training set that already contains its predecessors.
pub fn run_attack(
    train: &SampleSet,
    validation: &SampleSet,
    attack_config: &AttackConfig,
    train_config: &TrainConfig,
) -> Result<AttackOutcome> {
    run_poisoning(train, validation, attack_config, train_config, false)
}

/// Run the error-generic baseline attack: identical crafting machinery,
/// but the objective is the plain held-out loss under true labels.
pub fn run_generic_attack(
    train: &SampleSet,
    validation: &SampleSet,
    attack_config: &AttackConfig,
    train_config: &TrainConfig,
) -> Result<AttackOutcome> {
    run_poisoning(train, validation, attack_config, train_config, true)
}

fn run_poisoning(
    train: &SampleSet,
    validation: &SampleSet,
    attack_config: &AttackConfig,
    train_config: &TrainConfig,
    generic: bool,
) -> Result<AttackOutcome> {
    attack_config.validate()?;
    let d = train.dim();
    let count = attack_config.budget.resolve(train.n())?;

    let (mean, std) = train.feature_mean_std();
    let std_train = standardize(train, &mean, &std);
    let std_validation = standardize(validation, &mean, &std);

    let raw_bounds = match &attack_config.bounds {
        BoundsMode::TrainMinMax => {
            let (lo, hi) = train.feature_bounds();
            BoxBounds::new(lo, hi)?
        }
        BoundsMode::Fixed { lower, upper } => {
            if lower.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: lower.len() });
            }
            BoxBounds::new(Array1::from_vec(lower.clone()), Array1::from_vec(upper.clone()))?
        }
    };
    let std_bounds = BoxBounds::new(
        (raw_bounds.lower() - &mean) / &std,
        (raw_bounds.upper() - &mean) / &std,
    )?;

    let mut objective = if generic {
        generic_objective(&std_train, &std_validation, train_config)?
    } else {
        let targets = flip_targets(&std_validation)?;
        build_objective(&std_train, &targets, attack_config.lambda, train_config)?
    };
    let lambda = objective.lambda();
    if count == 0 {
        return Ok(AttackOutcome {
            poisoned_train: train.clone(),
            poison_points: Vec::new(),
            trace: Vec::new(),
            lambda,
        });
    }

    let mut poison_points = Vec::with_capacity(count);
    let mut trace = Vec::new();
    for (index, (x_raw, y_c)) in init_points(train, count, attack_config.seed).into_iter().enumerate()
    {
        let x0 = (&x_raw - &mean) / &std;
        let (point, mut sub) = optimize_point(&objective, &x0, y_c, &std_bounds, attack_config)?;
        for record in &mut sub {
            record.point_index = index;
        }
        trace.extend(sub);

        let next_train = objective.augmented(&point.features, y_c)?;
        objective = objective.with_train(next_train);

        let raw_back = raw_bounds.clamp(&(&point.features * &std + &mean));
        poison_points.push(PoisonPoint { features: raw_back, ..point });
    }

    let mut features = Array2::<f64>::zeros((count, d));
    let mut labels = Array1::<f64>::zeros(count);
    for (i, point) in poison_points.iter().enumerate() {
        features.row_mut(i).assign(&point.features);
        labels[i] = point.label;
    }
    let poisoned_train = train.with_appended(&features, &labels, &vec![GroupTag::None; count])?;
    Ok(AttackOutcome { poisoned_train, poison_points, trace, lambda })
}

fn standardize(set: &SampleSet, mean: &Array1<f64>, std: &Array1<f64>) -> SampleSet {
    let mut features = set.features().clone();
    for mut row in features.rows_mut() {
        for j in 0..row.len() {
            row[j] = (row[j] - mean[j]) / std[j];
        }
    }
    SampleSet::new(
        features,
        set.labels().clone(),
        set.groups().to_vec(),
        set.feature_names().to_vec(),
    )
    .expect("standardization preserves every dataset invariant")
}

const STREAM_INIT: u64 = 0x504f4953;
