//! Differentiable linear classifiers trained by a damped Newton method.
//!
//! Both supported losses are functions of the margin m = y (w x + b), so
//! gradients and Hessians share one code path. The training objective is
//!
//! ```text
//! F(w, b) = ||w||^2 / (2 C) + sum_i loss(y_i (w x_i + b))
//! ```
//!
//! with the bias unregularized. The per-sample sum (not mean) keeps the
//! objective consistent with the attack module, whose implicit gradients
//! differentiate this exact quantity.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::rng::derive_seed;

/// Margin-based loss of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// log(1 + exp(-m)); smooth everywhere.
    Logistic,
    /// max(0, 1 - m)^2; once differentiable, second derivative jumps at
    /// m = 1.
    SquaredHinge,
}

impl LossKind {
    /// loss(m), numerically stable for large |m|.
    pub fn loss(self, m: f64) -> f64 {
        match self {
            LossKind::Logistic => {
                if m > 0.0 {
                    (-m).exp().ln_1p()
                } else {
                    -m + m.exp().ln_1p()
                }
            }
            LossKind::SquaredHinge => {
                let gap = (1.0 - m).max(0.0);
                gap * gap
            }
        }
    }

    /// d loss / d m.
    pub fn dloss(self, m: f64) -> f64 {
        match self {
            LossKind::Logistic => -1.0 / (1.0 + m.exp()),
            LossKind::SquaredHinge => {
                if m < 1.0 {
                    -2.0 * (1.0 - m)
                } else {
                    0.0
                }
            }
        }
    }

    /// d^2 loss / d m^2 (for the squared hinge, the one-sided value away
    /// from the kink).
    pub fn d2loss(self, m: f64) -> f64 {
        match self {
            LossKind::Logistic => {
                let s = 1.0 / (1.0 + (-m).exp());
                s * (1.0 - s)
            }
            LossKind::SquaredHinge => {
                if m < 1.0 {
                    2.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A trained linear classifier: prediction is sign(w x + b), ties to +1.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub loss_kind: LossKind,
    pub reg_c: f64,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// w x + b for a single sample.
    pub fn decision(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.weights.dot(&x) + self.bias
    }

    pub fn to_json(&self) -> String {
        // ModelSpec serialization cannot fail: plain numbers and an enum.
        serde_json::to_string_pretty(&ModelSpec::from(self)).expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        spec.into_model()
    }
}

/// Serialization schema of [`LinearModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub loss_kind: LossKind,
    pub reg_c: f64,
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl From<&LinearModel> for ModelSpec {
    fn from(model: &LinearModel) -> Self {
        ModelSpec {
            loss_kind: model.loss_kind,
            reg_c: model.reg_c,
            bias: model.bias,
            weights: model.weights.to_vec(),
        }
    }
}

impl ModelSpec {
    pub fn into_model(self) -> Result<LinearModel> {
        if self.weights.is_empty() {
            return Err(Error::InvalidData("model has no weights".into()));
        }
        if !self.reg_c.is_finite() || self.reg_c <= 0.0 {
            return Err(Error::InvalidData(format!("reg_c must be > 0, got {}", self.reg_c)));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidData("model parameters must be finite".into()));
        }
        Ok(LinearModel {
            weights: Array1::from_vec(self.weights),
            bias: self.bias,
            loss_kind: self.loss_kind,
            reg_c: self.reg_c,
        })
    }
}

/// Solver settings for [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub reg_c: f64,
    /// Stop when the gradient infinity norm drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl TrainConfig {
    pub fn new(loss_kind: LossKind, reg_c: f64) -> Self {
        Self { loss_kind, reg_c, tolerance: 1e-8, max_iterations: 1000 }
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !self.reg_c.is_finite() || self.reg_c <= 0.0 {
            problems.push(format!("reg_c must be > 0, got {}", self.reg_c));
        }
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            problems.push(format!("tolerance must be > 0, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            problems.push("max_iterations must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::new(LossKind::Logistic, 1.0)
    }
}

/// Objective value at (w, b).
fn objective(data: &SampleSet, kind: LossKind, c: f64, w: &Array1<f64>, b: f64) -> f64 {
    let margins = margins(data, w, b);
    let reg = w.dot(w) / (2.0 * c);
    reg + margins.iter().map(|&m| kind.loss(m)).sum::<f64>()
}

/// Per-sample margins y_i (w x_i + b).
fn margins(data: &SampleSet, w: &Array1<f64>, b: f64) -> Array1<f64> {
    let mut m = data.features().dot(w);
    m += b;
    m *= data.labels();
    m
}

/// Gradient of the objective in theta = [w; b].
fn gradient(data: &SampleSet, kind: LossKind, c: f64, w: &Array1<f64>, b: f64) -> Array1<f64> {
    let d = w.len();
    let m = margins(data, w, b);
    let mut grad = Array1::<f64>::zeros(d + 1);
    for j in 0..d {
        grad[j] = w[j] / c;
    }
    for i in 0..data.n() {
        let gy = kind.dloss(m[i]) * data.labels()[i];
        for j in 0..d {
            grad[j] += gy * data.features()[[i, j]];
        }
        grad[d] += gy;
    }
    grad
}

/// Hessian of the objective in theta = [w; b]; the ridge contributes 1/C on
/// the weight diagonal only.
fn hessian(data: &SampleSet, kind: LossKind, c: f64, w: &Array1<f64>, b: f64) -> Array2<f64> {
    let d = w.len();
    let m = margins(data, w, b);
    let mut h = Array2::<f64>::zeros((d + 1, d + 1));
    for j in 0..d {
        h[[j, j]] = 1.0 / c;
    }
    for i in 0..data.n() {
        let curv = kind.d2loss(m[i]);
        if curv == 0.0 {
            continue;
        }
        // The labels square away: y^2 = 1.
        let x = data.features().row(i);
        for a in 0..d {
            let ca = curv * x[a];
            for bcol in a..d {
                h[[a, bcol]] += ca * x[bcol];
            }
            h[[a, d]] += ca;
        }
        h[[d, d]] += curv;
    }
    for a in 0..d + 1 {
        for bcol in 0..a {
            h[[a, bcol]] = h[[bcol, a]];
        }
    }
    h
}

/// Train from zero initialization.
pub fn train(data: &SampleSet, config: &TrainConfig) -> Result<LinearModel> {
    fit(data, config, None)
}

/// Train starting from an existing parameter vector. Used by the attack
/// loop, where successive retrainings differ by one slowly moving point.
pub(crate) fn fit(
    data: &SampleSet,
    config: &TrainConfig,
    warm_start: Option<(&Array1<f64>, f64)>,
) -> Result<LinearModel> {
    config.validate()?;
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let d = data.dim();
    let kind = config.loss_kind;
    let c = config.reg_c;
    let (mut w, mut b) = match warm_start {
        Some((w0, b0)) => {
            if w0.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: w0.len() });
            }
            (w0.clone(), b0)
        }
        None => (Array1::zeros(d), 0.0),
    };

    let mut value = objective(data, kind, c, &w, b);
    for _ in 0..config.max_iterations {
        let grad = gradient(data, kind, c, &w, b);
        let grad_norm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if grad_norm <= config.tolerance {
            return Ok(LinearModel { weights: w, bias: b, loss_kind: kind, reg_c: c });
        }

        // Newton direction; a non-PD Hessian (possible for the squared
        // hinge with an empty active set) degrades to steepest descent.
        let h = hessian(data, kind, c, &w, b);
        let neg = grad.mapv(|g| -g);
        let direction = solve_spd(&h, &neg).unwrap_or(neg);

        let slope = grad.dot(&direction);
        let slope = if slope < 0.0 { slope } else { -grad_norm * grad_norm };
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-15 {
            let wt = &w + &(direction.slice(ndarray::s![..d]).to_owned() * step);
            let bt = b + step * direction[d];
            let vt = objective(data, kind, c, &wt, bt);
            if vt <= value + 1e-4 * step * slope {
                let improvement = value - vt;
                w = wt;
                b = bt;
                value = vt;
                accepted = improvement > f64::EPSILON * (1.0 + value.abs());
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // The objective is convex, so a descent that floating point can
            // no longer resolve means the numerical optimum is reached even
            // if the gradient sits above the tolerance.
            return Ok(LinearModel { weights: w, bias: b, loss_kind: kind, reg_c: c });
        }
    }
    let grad = gradient(data, kind, c, &w, b);
    let grad_norm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    if grad_norm <= config.tolerance {
        Ok(LinearModel { weights: w, bias: b, loss_kind: kind, reg_c: c })
    } else {
        Err(Error::NonConvergence { iterations: config.max_iterations, grad_norm })
    }
}

/// Raw decision values w x + b, one per row.
pub fn decision_values(model: &LinearModel, features: &Array2<f64>) -> Array1<f64> {
    let mut v = features.dot(&model.weights);
    v += model.bias;
    v
}

/// Hard labels in {-1, +1}; a decision value of exactly zero maps to +1.
pub fn predict(model: &LinearModel, features: &Array2<f64>) -> Array1<f64> {
    decision_values(model, features).mapv(|v| if v >= 0.0 { 1.0 } else { -1.0 })
}

/// Per-sample loss pieces of the training objective at the model's
/// parameters, as consumed by the attack module.
#[derive(Debug, Clone)]
pub struct LossTerms {
    /// loss(m_i) per sample, without the ridge.
    pub losses: Array1<f64>,
    /// d loss_i / d theta per sample, rows of length d + 1 (weights then
    /// bias), without the ridge.
    pub gradients: Array2<f64>,
    /// Hessian of the full training objective, ridge included.
    pub hessian: Array2<f64>,
}

/// Evaluate [`LossTerms`] for a dataset under a model.
pub fn loss_terms(model: &LinearModel, data: &SampleSet) -> Result<LossTerms> {
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), actual: data.dim() });
    }
    let d = model.dim();
    let kind = model.loss_kind;
    let m = margins(data, &model.weights, model.bias);
    let losses = m.mapv(|mi| kind.loss(mi));
    let mut gradients = Array2::<f64>::zeros((data.n(), d + 1));
    for i in 0..data.n() {
        let gy = kind.dloss(m[i]) * data.labels()[i];
        for j in 0..d {
            gradients[[i, j]] = gy * data.features()[[i, j]];
        }
        gradients[[i, d]] = gy;
    }
    let hessian = hessian(data, kind, model.reg_c, &model.weights, model.bias);
    Ok(LossTerms { losses, gradients, hessian })
}

/// Outcome of cross-validated regularization selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegC {
    /// Winning constant; ties resolve to the smallest candidate.
    pub chosen: f64,
    /// (candidate, mean held-out loss) in the caller's grid order. Empty
    /// when a singleton grid short-circuits.
    pub scores: Vec<(f64, f64)>,
}

/// Pick the regularization constant by stratified k-fold cross-validation,
/// scoring each candidate by mean held-out loss. A single-candidate grid
/// returns immediately without training.
pub fn select_c(
    data: &SampleSet,
    loss_kind: LossKind,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<RegC> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("regularization grid is empty".into()));
    }
    if grid.iter().any(|c| !c.is_finite() || *c <= 0.0) {
        return Err(Error::InvalidConfig("regularization candidates must be > 0".into()));
    }
    if grid.len() == 1 {
        return Ok(RegC { chosen: grid[0], scores: Vec::new() });
    }
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("cv folds must be >= 2, got {folds}")));
    }

    // Stratified folds: deal each class's shuffled indices round-robin so
    // every fold keeps both classes.
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for i in 0..data.n() {
        if data.labels()[i] > 0.0 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    for (label, class) in [(1.0, &pos), (-1.0, &neg)] {
        if class.len() < folds {
            return Err(Error::Stratification { folds, label, count: class.len() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_CV));
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold_of = vec![0usize; data.n()];
    for (k, &i) in pos.iter().enumerate() {
        fold_of[i] = k % folds;
    }
    for (k, &i) in neg.iter().enumerate() {
        fold_of[i] = k % folds;
    }

    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let config = TrainConfig::new(loss_kind, c);
        let mut total = 0.0;
        for fold in 0..folds {
            let train_idx: Vec<usize> =
                (0..data.n()).filter(|&i| fold_of[i] != fold).collect();
            let held_idx: Vec<usize> =
                (0..data.n()).filter(|&i| fold_of[i] == fold).collect();
            let model = train(&data.select(&train_idx), &config)?;
            let held = data.select(&held_idx);
            let values = decision_values(&model, held.features());
            let loss: f64 = (0..held.n())
                .map(|i| loss_kind.loss(held.labels()[i] * values[i]))
                .sum();
            total += loss / held.n() as f64;
        }
        scores.push((c, total / folds as f64));
    }

    // Scan candidates by ascending C so exact ties keep the smallest.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));
    let mut chosen = scores[order[0]].0;
    let mut best = scores[order[0]].1;
    for &i in &order[1..] {
        if scores[i].1 < best {
            best = scores[i].1;
            chosen = scores[i].0;
        }
    }
    Ok(RegC { chosen, scores })
}

const STREAM_CV: u64 = 0x43564b46;
