//! C-SVM with an RBF kernel, trained by sequential most-violating-pair
//! optimization on the dual.
//!
//! The dual is min_a 1/2 a^T Q a - 1^T a with Q_ij = y_i y_j k(x_i, x_j),
//! subject to 0 <= a_i <= C and sum_i a_i y_i = 0. Each step picks the
//! most violating pair (largest KKT gap) and solves the two-variable
//! subproblem exactly. The full kernel matrix is materialized, which keeps
//! this suitable for desk-scale sample counts only.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::transfer::TargetModel;

/// Support vectors with their signed dual weights alpha_i y_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSvmParams {
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub gamma: f64,
    pub bias: f64,
}

impl RbfSvmParams {
    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut value = self.bias;
        for (sv, coef) in self.support_vectors.iter().zip(&self.coefficients) {
            let mut dist = 0.0;
            for j in 0..sv.len() {
                let dx = sv[j] - x[j];
                dist += dx * dx;
            }
            value += coef * (-self.gamma * dist).exp();
        }
        if value >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn kernel_matrix(data: &SampleSet, gamma: f64) -> Array2<f64> {
    let n = data.n();
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in i + 1..n {
            let mut dist = 0.0;
            for c in 0..data.dim() {
                let dx = data.features()[[i, c]] - data.features()[[j, c]];
                dist += dx * dx;
            }
            let value = (-gamma * dist).exp();
            k[[i, j]] = value;
            k[[j, i]] = value;
        }
    }
    k
}

/// Train with the default iteration cap.
pub fn train_rbf_svm(data: &SampleSet, reg_c: f64, gamma: f64, tol: f64) -> Result<TargetModel> {
    train_rbf_svm_capped(data, reg_c, gamma, tol, 200 * data.n() + 10_000)
}

pub(crate) fn train_rbf_svm_capped(
    data: &SampleSet,
    reg_c: f64,
    gamma: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<TargetModel> {
    let mut problems = Vec::new();
    if !reg_c.is_finite() || reg_c <= 0.0 {
        problems.push(format!("reg_c must be > 0, got {reg_c}"));
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        problems.push(format!("gamma must be > 0, got {gamma}"));
    }
    if !tol.is_finite() || tol <= 0.0 {
        problems.push(format!("tol must be > 0, got {tol}"));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems.join("; ")));
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }

    let n = data.n();
    let y = data.labels();
    let kernel = kernel_matrix(data, gamma);
    let mut alpha = vec![0.0f64; n];
    // Dual gradient G_i = sum_j Q_ij a_j - 1; zero alphas start at -1.
    let mut grad = vec![-1.0f64; n];

    let mut iterations = 0;
    let bias = loop {
        // Most violating pair over the index sets that can still move.
        let mut up: Option<(usize, f64)> = None;
        let mut low: Option<(usize, f64)> = None;
        for i in 0..n {
            let score = -y[i] * grad[i];
            let in_up = (y[i] > 0.0 && alpha[i] < reg_c) || (y[i] < 0.0 && alpha[i] > 0.0);
            let in_low = (y[i] > 0.0 && alpha[i] > 0.0) || (y[i] < 0.0 && alpha[i] < reg_c);
            if in_up && up.map_or(true, |(_, best)| score > best) {
                up = Some((i, score));
            }
            if in_low && low.map_or(true, |(_, best)| score < best) {
                low = Some((i, score));
            }
        }
        let ((i, m), (j, m_low)) = match (up, low) {
            (Some(a), Some(b)) => (a, b),
            // One side saturated entirely; nothing can move.
            _ => break 0.0,
        };
        if m - m_low <= tol {
            break (m + m_low) / 2.0;
        }
        if iterations >= max_iterations {
            return Err(Error::NonConvergence { iterations, grad_norm: m - m_low });
        }
        iterations += 1;

        // Exact minimizer of the two-variable subproblem along the
        // feasible direction a_i += y_i t, a_j -= y_j t.
        let quad = kernel[[i, i]] + kernel[[j, j]] - 2.0 * kernel[[i, j]];
        let t_unconstrained = if quad > 1e-12 { (m - m_low) / quad } else { f64::INFINITY };
        let t_max_i = if y[i] > 0.0 { reg_c - alpha[i] } else { alpha[i] };
        let t_max_j = if y[j] > 0.0 { alpha[j] } else { reg_c - alpha[j] };
        let t = t_unconstrained.min(t_max_i).min(t_max_j);
        alpha[i] += y[i] * t;
        alpha[j] -= y[j] * t;
        for k in 0..n {
            grad[k] += y[k] * t * (kernel[[k, i]] - kernel[[k, j]]);
        }
    };

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        if alpha[i] > 1e-12 {
            support_vectors.push(data.features().row(i).to_vec());
            coefficients.push(alpha[i] * y[i]);
        }
    }
    Ok(TargetModel::RbfSvm(RbfSvmParams { support_vectors, coefficients, gamma, bias }))
}
