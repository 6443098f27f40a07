//! Gaussian naive Bayes with per-class diagonal covariance.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::transfer::TargetModel;

/// Variances are floored here so constant features cannot produce infinite
/// densities.
const VARIANCE_FLOOR: f64 = 1e-9;

/// Maximum-likelihood estimates: class priors plus per-class feature means
/// and variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbParams {
    pub prior_positive: f64,
    pub prior_negative: f64,
    pub mean_positive: Vec<f64>,
    pub mean_negative: Vec<f64>,
    pub variance_positive: Vec<f64>,
    pub variance_negative: Vec<f64>,
}

impl GaussianNbParams {
    fn log_joint(&self, x: ArrayView1<'_, f64>, positive: bool) -> f64 {
        let (prior, means, variances) = if positive {
            (self.prior_positive, &self.mean_positive, &self.variance_positive)
        } else {
            (self.prior_negative, &self.mean_negative, &self.variance_negative)
        };
        let mut score = prior.ln();
        for j in 0..x.len() {
            let dx = x[j] - means[j];
            score -= 0.5 * (2.0 * std::f64::consts::PI * variances[j]).ln();
            score -= dx * dx / (2.0 * variances[j]);
        }
        score
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> f64 {
        if self.log_joint(x, true) >= self.log_joint(x, false) {
            1.0
        } else {
            -1.0
        }
    }
}

/// Fit class priors and per-class feature moments by maximum likelihood.
pub fn train_gaussian_nb(data: &SampleSet) -> Result<TargetModel> {
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let d = data.dim();
    let mut count = [0usize; 2];
    let mut mean = [vec![0.0; d], vec![0.0; d]];
    for i in 0..data.n() {
        let c = if data.labels()[i] > 0.0 { 0 } else { 1 };
        count[c] += 1;
        for j in 0..d {
            mean[c][j] += data.features()[[i, j]];
        }
    }
    for c in 0..2 {
        for j in 0..d {
            mean[c][j] /= count[c] as f64;
        }
    }
    let mut variance = [vec![0.0; d], vec![0.0; d]];
    for i in 0..data.n() {
        let c = if data.labels()[i] > 0.0 { 0 } else { 1 };
        for j in 0..d {
            let dx = data.features()[[i, j]] - mean[c][j];
            variance[c][j] += dx * dx;
        }
    }
    for c in 0..2 {
        for j in 0..d {
            variance[c][j] = (variance[c][j] / count[c] as f64).max(VARIANCE_FLOOR);
        }
    }
    let n = data.n() as f64;
    let [mean_positive, mean_negative] = mean;
    let [variance_positive, variance_negative] = variance;
    Ok(TargetModel::GaussianNb(GaussianNbParams {
        prior_positive: count[0] as f64 / n,
        prior_negative: count[1] as f64 / n,
        mean_positive,
        mean_negative,
        variance_positive,
        variance_negative,
    }))
}
