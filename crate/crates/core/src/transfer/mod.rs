//! Non-differentiable target models for black-box transfer evaluation.
//!
//! Poison points are crafted against a differentiable surrogate and then
//! fed to these models; no gradient ever flows through them. Each trainer
//! is deterministic given its seed, and every variant serializes to the
//! same JSON envelope as the linear model, distinguished by a `kind` tag.

mod forest;
mod nb;
mod svm;
mod tree;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use forest::{train_random_forest, Forest};
pub use nb::{train_gaussian_nb, GaussianNbParams};
pub use svm::{train_rbf_svm, RbfSvmParams};
pub use tree::{train_decision_tree, Tree, TreeNode};

/// Conventional defaults; the source study reports none for these models.
pub const DEFAULT_TREE_MAX_DEPTH: usize = 8;
pub const DEFAULT_TREE_MIN_LEAF: usize = 5;
pub const DEFAULT_FOREST_TREES: usize = 100;

/// gamma = 1 / d for the RBF kernel.
pub fn default_gamma(dim: usize) -> f64 {
    1.0 / dim.max(1) as f64
}

/// A trained transfer target. Prediction is a pure function of the stored
/// parameters; labels are in {-1, +1} with ties resolved to +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetModel {
    GaussianNb(GaussianNbParams),
    DecisionTree(Tree),
    RandomForest(Forest),
    RbfSvm(RbfSvmParams),
}

impl TargetModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TargetModel::GaussianNb(_) => "gaussian_nb",
            TargetModel::DecisionTree(_) => "decision_tree",
            TargetModel::RandomForest(_) => "random_forest",
            TargetModel::RbfSvm(_) => "rbf_svm",
        }
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> f64 {
        match self {
            TargetModel::GaussianNb(params) => params.predict_one(x),
            TargetModel::DecisionTree(tree) => tree.predict_one(x),
            TargetModel::RandomForest(forest) => forest.predict_one(x),
            TargetModel::RbfSvm(params) => params.predict_one(x),
        }
    }

    pub fn predict(&self, features: &Array2<f64>) -> Array1<f64> {
        Array1::from_iter(features.rows().into_iter().map(|row| self.predict_one(row)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("target model serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    #[test]
    fn json_round_trip_all_variants() {
        let data = generate_synthetic(&SyntheticConfig::new(60, 5.0, 3)).unwrap();
        let models = [
            train_gaussian_nb(&data).unwrap(),
            train_decision_tree(&data, 4, 2).unwrap(),
            train_random_forest(&data, 5, 4, None, 1).unwrap(),
            train_rbf_svm(&data, 1.0, default_gamma(2), 1e-3).unwrap(),
        ];
        for model in models {
            let text = model.to_json();
            let value: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(value["kind"], model.kind_name());
            let back = TargetModel::from_json(&text).unwrap();
            assert_eq!(back, model);
            // Predictions survive the round trip bit for bit.
            assert_eq!(back.predict(data.features()), model.predict(data.features()));
        }
    }

    #[test]
    fn predictions_are_labels() {
        let data = generate_synthetic(&SyntheticConfig::new(50, 4.0, 9)).unwrap();
        let probe = generate_synthetic(&SyntheticConfig::new(30, 4.0, 10)).unwrap();
        let models = [
            train_gaussian_nb(&data).unwrap(),
            train_decision_tree(&data, DEFAULT_TREE_MAX_DEPTH, DEFAULT_TREE_MIN_LEAF).unwrap(),
            train_random_forest(&data, 11, 6, None, 7).unwrap(),
            train_rbf_svm(&data, 1.0, default_gamma(2), 1e-3).unwrap(),
        ];
        for model in models {
            let predictions = model.predict(probe.features());
            assert!(predictions.iter().all(|y| *y == 1.0 || *y == -1.0), "{}", model.kind_name());
        }
    }
}
