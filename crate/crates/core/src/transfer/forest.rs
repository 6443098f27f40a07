//! Random forest: bagged CART trees with per-split feature subsampling.

use ndarray::ArrayView1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::transfer::tree::{Tree, TreeBuilder};
use crate::transfer::TargetModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub seed: u64,
}

impl Forest {
    /// Majority vote over trees; a tie votes +1.
    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> f64 {
        let sum: f64 = self.trees.iter().map(|tree| tree.predict_one(x)).sum();
        if sum >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Train a forest of `n_trees` CART trees, each on a bootstrap resample,
/// considering `feature_subsample` features per split (default: floor of
/// the square root of d, at least 1). Tree RNG streams derive from
/// (seed, tree index), so the result is deterministic regardless of how
/// the trees are scheduled.
pub fn train_random_forest(
    data: &SampleSet,
    n_trees: usize,
    max_depth: usize,
    feature_subsample: Option<usize>,
    seed: u64,
) -> Result<TargetModel> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    let d = data.dim();
    let k = match feature_subsample {
        Some(0) => return Err(Error::InvalidConfig("feature_subsample must be >= 1".into())),
        Some(k) => k.min(d),
        None => ((d as f64).sqrt().floor() as usize).max(1),
    };
    let builder = TreeBuilder { data, max_depth, min_leaf: 1, features_per_split: Some(k) };
    let trees: Vec<Tree> = (0..n_trees)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64));
            let indices: Vec<usize> =
                (0..data.n()).map(|_| rng.random_range(0..data.n())).collect();
            builder.build(&indices, &mut Some(rng))
        })
        .collect();
    Ok(TargetModel::RandomForest(Forest { trees, seed }))
}
