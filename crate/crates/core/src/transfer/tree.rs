//! CART decision tree with Gini impurity and midpoint thresholds.

use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::transfer::TargetModel;

/// Flat node arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { label: f64 },
    /// Samples with feature value <= threshold go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

impl Tree {
    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut index = 0;
        loop {
            match &self.nodes[index] {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split { feature, threshold, left, right } => {
                    index = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], index: usize) -> usize {
            match &nodes[index] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Shared CART builder; the forest supplies bootstrap indices and a
/// per-split feature subsample, the plain tree uses all rows and features.
pub(crate) struct TreeBuilder<'a> {
    pub data: &'a SampleSet,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered per split; None means all.
    pub features_per_split: Option<usize>,
}

impl TreeBuilder<'_> {
    pub fn build(&self, indices: &[usize], rng: &mut Option<ChaCha8Rng>) -> Tree {
        let mut nodes = Vec::new();
        self.grow(indices, 0, &mut nodes, rng);
        Tree { nodes }
    }

    fn grow(
        &self,
        indices: &[usize],
        depth: usize,
        nodes: &mut Vec<TreeNode>,
        rng: &mut Option<ChaCha8Rng>,
    ) -> usize {
        let positives = indices.iter().filter(|&&i| self.data.labels()[i] > 0.0).count();
        let pure = positives == 0 || positives == indices.len();
        if depth >= self.max_depth || pure || indices.len() < 2 * self.min_leaf {
            return self.leaf(indices, positives, nodes);
        }
        let candidates = self.candidate_features(rng);
        match best_split(self.data, indices, &candidates, self.min_leaf) {
            None => self.leaf(indices, positives, nodes),
            Some((feature, threshold)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .copied()
                    .partition(|&i| self.data.features()[[i, feature]] <= threshold);
                let index = nodes.len();
                nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
                let left = self.grow(&left_idx, depth + 1, nodes, rng);
                let right = self.grow(&right_idx, depth + 1, nodes, rng);
                nodes[index] = TreeNode::Split { feature, threshold, left, right };
                index
            }
        }
    }

    fn leaf(&self, indices: &[usize], positives: usize, nodes: &mut Vec<TreeNode>) -> usize {
        // Majority label, ties to +1.
        let label = if 2 * positives >= indices.len() { 1.0 } else { -1.0 };
        nodes.push(TreeNode::Leaf { label });
        nodes.len() - 1
    }

    fn candidate_features(&self, rng: &mut Option<ChaCha8Rng>) -> Vec<usize> {
        let d = self.data.dim();
        match (self.features_per_split, rng) {
            (Some(k), Some(rng)) if k < d => {
                let mut all: Vec<usize> = (0..d).collect();
                all.shuffle(rng);
                let mut picked: Vec<usize> = all.into_iter().take(k).collect();
                // Sorted candidates keep the first-wins tie rule stable.
                picked.sort_unstable();
                picked
            }
            _ => (0..d).collect(),
        }
    }
}

/// Exhaustive best split: every candidate feature, every midpoint between
/// consecutive distinct sorted values, scored by weighted Gini impurity
/// of the children. Both children must hold at least `min_leaf` samples.
/// The first strictly better candidate wins, so ties resolve to the lowest
/// feature index and threshold.
fn best_split(
    data: &SampleSet,
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = indices.len() as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for &feature in features {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| {
            data.features()[[a, feature]].total_cmp(&data.features()[[b, feature]])
        });
        let mut left_total = 0usize;
        let mut left_pos = 0usize;
        let total_pos = order.iter().filter(|&&i| data.labels()[i] > 0.0).count();
        for k in 0..order.len() - 1 {
            left_total += 1;
            if data.labels()[order[k]] > 0.0 {
                left_pos += 1;
            }
            let a = data.features()[[order[k], feature]];
            let b = data.features()[[order[k + 1], feature]];
            if a == b {
                continue;
            }
            let right_total = order.len() - left_total;
            if left_total < min_leaf || right_total < min_leaf {
                continue;
            }
            let right_pos = total_pos - left_pos;
            let score = (left_total as f64 * gini(left_pos, left_total)
                + right_total as f64 * gini(right_pos, right_total))
                / n;
            let threshold = (a + b) / 2.0;
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, feature, threshold));
            }
        }
    }
    best.map(|(_, feature, threshold)| (feature, threshold))
}

fn gini(positives: usize, total: usize) -> f64 {
    let p = positives as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Train a CART classifier. `max_depth` 0 yields a single majority leaf.
pub fn train_decision_tree(
    data: &SampleSet,
    max_depth: usize,
    min_leaf: usize,
) -> Result<TargetModel> {
    if min_leaf == 0 {
        return Err(Error::InvalidConfig("min_leaf must be >= 1".into()));
    }
    let builder = TreeBuilder { data, max_depth, min_leaf, features_per_split: None };
    let indices: Vec<usize> = (0..data.n()).collect();
    Ok(TargetModel::DecisionTree(builder.build(&indices, &mut None)))
}
