//! CART-style decision tree with Gini impurity splits.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Label};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};

/// Tree node: internal threshold tests route left on `feature <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: Label,
        /// Training samples that reached this leaf, as (benign, malignant).
        counts: [u64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    root: TreeNode,
}

impl DecisionTreeModel {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => 1 + walk(left) + walk(right),
            }
        }
        walk(&self.root)
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

/// Per-split feature subsampling used by forest training.
pub struct FeatureSampler<'a> {
    /// How many candidate features each split draws.
    pub per_split: usize,
    pub rng: &'a mut ChaCha8Rng,
}

fn gini(counts: [u64; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let pb = counts[0] as f64 / n;
    let pm = counts[1] as f64 / n;
    1.0 - pb * pb - pm * pm
}

fn label_counts(data: &Dataset, indices: &[usize]) -> [u64; 2] {
    let mut counts = [0u64; 2];
    for &i in indices {
        match data.samples()[i].label {
            Label::Benign => counts[0] += 1,
            Label::Malignant => counts[1] += 1,
        }
    }
    counts
}

fn majority(counts: [u64; 2]) -> Label {
    // Ties resolve to Benign.
    if counts[1] > counts[0] {
        Label::Malignant
    } else {
        Label::Benign
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    weighted_gini: f64,
}

/// Scans candidate thresholds (midpoints of consecutive distinct sorted
/// values) over `features`, returning the lowest-impurity split. Candidate
/// features are visited in ascending index order and thresholds in
/// ascending value order, so ties resolve to the lowest feature index and
/// then the lowest threshold.
fn best_split(data: &Dataset, indices: &[usize], features: &[usize]) -> Option<BestSplit> {
    let mut best: Option<BestSplit> = None;
    let n = indices.len() as f64;
    for &feature in features {
        let mut values: Vec<(f64, Label)> = indices
            .iter()
            .map(|&i| {
                let s = &data.samples()[i];
                (s.features.to_array()[feature], s.label)
            })
            .collect();
        values.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = [0u64; 2];
        let mut right = label_counts(data, indices);
        for w in 0..values.len() - 1 {
            let (v, label) = values[w];
            match label {
                Label::Benign => {
                    left[0] += 1;
                    right[0] -= 1;
                }
                Label::Malignant => {
                    left[1] += 1;
                    right[1] -= 1;
                }
            }
            let next = values[w + 1].0;
            if v == next {
                continue;
            }
            let threshold = 0.5 * (v + next);
            let nl = (left[0] + left[1]) as f64;
            let weighted = (nl / n) * gini(left) + ((n - nl) / n) * gini(right);
            if best
                .as_ref()
                .is_none_or(|b| weighted < b.weighted_gini)
            {
                best = Some(BestSplit {
                    feature,
                    threshold,
                    weighted_gini: weighted,
                });
            }
        }
    }
    best
}

fn grow(data: &Dataset, indices: &[usize], sampler: &mut Option<FeatureSampler<'_>>) -> TreeNode {
    let counts = label_counts(data, indices);
    let pure = counts[0] == 0 || counts[1] == 0;
    if pure || indices.len() < 2 {
        return TreeNode::Leaf {
            label: majority(counts),
            counts,
        };
    }

    let candidate_features: Vec<usize> = match sampler {
        Some(s) => {
            let mut picked: Vec<usize> =
                sample(s.rng, FEATURE_COUNT, s.per_split.min(FEATURE_COUNT)).into_iter().collect();
            picked.sort_unstable();
            picked
        }
        None => (0..FEATURE_COUNT).collect(),
    };

    // No candidate feature varies within this node: nothing to split on.
    let Some(split) = best_split(data, indices, &candidate_features) else {
        return TreeNode::Leaf {
            label: majority(counts),
            counts,
        };
    };

    let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
    for &i in indices {
        let v = data.samples()[i].features.to_array()[split.feature];
        if v <= split.threshold {
            left_idx.push(i);
        } else {
            right_idx.push(i);
        }
    }
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(data, &left_idx, sampler)),
        right: Box::new(grow(data, &right_idx, sampler)),
    }
}

/// Grows a binary classification tree to purity (or until no candidate
/// feature varies). With a [`FeatureSampler`] each split considers only a
/// random feature subset, which is how forest members decorrelate.
pub fn train_tree(data: &Dataset, mut sampler: Option<FeatureSampler<'_>>) -> Result<DecisionTreeModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    Ok(DecisionTreeModel {
        root: grow(data, &indices, &mut sampler),
    })
}

/// Routes a feature vector to its leaf label.
pub fn predict_tree(tree: &DecisionTreeModel, features: &FeatureVector) -> Label {
    let values = features.to_array();
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Leaf { label, .. } => return *label,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                node = if values[*feature] <= *threshold {
                    left
                } else {
                    right
                };
            }
        }
    }
}
