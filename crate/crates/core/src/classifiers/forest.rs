//! Bagged random forest over the CART trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{predict_tree, train_tree, DecisionTreeModel, FeatureSampler};
use super::{Dataset, Label};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};

/// Features drawn per split: ceil(sqrt(13)) = 4.
pub fn forest_features_per_split() -> usize {
    (FEATURE_COUNT as f64).sqrt().ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    trees: Vec<DecisionTreeModel>,
    n_trees: usize,
    seed: u64,
}

impl RandomForestModel {
    pub fn trees(&self) -> &[DecisionTreeModel] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Uniform with-replacement draw of `n` indices from `0..n`.
pub fn bootstrap_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Every tree gets its own ChaCha stream derived from (seed, index), so
/// training order and thread count cannot change the result.
pub(crate) fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64 + 1);
    rng
}

fn train_one_tree(data: &Dataset, seed: u64, tree_index: usize) -> DecisionTreeModel {
    let mut rng = tree_rng(seed, tree_index);
    let indices = bootstrap_indices(&mut rng, data.len());
    let bootstrap = data.subset(&indices);
    train_tree(
        &bootstrap,
        Some(FeatureSampler {
            per_split: forest_features_per_split(),
            rng: &mut rng,
        }),
    )
    .expect("bootstrap of a non-empty dataset is non-empty")
}

/// Trains `n_trees` bagged trees. Trees build in parallel; the per-tree
/// RNG streams make the outcome identical for any worker count.
pub fn train_forest(data: &Dataset, n_trees: usize, seed: u64) -> Result<RandomForestModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    let trees: Vec<DecisionTreeModel> = (0..n_trees)
        .into_par_iter()
        .map(|i| train_one_tree(data, seed, i))
        .collect();
    Ok(RandomForestModel {
        trees,
        n_trees,
        seed,
    })
}

/// Majority vote over all trees; a tie (possible only with an even tree
/// count) resolves to Benign.
pub fn predict_forest(forest: &RandomForestModel, features: &FeatureVector) -> Label {
    let malignant = forest
        .trees
        .iter()
        .filter(|t| predict_tree(t, features) == Label::Malignant)
        .count();
    if 2 * malignant > forest.trees.len() {
        Label::Malignant
    } else {
        Label::Benign
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::LabeledSample;

    fn separable_dataset(n_per_class: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        for _ in 0..n_per_class {
            let mut benign = [0.0; FEATURE_COUNT];
            let mut malignant = [0.0; FEATURE_COUNT];
            for i in 0..FEATURE_COUNT {
                benign[i] = rng.random_range(-1.0..1.0);
                malignant[i] = rng.random_range(4.0..6.0);
            }
            samples.push(LabeledSample {
                features: FeatureVector::from_array(benign),
                label: Label::Benign,
            });
            samples.push(LabeledSample {
                features: FeatureVector::from_array(malignant),
                label: Label::Malignant,
            });
        }
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn same_seed_gives_identical_forest() {
        let data = separable_dataset(20, 1);
        let a = train_forest(&data, 8, 42).unwrap();
        let b = train_forest(&data, 8, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forest_tree_is_bootstrap_plus_plain_tree() {
        // Replays the per-tree stream by hand: drawing the same bootstrap
        // and continuing with the same rng must reproduce the forest's tree.
        let data = separable_dataset(10, 3);
        let seed = 99;
        let forest = train_forest(&data, 1, seed).unwrap();

        let mut rng = tree_rng(seed, 0);
        let indices = bootstrap_indices(&mut rng, data.len());
        let bootstrap = data.subset(&indices);
        let tree = train_tree(
            &bootstrap,
            Some(FeatureSampler {
                per_split: forest_features_per_split(),
                rng: &mut rng,
            }),
        )
        .unwrap();
        assert_eq!(forest.trees()[0], tree);
    }

    #[test]
    fn separable_data_votes_almost_perfectly() {
        let data = separable_dataset(200, 7);
        let forest = train_forest(&data, 100, 11).unwrap();
        let correct = data
            .samples()
            .iter()
            .filter(|s| predict_forest(&forest, &s.features) == s.label)
            .count();
        assert!(
            correct as f64 / data.len() as f64 >= 0.99,
            "{correct}/{}",
            data.len()
        );
    }

    #[test]
    fn vote_matches_independent_recount() {
        let data = separable_dataset(15, 5);
        let forest = train_forest(&data, 25, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mut values = [0.0; FEATURE_COUNT];
            for v in values.iter_mut() {
                *v = rng.random_range(-2.0..8.0);
            }
            let probe = FeatureVector::from_array(values);
            let mut malignant = 0usize;
            let mut benign = 0usize;
            for tree in forest.trees() {
                match predict_tree(tree, &probe) {
                    Label::Malignant => malignant += 1,
                    Label::Benign => benign += 1,
                }
            }
            let expected = if malignant > benign {
                Label::Malignant
            } else {
                Label::Benign
            };
            assert_eq!(predict_forest(&forest, &probe), expected);
        }
    }

    #[test]
    fn rejects_empty_or_zero_trees() {
        let data = separable_dataset(5, 2);
        assert!(train_forest(&data, 0, 1).is_err());
        let empty = Dataset {
            samples: Vec::new(),
        };
        assert!(train_forest(&empty, 3, 1).is_err());
    }
}
