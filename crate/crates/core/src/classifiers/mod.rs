//! The three member classifiers and the majority-voting ensemble.
//!
//! All members train on the same standardized feature vectors. Prediction
//! tallies the three member votes; the ensemble answers Malignant exactly
//! when at least two members do. With three binary voters a tie is
//! impossible, so the ensemble is total.

mod forest;
mod tree;

pub use forest::{
    bootstrap_indices, forest_features_per_split, predict_forest, train_forest, RandomForestModel,
};
pub use tree::{predict_tree, train_tree, DecisionTreeModel, FeatureSampler, TreeNode};

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, PipelineConfig, FEATURE_COUNT};

/// Binary diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Benign,
    Malignant,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "Benign",
            Label::Malignant => "Malignant",
        })
    }
}

/// One training observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: Label,
}

/// Ordered collection of labeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub(crate) samples: Vec<LabeledSample>,
}

impl Dataset {
    /// Wraps samples, rejecting non-finite feature values.
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self> {
        if let Some(bad) = samples.iter().position(|s| !s.features.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample {bad} has non-finite features"
            )));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        let mut seen = [false; 2];
        for s in &self.samples {
            seen[usize::from(s.label == Label::Malignant)] = true;
        }
        seen[0] && seen[1]
    }

    /// New dataset from the given sample indices (with repetition allowed,
    /// as bootstrap resampling needs).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature z-score parameters learned from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    mean: [f64; FEATURE_COUNT],
    std: [f64; FEATURE_COUNT],
}

impl FeatureScaler {
    pub fn mean(&self) -> &[f64; FEATURE_COUNT] {
        &self.mean
    }

    pub fn std(&self) -> &[f64; FEATURE_COUNT] {
        &self.std
    }

    pub fn transform(&self, features: &FeatureVector) -> FeatureVector {
        let raw = features.to_array();
        let mut out = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            out[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
        FeatureVector::from_array(out)
    }

    pub fn transform_dataset(&self, data: &Dataset) -> Dataset {
        Dataset {
            samples: data
                .samples
                .iter()
                .map(|s| LabeledSample {
                    features: self.transform(&s.features),
                    label: s.label,
                })
                .collect(),
        }
    }
}

/// Learns per-feature mean and population standard deviation. Features
/// with zero spread store a standard deviation of 1, mapping them to a
/// constant 0 after standardization.
pub fn fit_scaler(data: &Dataset) -> Result<FeatureScaler> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.len() < 2 {
        return Err(Error::InvalidParameter(
            "scaler needs at least 2 samples".into(),
        ));
    }
    let n = data.len() as f64;
    let mut mean = [0.0; FEATURE_COUNT];
    for s in data.samples() {
        for (m, v) in mean.iter_mut().zip(s.features.to_array()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut std = [0.0; FEATURE_COUNT];
    for s in data.samples() {
        for (acc, (v, m)) in std.iter_mut().zip(s.features.to_array().iter().zip(&mean)) {
            let d = v - m;
            *acc += d * d;
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Ok(FeatureScaler { mean, std })
}

// ---------------------------------------------------------------------------
// K-nearest neighbors

/// Standardized training points kept verbatim for distance queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnStore {
    points: Vec<[f64; FEATURE_COUNT]>,
    labels: Vec<Label>,
}

impl KnnStore {
    pub fn new(data: &Dataset) -> Self {
        Self {
            points: data.samples().iter().map(|s| s.features.to_array()).collect(),
            labels: data.samples().iter().map(|s| s.label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn euclidean(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean nearest-neighbor vote.
///
/// `k = 1` returns the nearest stored label, breaking distance ties by the
/// lowest stored index. Larger `k` weighs votes by inverse distance; an
/// exact match (distance zero) wins outright.
pub fn predict_knn(store: &KnnStore, query: &FeatureVector, k: usize) -> Result<Label> {
    if store.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > store.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} out of range 1..={}",
            store.len()
        )));
    }
    let q = query.to_array();
    if k == 1 {
        let mut best = 0usize;
        let mut best_dist = euclidean(&store.points[0], &q);
        for (i, p) in store.points.iter().enumerate().skip(1) {
            let d = euclidean(p, &q);
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        return Ok(store.labels[best]);
    }

    let mut order: Vec<(f64, usize)> = store
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (euclidean(p, &q), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &order[..k];
    if nearest[0].0 == 0.0 {
        return Ok(store.labels[nearest[0].1]);
    }
    let mut weight = [0.0f64; 2];
    for &(d, i) in nearest {
        weight[usize::from(store.labels[i] == Label::Malignant)] += 1.0 / d;
    }
    Ok(if weight[1] > weight[0] {
        Label::Malignant
    } else {
        Label::Benign
    })
}

// ---------------------------------------------------------------------------
// Hybrid ensemble

/// Training knobs for the ensemble and its feature pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub pipeline: PipelineConfig,
    pub n_trees: usize,
    pub knn_k: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            n_trees: 100,
            knn_k: 1,
        }
    }
}

/// On-disk model format revision.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// The trained ensemble: scaler, KNN store, plain decision tree, and
/// bagged forest, plus the feature-pipeline configuration they were
/// trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    format_version: u32,
    config: EnsembleConfig,
    scaler: FeatureScaler,
    knn: KnnStore,
    tree: DecisionTreeModel,
    forest: RandomForestModel,
}

impl EnsembleModel {
    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn knn(&self) -> &KnnStore {
        &self.knn
    }

    pub fn tree(&self) -> &DecisionTreeModel {
        &self.tree
    }

    pub fn forest(&self) -> &RandomForestModel {
        &self.forest
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json)
            .map_err(|e| Error::UnsupportedModelVersion(format!("not a model file ({e})")))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::UnsupportedModelVersion(format!(
                    "found {v}, expected {MODEL_FORMAT_VERSION}"
                )))
            }
            None => {
                return Err(Error::UnsupportedModelVersion(
                    "missing format_version field".into(),
                ))
            }
        }
        serde_json::from_value(value)
            .map_err(|e| Error::UnsupportedModelVersion(format!("malformed model body ({e})")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&json)
    }
}

/// What each member answered for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemberVotes {
    pub knn: Label,
    pub forest: Label,
    pub tree: Label,
}

impl MemberVotes {
    pub fn malignant_count(&self) -> usize {
        [self.knn, self.forest, self.tree]
            .iter()
            .filter(|&&v| v == Label::Malignant)
            .count()
    }
}

/// Ensemble answer plus the individual votes behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsemblePrediction {
    pub label: Label,
    pub votes: MemberVotes,
}

/// Fits the scaler, standardizes the data once, and trains all three
/// members on the identical standardized dataset.
pub fn train_ensemble(data: &Dataset, cfg: &EnsembleConfig, seed: u64) -> Result<EnsembleModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClassDataset);
    }
    let scaler = fit_scaler(data)?;
    let standardized = scaler.transform_dataset(data);
    if cfg.knn_k == 0 || cfg.knn_k > standardized.len() {
        return Err(Error::InvalidParameter(format!(
            "knn_k = {} out of range 1..={}",
            cfg.knn_k,
            standardized.len()
        )));
    }
    let knn = KnnStore::new(&standardized);
    let tree = train_tree(&standardized, None)?;
    let forest = train_forest(&standardized, cfg.n_trees, seed)?;
    Ok(EnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        config: cfg.clone(),
        scaler,
        knn,
        tree,
        forest,
    })
}

/// Standardizes the query with the stored scaler, collects the three
/// member votes, and answers Malignant iff the Malignant votes outnumber
/// the Benign ones (two-of-three).
pub fn predict_ensemble(model: &EnsembleModel, features: &FeatureVector) -> EnsemblePrediction {
    let standardized = model.scaler.transform(features);
    let votes = MemberVotes {
        knn: predict_knn(&model.knn, &standardized, model.config.knn_k)
            .expect("stored KNN set is non-empty and k is validated at training time"),
        forest: predict_forest(&model.forest, &standardized),
        tree: predict_tree(&model.tree, &standardized),
    };
    let label = if votes.malignant_count() >= 2 {
        Label::Malignant
    } else {
        Label::Benign
    };
    EnsemblePrediction { label, votes }
}
