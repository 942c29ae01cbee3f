//! End-to-end runs: dataset ingestion, splitting, training, prediction,
//! and segmentation, all reproducible from a seed.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifiers::{
    predict_ensemble, predict_forest, predict_knn, predict_tree, train_ensemble, Dataset,
    EnsembleConfig, EnsembleModel, Label, LabeledSample, MemberVotes,
};
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, confusion, ConfusionMatrix, MetricsReport};
use crate::features::{extract_features, FeatureVector, PipelineConfig};
use crate::imaging::{generate_fixture, load_image, standardize, write_pgm, GrayImage};
use crate::segmentation::{binarize, histogram, otsu_threshold, tumor_area_mm2};

/// Sorted per-class file lists found under a dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetDescription {
    pub benign: Vec<PathBuf>,
    pub malignant: Vec<PathBuf>,
}

impl DatasetDescription {
    pub fn total(&self) -> usize {
        self.benign.len() + self.malignant.len()
    }
}

fn list_class_dir(root: &Path, class: &str) -> Result<Vec<PathBuf>> {
    let dir = root.join(class);
    if !dir.is_dir() {
        return Err(Error::MissingClassDirectory(dir));
    }
    let entries = std::fs::read_dir(&dir).map_err(|source| Error::Read {
        path: dir.clone(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyClass(dir));
    }
    Ok(files)
}

/// Scans `<root>/benign` and `<root>/malignant` for PGM/PNG files.
///
/// The lists come back sorted, so downstream splitting is deterministic.
pub fn ingest_dataset(root: impl AsRef<Path>) -> Result<DatasetDescription> {
    let root = root.as_ref();
    Ok(DatasetDescription {
        benign: list_class_dir(root, "benign")?,
        malignant: list_class_dir(root, "malignant")?,
    })
}

/// Stratified train/test partition of a dataset description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitFiles {
    pub train: Vec<(PathBuf, Label)>,
    pub test: Vec<(PathBuf, Label)>,
}

fn split_class(
    files: &[PathBuf],
    label: Label,
    ratio: f64,
    seed: u64,
    out: &mut SplitFiles,
) -> Result<()> {
    if files.len() < 2 {
        return Err(Error::ClassTooSmall {
            class: label.to_string(),
            count: files.len(),
            required: 2,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match label {
        Label::Benign => 1,
        Label::Malignant => 2,
    });
    let mut shuffled = files.to_vec();
    shuffled.shuffle(&mut rng);
    // Keep both halves non-empty; at the default 85:15 ratio this is the
    // plain floor (1278 benign images yield 1086 train / 192 test).
    let n_train = ((ratio * files.len() as f64).floor() as usize).clamp(1, files.len() - 1);
    for (i, path) in shuffled.into_iter().enumerate() {
        if i < n_train {
            out.train.push((path, label));
        } else {
            out.test.push((path, label));
        }
    }
    Ok(())
}

/// Shuffles each class with a seeded generator and takes the first
/// `floor(ratio * n)` files of each as training data.
pub fn split_dataset(desc: &DatasetDescription, ratio: f64, seed: u64) -> Result<SplitFiles> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratio {ratio} must lie strictly between 0 and 1"
        )));
    }
    let mut split = SplitFiles {
        train: Vec::new(),
        test: Vec::new(),
    };
    split_class(&desc.benign, Label::Benign, ratio, seed, &mut split)?;
    split_class(&desc.malignant, Label::Malignant, ratio, seed, &mut split)?;
    Ok(split)
}

/// An image that failed feature extraction during a batch run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedImage {
    pub path: PathBuf,
    pub reason: String,
}

/// Loads, standardizes to 200x200, and extracts features for one image.
pub fn image_features(path: &Path, pipeline: &PipelineConfig) -> Result<FeatureVector> {
    let img = load_image(path)?;
    extract_features(&standardize(&img), pipeline)
}

fn extract_batch(
    files: &[(PathBuf, Label)],
    pipeline: &PipelineConfig,
) -> (Vec<LabeledSample>, Vec<SkippedImage>) {
    let results: Vec<_> = files
        .par_iter()
        .map(|(path, label)| (path, label, image_features(path, pipeline)))
        .collect();
    let mut samples = Vec::with_capacity(files.len());
    let mut skipped = Vec::new();
    for (path, label, outcome) in results {
        match outcome {
            Ok(features) => samples.push(LabeledSample {
                features,
                label: *label,
            }),
            Err(e) => skipped.push(SkippedImage {
                path: path.clone(),
                reason: e.to_string(),
            }),
        }
    }
    (samples, skipped)
}

/// Everything a training run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_root: PathBuf,
    /// Fraction of each class used for training.
    pub split_ratio: f64,
    pub seed: u64,
    pub ensemble: EnsembleConfig,
    pub model_out: PathBuf,
}

impl RunConfig {
    pub fn new(data_root: impl Into<PathBuf>, model_out: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            data_root: data_root.into(),
            split_ratio: 0.85,
            seed,
            ensemble: EnsembleConfig::default(),
            model_out: model_out.into(),
        }
    }
}

/// Per-member test accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberAccuracies {
    pub knn: f64,
    pub forest: f64,
    pub tree: f64,
}

/// Outcome of a [`run_train`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub n_train: usize,
    pub n_test: usize,
    pub skipped: Vec<SkippedImage>,
    pub train_metrics: MetricsReport,
    pub test_confusion: ConfusionMatrix,
    pub test_metrics: MetricsReport,
    pub member_test_accuracy: MemberAccuracies,
    pub model_path: PathBuf,
}

fn member_accuracies(model: &EnsembleModel, test: &Dataset) -> MemberAccuracies {
    let mut correct = [0usize; 3];
    for s in test.samples() {
        let standardized = model.scaler().transform(&s.features);
        let knn = predict_knn(model.knn(), &standardized, model.config().knn_k)
            .expect("trained store is non-empty");
        let forest = predict_forest(model.forest(), &standardized);
        let tree = predict_tree(model.tree(), &standardized);
        for (slot, vote) in correct.iter_mut().zip([knn, forest, tree]) {
            *slot += usize::from(vote == s.label);
        }
    }
    let n = test.len() as f64;
    MemberAccuracies {
        knn: correct[0] as f64 / n,
        forest: correct[1] as f64 / n,
        tree: correct[2] as f64 / n,
    }
}

fn evaluate_ensemble(
    model: &EnsembleModel,
    data: &Dataset,
) -> Result<(ConfusionMatrix, MetricsReport)> {
    let preds: Vec<Label> = data
        .samples()
        .iter()
        .map(|s| predict_ensemble(model, &s.features).label)
        .collect();
    let truths: Vec<Label> = data.samples().iter().map(|s| s.label).collect();
    let cm = confusion(&preds, &truths)?;
    Ok((cm, compute_metrics(&cm)?))
}

/// Ingests, splits, extracts features, trains the ensemble, persists the
/// model, and reports train/test metrics.
///
/// Images failing extraction are skipped with their paths recorded; the
/// run aborts when more than 10% of the dataset is skipped.
pub fn run_train(cfg: &RunConfig) -> Result<TrainingReport> {
    let desc = ingest_dataset(&cfg.data_root)?;
    let split = split_dataset(&desc, cfg.split_ratio, cfg.seed)?;

    let (train_samples, skipped_train) = extract_batch(&split.train, &cfg.ensemble.pipeline);
    let (test_samples, skipped_test) = extract_batch(&split.test, &cfg.ensemble.pipeline);
    let mut skipped = skipped_train;
    skipped.extend(skipped_test);
    let total = split.train.len() + split.test.len();
    if skipped.len() * 10 > total {
        return Err(Error::TooManySkipped {
            skipped: skipped.len(),
            total,
        });
    }

    let train_data = Dataset::new(train_samples)?;
    let test_data = Dataset::new(test_samples)?;
    let model = train_ensemble(&train_data, &cfg.ensemble, cfg.seed)?;
    model.save(&cfg.model_out)?;

    let (_, train_metrics) = evaluate_ensemble(&model, &train_data)?;
    let (test_confusion, test_metrics) = evaluate_ensemble(&model, &test_data)?;
    Ok(TrainingReport {
        n_train: train_data.len(),
        n_test: test_data.len(),
        skipped,
        train_metrics,
        test_confusion,
        test_metrics,
        member_test_accuracy: member_accuracies(&model, &test_data),
        model_path: cfg.model_out.clone(),
    })
}

/// Outcome of a [`run_evaluate`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub n_test: usize,
    pub skipped: Vec<SkippedImage>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// Replays the seeded split and scores the model on the test partition.
pub fn run_evaluate(
    model_path: impl AsRef<Path>,
    data_root: impl AsRef<Path>,
    ratio: f64,
    seed: u64,
) -> Result<EvaluationReport> {
    let model = EnsembleModel::load(model_path)?;
    let desc = ingest_dataset(data_root)?;
    let split = split_dataset(&desc, ratio, seed)?;
    let (samples, skipped) = extract_batch(&split.test, &model.config().pipeline);
    if skipped.len() * 10 > split.test.len() {
        return Err(Error::TooManySkipped {
            skipped: skipped.len(),
            total: split.test.len(),
        });
    }
    let data = Dataset::new(samples)?;
    let (cm, metrics) = evaluate_ensemble(&model, &data)?;
    Ok(EvaluationReport {
        n_test: data.len(),
        skipped,
        confusion: cm,
        metrics,
    })
}

/// Outcome of a [`run_predict`] call: the diagnosis plus everything the
/// diagnosis rests on.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub label: Label,
    pub votes: MemberVotes,
    pub features: FeatureVector,
    pub otsu_threshold: u8,
    pub white_pixels: u64,
    pub area_mm2: f64,
}

/// Classifies one image with a trained model and measures its segmented
/// region.
pub fn run_predict(
    model_path: impl AsRef<Path>,
    image_path: impl AsRef<Path>,
) -> Result<PredictionReport> {
    let model = EnsembleModel::load(model_path)?;
    let img = standardize(&load_image(image_path)?);
    let features = extract_features(&img, &model.config().pipeline)?;
    let prediction = predict_ensemble(&model, &features);
    let threshold = otsu_threshold(&histogram(&img))?;
    let area = tumor_area_mm2(&binarize(&img, threshold));
    Ok(PredictionReport {
        label: prediction.label,
        votes: prediction.votes,
        features,
        otsu_threshold: threshold,
        white_pixels: area.white_pixels,
        area_mm2: area.area_mm2,
    })
}

/// Outcome of a [`run_segment`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub otsu_threshold: u8,
    pub white_pixels: u64,
    pub area_mm2: f64,
    pub mask_path: PathBuf,
}

/// Thresholds one image and writes the mask as binary PGM (255 = foreground).
///
/// The input is standardized to 200x200 first, like every other pipeline
/// entry point, so the mask is always 200x200.
pub fn run_segment(
    image_path: impl AsRef<Path>,
    out_path: impl AsRef<Path>,
) -> Result<SegmentReport> {
    let img = standardize(&load_image(image_path)?);
    let threshold = otsu_threshold(&histogram(&img))?;
    let mask = binarize(&img, threshold);
    let out_path = out_path.as_ref().to_path_buf();
    write_pgm(&mask.to_image(), &out_path)?;
    let area = tumor_area_mm2(&mask);
    Ok(SegmentReport {
        otsu_threshold: threshold,
        white_pixels: area.white_pixels,
        area_mm2: area.area_mm2,
        mask_path: out_path,
    })
}

/// Writes a synthetic two-class dataset under `root` in the layout
/// `ingest_dataset` expects. Image `i` of each class derives its content
/// from `seed + i`.
pub fn write_fixture_dataset(
    root: impl AsRef<Path>,
    per_class: usize,
    seed: u64,
) -> Result<DatasetDescription> {
    let root = root.as_ref();
    for (class, label) in [("benign", Label::Benign), ("malignant", Label::Malignant)] {
        let dir = root.join(class);
        std::fs::create_dir_all(&dir).map_err(|source| Error::Write {
            path: dir.clone(),
            source,
        })?;
        for i in 0..per_class {
            let img: GrayImage = generate_fixture(label, seed.wrapping_add(i as u64));
            write_pgm(&img, dir.join(format!("{class}_{i:04}.pgm")))?;
        }
    }
    ingest_dataset(root)
}
