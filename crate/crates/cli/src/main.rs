//! `tumorscan` — train, evaluate, and apply the brain-tumor MRI pipeline
//! from the command line.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tumorscan::evaluation::{ConfusionMatrix, MetricsReport};
use tumorscan::features::{FeatureVector, FEATURE_NAMES};
use tumorscan::imaging::write_pgm;
use tumorscan::pipeline::{
    ingest_dataset, run_evaluate, run_predict, run_segment, run_train, RunConfig, TrainingReport,
};
use tumorscan::Result;

#[derive(Parser)]
#[command(
    name = "tumorscan",
    version,
    about = "Brain-tumor MRI segmentation, texture features, and ensemble classification",
    after_help = "Dataset layout: <root>/benign/*.{pgm,png} and <root>/malignant/*.{pgm,png}.\n\
                  Every image is resized to 200x200 before processing."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Train the KNN + forest + tree voting ensemble on a dataset
    Train {
        /// Dataset root containing benign/ and malignant/
        #[arg(long)]
        data: PathBuf,
        /// Where to write the trained model (JSON)
        #[arg(long)]
        model: PathBuf,
        /// RNG seed for the split and the forest bootstrap
        #[arg(long)]
        seed: u64,
        /// Fraction of each class used for training
        #[arg(long, default_value_t = 0.85)]
        split: f64,
        /// Trees in the random forest
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Principal components kept in the feature pipeline
        #[arg(long = "pca-k", default_value_t = 13)]
        pca_k: usize,
        /// Gray levels for the co-occurrence matrix
        #[arg(long = "glcm-levels", default_value_t = 8)]
        glcm_levels: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify one image with a trained model
    Predict {
        #[arg(long)]
        model: PathBuf,
        image: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model on the test partition of a dataset
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Seed that reproduces the training-time split
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.85)]
        split: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold one image and write the binary mask as PGM
    Segment {
        image: PathBuf,
        /// Mask output path (binary PGM, 255 = foreground)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the 13 texture features of one image as CSV
    Features {
        image: PathBuf,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic two-class dataset
    GenFixtures {
        /// Dataset root to create
        #[arg(long)]
        out: PathBuf,
        /// Images per class
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn emit(report: String, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, report).map_err(|source| tumorscan::Error::Write {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            data,
            model,
            seed,
            split,
            trees,
            pca_k,
            glcm_levels,
            format,
            out,
        } => {
            let mut cfg = RunConfig::new(data, model, seed);
            cfg.split_ratio = split;
            cfg.ensemble.n_trees = trees;
            cfg.ensemble.pipeline.pca_k = pca_k;
            cfg.ensemble.pipeline.glcm_levels = glcm_levels;
            let report = run_train(&cfg)?;
            for skipped in &report.skipped {
                eprintln!("skipped {}: {}", skipped.path.display(), skipped.reason);
            }
            emit(render_training(&report, format), out.as_ref())
        }
        Command::Predict {
            model,
            image,
            format,
            out,
        } => {
            let report = run_predict(&model, &image)?;
            let rendered = match format {
                Format::Text => {
                    let mut s = String::new();
                    let _ = writeln!(s, "prediction: {}", report.label);
                    let _ = writeln!(
                        s,
                        "votes: knn={} forest={} tree={}",
                        report.votes.knn, report.votes.forest, report.votes.tree
                    );
                    let _ = writeln!(s, "otsu threshold: {}", report.otsu_threshold);
                    let _ = writeln!(s, "white pixels: {}", report.white_pixels);
                    let _ = writeln!(s, "area: {} mm^2", report.area_mm2);
                    let _ = writeln!(s, "features:");
                    for (name, value) in FEATURE_NAMES.iter().zip(report.features.to_array()) {
                        let _ = writeln!(s, "  {name:<12} {value}");
                    }
                    s
                }
                Format::Csv => {
                    let mut header =
                        String::from("label,vote_knn,vote_forest,vote_tree,otsu_threshold,white_pixels,area_mm2");
                    for name in FEATURE_NAMES {
                        let _ = write!(header, ",{name}");
                    }
                    let mut row = format!(
                        "{},{},{},{},{},{},{}",
                        report.label,
                        report.votes.knn,
                        report.votes.forest,
                        report.votes.tree,
                        report.otsu_threshold,
                        report.white_pixels,
                        report.area_mm2
                    );
                    for value in report.features.to_array() {
                        let _ = write!(row, ",{value}");
                    }
                    format!("{header}\n{row}\n")
                }
            };
            emit(rendered, out.as_ref())
        }
        Command::Evaluate {
            model,
            data,
            seed,
            split,
            format,
            out,
        } => {
            let report = run_evaluate(&model, &data, split, seed)?;
            for skipped in &report.skipped {
                eprintln!("skipped {}: {}", skipped.path.display(), skipped.reason);
            }
            let rendered = match format {
                Format::Text => {
                    let mut s = format!("test images: {}\n", report.n_test);
                    s.push_str(&render_confusion(&report.confusion));
                    s.push_str(&render_metrics_text(&report.metrics));
                    s
                }
                Format::Csv => render_metrics_csv(&report.metrics),
            };
            emit(rendered, out.as_ref())
        }
        Command::Segment { image, out, format } => {
            let report = run_segment(&image, &out)?;
            let rendered = match format {
                Format::Text => format!(
                    "otsu threshold: {}\nwhite pixels: {}\narea: {} mm^2\nmask written to {}\n",
                    report.otsu_threshold,
                    report.white_pixels,
                    report.area_mm2,
                    report.mask_path.display()
                ),
                Format::Csv => format!(
                    "otsu_threshold,white_pixels,area_mm2\n{},{},{}\n",
                    report.otsu_threshold, report.white_pixels, report.area_mm2
                ),
            };
            print!("{rendered}");
            Ok(())
        }
        Command::Features { image, out } => {
            let features = tumorscan::pipeline::image_features(
                &image,
                &tumorscan::features::PipelineConfig::default(),
            )?;
            emit(render_features_csv(&features), out.as_ref())
        }
        Command::GenFixtures { out, count, seed } => {
            use tumorscan::classifiers::Label;
            use tumorscan::imaging::generate_fixture;
            for (class, label) in [("benign", Label::Benign), ("malignant", Label::Malignant)] {
                let dir = out.join(class);
                std::fs::create_dir_all(&dir).map_err(|source| tumorscan::Error::Write {
                    path: dir.clone(),
                    source,
                })?;
                for i in 0..count {
                    let img = generate_fixture(label, seed.wrapping_add(i as u64));
                    write_pgm(&img, dir.join(format!("{class}_{i:04}.pgm")))?;
                }
            }
            let desc = ingest_dataset(&out)?;
            println!(
                "wrote {} benign + {} malignant fixtures under {}",
                desc.benign.len(),
                desc.malignant.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn render_features_csv(features: &FeatureVector) -> String {
    let header = FEATURE_NAMES.join(",");
    let row = features
        .to_array()
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    format!("{header}\n{row}\n")
}

fn render_confusion(cm: &ConfusionMatrix) -> String {
    format!(
        "confusion matrix (positive = Benign):\n\
         \x20                    predicted Benign  predicted Malignant\n\
         \x20 actual Benign    {:>18}  {:>19}\n\
         \x20 actual Malignant {:>18}  {:>19}\n",
        cm.true_positive, cm.false_negative, cm.false_positive, cm.true_negative
    )
}

fn render_metrics_text(m: &MetricsReport) -> String {
    let mut s = String::from("metrics:\n");
    let _ = writeln!(s, "  accuracy     {:.6}", m.accuracy);
    let _ = writeln!(s, "  precision    {:.6}", m.precision);
    let _ = writeln!(s, "  sensitivity  {:.6}", m.sensitivity);
    let _ = writeln!(s, "  specificity  {:.6}", m.specificity);
    let _ = writeln!(s, "  f1_score     {:.6}", m.f1_score);
    let _ = writeln!(s, "  youden_index {:.6}", m.youden_index);
    if m.degenerate {
        let _ = writeln!(s, "  (some ratios had zero denominators and report 0)");
    }
    s
}

fn render_metrics_csv(m: &MetricsReport) -> String {
    format!(
        "accuracy,precision,sensitivity,specificity,f1_score,youden_index\n{},{},{},{},{},{}\n",
        m.accuracy, m.precision, m.sensitivity, m.specificity, m.f1_score, m.youden_index
    )
}

fn render_training(report: &TrainingReport, format: Format) -> String {
    match format {
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "training images: {}   test images: {}   skipped: {}",
                report.n_train,
                report.n_test,
                report.skipped.len()
            );
            let _ = writeln!(s, "train accuracy: {:.6}", report.train_metrics.accuracy);
            let _ = writeln!(
                s,
                "member test accuracy: knn {:.6}  forest {:.6}  tree {:.6}",
                report.member_test_accuracy.knn,
                report.member_test_accuracy.forest,
                report.member_test_accuracy.tree
            );
            s.push_str("test ");
            s.push_str(&render_confusion(&report.test_confusion));
            s.push_str("test ");
            s.push_str(&render_metrics_text(&report.test_metrics));
            let _ = writeln!(s, "model written to {}", report.model_path.display());
            s
        }
        Format::Csv => format!(
            "n_train,n_test,skipped,train_accuracy,test_accuracy,test_precision,test_sensitivity,test_specificity,test_f1,test_youden,knn_test_accuracy,forest_test_accuracy,tree_test_accuracy\n\
             {},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            report.n_train,
            report.n_test,
            report.skipped.len(),
            report.train_metrics.accuracy,
            report.test_metrics.accuracy,
            report.test_metrics.precision,
            report.test_metrics.sensitivity,
            report.test_metrics.specificity,
            report.test_metrics.f1_score,
            report.test_metrics.youden_index,
            report.member_test_accuracy.knn,
            report.member_test_accuracy.forest,
            report.member_test_accuracy.tree
        ),
    }
}
