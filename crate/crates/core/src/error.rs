//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Undecodable or truncated image data.
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// `width * height` does not fit in memory arithmetic.
    #[error("dimension overflow: {width}x{height}")]
    DimensionOverflow { width: usize, height: usize },

    /// A caller passed an argument outside an operation's domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// All histogram mass sits in a single bin; no threshold separates
    /// two non-empty classes.
    #[error("degenerate histogram: all mass in one bin")]
    DegenerateHistogram,

    /// Input raster is smaller than the wavelet filter.
    #[error("image smaller than filter ({width}x{height} vs length {filter_len})")]
    ImageSmallerThanFilter {
        width: usize,
        height: usize,
        filter_len: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Zero covariance; PCA has no direction of variance to find.
    #[error("degenerate data: zero covariance")]
    DegenerateData,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("single-class dataset")]
    SingleClassDataset,

    /// Model file is corrupt or written by an incompatible release.
    #[error("unsupported model version: {0}")]
    UnsupportedModelVersion(String),

    #[error("missing class directory: {0}")]
    MissingClassDirectory(PathBuf),

    #[error("class directory {0} contains no images")]
    EmptyClass(PathBuf),

    #[error("class {class} has only {count} images; at least {required} required")]
    ClassTooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("prediction/truth length mismatch: {preds} vs {truths}")]
    LengthMismatch { preds: usize, truths: usize },

    #[error("empty input")]
    EmptyInput,

    /// More than the tolerated fraction of images failed feature extraction.
    #[error("{skipped} of {total} images failed feature extraction (over the 10% tolerance)")]
    TooManySkipped { skipped: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
