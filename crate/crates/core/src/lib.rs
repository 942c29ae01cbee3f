//! Brain-tumor MRI analysis toolkit.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Segmentation** — Otsu's automatic threshold splits an 8-bit slice
//!    into foreground and background; the white-pixel count of the mask
//!    yields the reported region size ([`segmentation`]).
//! 2. **Feature extraction** — a level-1 stationary wavelet transform
//!    ([`wavelet`]) feeds a PCA rank reduction and a gray-level
//!    co-occurrence matrix, producing 13 texture features per image
//!    ([`features`]).
//! 3. **Classification** — a 1-NN store, a CART decision tree, and a
//!    100-tree bagged forest vote; two-of-three majority decides Benign
//!    vs. Malignant ([`classifiers`]).
//!
//! [`pipeline`] wires the stages into reproducible train/predict/evaluate
//! runs over a `benign/` + `malignant/` directory layout, and
//! [`evaluation`] scores predictions with the usual six summary metrics.
//!
//! The accompanying book (`book/` in the repository) walks through each
//! stage with runnable examples; its code blocks compile and run as part
//! of this crate's doctest suite.

pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod matrix;
pub mod pipeline;
pub mod segmentation;
pub mod wavelet;

pub use error::{Error, Result};

// Compile and run the user guide's code blocks as doctests so the book
// can never drift from the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Segmentation, "../../../book/src/segmentation.md");
    chapter!(Wavelets, "../../../book/src/wavelets.md");
    chapter!(Features, "../../../book/src/features.md");
    chapter!(Classifiers, "../../../book/src/classifiers.md");
    chapter!(Evaluation, "../../../book/src/evaluation.md");
    chapter!(CommandLine, "../../../book/src/cli.md");
}
