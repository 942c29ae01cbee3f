//! Single-level 2-D stationary (undecimated) wavelet transform.
//!
//! Rows and columns are filtered separately with periodic boundary
//! extension and no downsampling, so all four output planes keep the
//! input's dimensions and the transform commutes with circular shifts.
//! Filters apply in correlation form: output index `n` accumulates
//! `sum_k f[k] * x[(n + k) mod len]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// Analysis filter pair: equal-length low-pass and high-pass taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletFilterPair {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl WaveletFilterPair {
    /// Haar pair: `lo = [1/sqrt(2), 1/sqrt(2)]`, `hi = [1/sqrt(2), -1/sqrt(2)]`.
    pub fn haar() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            lo: vec![h, h],
            hi: vec![h, -h],
        }
    }

    /// Custom pair. Lengths must match, be even, and at least 2. Perfect
    /// reconstruction through [`iswt2`] additionally needs the pair to be
    /// orthonormal with `hi` the quadrature mirror of `lo`.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() < 2 || !lo.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "filter taps must have equal, even lengths >= 2".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    /// Checks `sum lo^2 = 1`, `sum hi^2 = 1`, `sum lo*hi = 0` within `tol`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        (dot(&self.lo, &self.lo) - 1.0).abs() < tol
            && (dot(&self.hi, &self.hi) - 1.0).abs() < tol
            && dot(&self.lo, &self.hi).abs() < tol
    }
}

/// The four undecimated coefficient planes of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct SwtSubbands {
    /// Low/low plane.
    pub approx: RealMatrix,
    /// Low-pass rows, high-pass columns.
    pub horizontal: RealMatrix,
    /// High-pass rows, low-pass columns.
    pub vertical: RealMatrix,
    /// High/high plane.
    pub diagonal: RealMatrix,
}

/// Correlation along each row: `out[i][j] = sum_k f[k] * m[i][(j+k) % cols]`.
fn filter_rows(m: &RealMatrix, f: &[f64]) -> RealMatrix {
    let cols = m.cols();
    RealMatrix::from_fn(m.rows(), cols, |i, j| {
        let mut acc = 0.0;
        for (k, &fk) in f.iter().enumerate() {
            acc += fk * m.get(i, (j + k) % cols);
        }
        acc
    })
}

fn filter_cols(m: &RealMatrix, f: &[f64]) -> RealMatrix {
    let rows = m.rows();
    RealMatrix::from_fn(rows, m.cols(), |i, j| {
        let mut acc = 0.0;
        for (k, &fk) in f.iter().enumerate() {
            acc += fk * m.get((i + k) % rows, j);
        }
        acc
    })
}

/// Adjoint of [`filter_rows`]: `out[i][j] = sum_k f[k] * m[i][(j-k) mod cols]`.
fn adjoint_rows(m: &RealMatrix, f: &[f64]) -> RealMatrix {
    let cols = m.cols();
    RealMatrix::from_fn(m.rows(), cols, |i, j| {
        let mut acc = 0.0;
        for (k, &fk) in f.iter().enumerate() {
            acc += fk * m.get(i, (j + cols - k % cols) % cols);
        }
        acc
    })
}

fn adjoint_cols(m: &RealMatrix, f: &[f64]) -> RealMatrix {
    let rows = m.rows();
    RealMatrix::from_fn(rows, m.cols(), |i, j| {
        let mut acc = 0.0;
        for (k, &fk) in f.iter().enumerate() {
            acc += fk * m.get((i + rows - k % rows) % rows, j);
        }
        acc
    })
}

/// Level-1 stationary wavelet decomposition of a real matrix.
pub fn swt2(input: &RealMatrix, filters: &WaveletFilterPair) -> Result<SwtSubbands> {
    if input.cols() < filters.len() || input.rows() < filters.len() {
        return Err(Error::ImageSmallerThanFilter {
            width: input.cols(),
            height: input.rows(),
            filter_len: filters.len(),
        });
    }
    let rows_lo = filter_rows(input, &filters.lo);
    let rows_hi = filter_rows(input, &filters.hi);
    Ok(SwtSubbands {
        approx: filter_cols(&rows_lo, &filters.lo),
        horizontal: filter_cols(&rows_lo, &filters.hi),
        vertical: filter_cols(&rows_hi, &filters.lo),
        diagonal: filter_cols(&rows_hi, &filters.hi),
    })
}

/// Inverse of [`swt2`] for orthonormal quadrature-mirror pairs.
///
/// Each branch is pushed back through the adjoint of its analysis filters;
/// averaging with weight 1/4 undoes the fourfold redundancy.
pub fn iswt2(sub: &SwtSubbands, filters: &WaveletFilterPair) -> Result<RealMatrix> {
    let (rows, cols) = (sub.approx.rows(), sub.approx.cols());
    for plane in [&sub.horizontal, &sub.vertical, &sub.diagonal] {
        if plane.rows() != rows || plane.cols() != cols {
            return Err(Error::DimensionMismatch(
                "subband planes must share dimensions".into(),
            ));
        }
    }
    let a = adjoint_rows(&adjoint_cols(&sub.approx, &filters.lo), &filters.lo);
    let h = adjoint_rows(&adjoint_cols(&sub.horizontal, &filters.hi), &filters.lo);
    let v = adjoint_rows(&adjoint_cols(&sub.vertical, &filters.lo), &filters.hi);
    let d = adjoint_rows(&adjoint_cols(&sub.diagonal, &filters.hi), &filters.hi);
    Ok(RealMatrix::from_fn(rows, cols, |i, j| {
        0.25 * (a.get(i, j) + h.get(i, j) + v.get(i, j) + d.get(i, j))
    }))
}
