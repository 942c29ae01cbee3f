//! Texture feature extraction: PCA rank reduction of a wavelet subband
//! followed by GLCM and matrix statistics, yielding the 13-element vector
//! every classifier consumes.
//!
//! Principal components come from the variance-maximization view: power
//! iteration finds the leading direction of the scatter matrix, the
//! captured variance is subtracted out, and the search repeats on the
//! deflated matrix for each further component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::matrix::RealMatrix;
use crate::wavelet::{swt2, SwtSubbands, WaveletFilterPair};

/// Number of features in the canonical vector.
pub const FEATURE_COUNT: usize = 13;

/// Canonical feature order used everywhere (model files, CSV output).
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "contrast",
    "correlation",
    "energy",
    "homogeneity",
    "mean",
    "std_dev",
    "kurtosis",
    "skewness",
    "variance",
    "smoothness",
    "idm",
    "rms",
    "entropy",
];

/// The 13 named texture features, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub kurtosis: f64,
    pub skewness: f64,
    pub variance: f64,
    pub smoothness: f64,
    pub idm: f64,
    pub rms: f64,
    pub entropy: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; FEATURE_COUNT] {
        [
            self.contrast,
            self.correlation,
            self.energy,
            self.homogeneity,
            self.mean,
            self.std_dev,
            self.kurtosis,
            self.skewness,
            self.variance,
            self.smoothness,
            self.idm,
            self.rms,
            self.entropy,
        ]
    }

    pub fn from_array(values: [f64; FEATURE_COUNT]) -> Self {
        Self {
            contrast: values[0],
            correlation: values[1],
            energy: values[2],
            homogeneity: values[3],
            mean: values[4],
            std_dev: values[5],
            kurtosis: values[6],
            skewness: values[7],
            variance: values[8],
            smoothness: values[9],
            idm: values[10],
            rms: values[11],
            entropy: values[12],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// PCA

/// Fitted principal-component model.
///
/// `components` are orthonormal rows in feature space, ordered by
/// non-increasing `eigenvalues` (sample-covariance eigenvalues, i.e. the
/// scatter spectrum divided by `rows - 1`).
#[derive(Debug, Clone)]
pub struct PcaModel {
    dim: usize,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Projects rows of `m` onto the retained components (centered scores).
    pub fn project(&self, m: &RealMatrix) -> Result<RealMatrix> {
        if m.cols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} columns, got {}",
                self.dim,
                m.cols()
            )));
        }
        Ok(RealMatrix::from_fn(m.rows(), self.k(), |i, c| {
            let comp = &self.components[c];
            let mut acc = 0.0;
            for d in 0..self.dim {
                acc += (m.get(i, d) - self.mean[d]) * comp[d];
            }
            acc
        }))
    }

    /// Maps scores back to feature space and re-adds the mean.
    pub fn reconstruct(&self, scores: &RealMatrix) -> Result<RealMatrix> {
        if scores.cols() != self.k() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} score columns, got {}",
                self.k(),
                scores.cols()
            )));
        }
        Ok(RealMatrix::from_fn(scores.rows(), self.dim, |i, d| {
            let mut acc = self.mean[d];
            for c in 0..self.k() {
                acc += scores.get(i, c) * self.components[c][d];
            }
            acc
        }))
    }
}

const POWER_MAX_ITERS: usize = 20_000;
const POWER_ALIGN_TOL: f64 = 1e-14;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn mat_vec(s: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
    for (i, row) in s.iter().enumerate() {
        out[i] = dot(row, v);
    }
}

/// Removes the span of `basis` from `v`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let proj = dot(v, b);
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= proj * bi;
        }
    }
}

/// Flips the sign so the largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Leading eigenvector of `s` restricted to the complement of `found`.
///
/// Returns the unit vector and its Rayleigh quotient.
fn dominant_direction(s: &[Vec<f64>], found: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let dim = s.len();
    // Start from the column with the largest diagonal entry; one step of
    // the iteration is already applied this way.
    let mut start = 0;
    for i in 1..dim {
        if s[i][i] > s[start][start] {
            start = i;
        }
    }
    let mut v: Vec<f64> = (0..dim).map(|i| s[i][start]).collect();
    orthogonalize(&mut v, found);
    let n = norm(&v);
    if n <= f64::MIN_POSITIVE {
        // The start column vanished after orthogonalization; fall back to
        // the coordinate axis itself.
        v = vec![0.0; dim];
        v[start] = 1.0;
        orthogonalize(&mut v, found);
        let n2 = norm(&v);
        if n2 <= f64::MIN_POSITIVE {
            return (v, 0.0);
        }
        for x in v.iter_mut() {
            *x /= n2;
        }
    } else {
        for x in v.iter_mut() {
            *x /= n;
        }
    }

    let mut w = vec![0.0; dim];
    for _ in 0..POWER_MAX_ITERS {
        mat_vec(s, &v, &mut w);
        orthogonalize(&mut w, found);
        let wn = norm(&w);
        if wn <= f64::MIN_POSITIVE {
            // v is (numerically) in the null space.
            return (v, 0.0);
        }
        let mut max_delta = 0.0f64;
        // The iterate's sign can oscillate for negative eigenvalues; the
        // scatter matrix is PSD so plain alignment suffices.
        for (wi, &vi) in w.iter().zip(v.iter()) {
            max_delta = max_delta.max((wi / wn - vi).abs());
        }
        for (vi, &wi) in v.iter_mut().zip(w.iter()) {
            *vi = wi / wn;
        }
        if max_delta < POWER_ALIGN_TOL {
            break;
        }
    }
    mat_vec(s, &v, &mut w);
    let lambda = dot(&v, &w).max(0.0);
    (v, lambda)
}

/// Unit vector orthogonal to everything in `found`.
fn orthonormal_completion(dim: usize, found: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for axis in 0..dim {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        orthogonalize(&mut v, found);
        let n = norm(&v);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, v));
        }
    }
    let (n, mut v) = best.expect("dim > 0");
    assert!(n > 0.0, "no orthogonal direction left");
    for x in v.iter_mut() {
        *x /= n;
    }
    v
}

/// Fits PCA with columns as variables and rows as observations.
///
/// Centers each column, then extracts the top-`k` scatter directions by
/// repeated power iteration and deflation. Rank-deficient inputs pad the
/// basis with zero-variance directions so the returned components always
/// form an orthonormal set.
pub fn pca_fit(x: &RealMatrix, k: usize) -> Result<PcaModel> {
    let (rows, cols) = (x.rows(), x.cols());
    if rows < 2 {
        return Err(Error::InvalidParameter(
            "PCA needs at least 2 observation rows".into(),
        ));
    }
    if k == 0 || k > rows.min(cols) {
        return Err(Error::InvalidParameter(format!(
            "k = {k} out of range 1..={}",
            rows.min(cols)
        )));
    }

    let mean: Vec<f64> = (0..cols)
        .map(|c| (0..rows).map(|r| x.get(r, c)).sum::<f64>() / rows as f64)
        .collect();
    let centered = RealMatrix::from_fn(rows, cols, |r, c| x.get(r, c) - mean[c]);

    // Scatter matrix of the centered data.
    let mut scatter = vec![vec![0.0f64; cols]; cols];
    for r in 0..rows {
        let row = centered.row(r);
        for i in 0..cols {
            for j in i..cols {
                scatter[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            scatter[i][j] = scatter[j][i];
        }
    }

    let total_scatter: f64 = (0..cols).map(|i| scatter[i][i]).sum();
    let raw_sum_sq: f64 = x.entries().iter().map(|v| v * v).sum();
    if total_scatter <= 1e-24 * raw_sum_sq.max(1.0) {
        return Err(Error::DegenerateData);
    }
    let rank_floor = total_scatter * 1e-14;

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        let remaining: f64 = (0..cols).map(|i| scatter[i][i]).sum();
        if remaining <= rank_floor {
            let mut v = orthonormal_completion(cols, &components);
            fix_sign(&mut v);
            components.push(v);
            eigenvalues.push(0.0);
            continue;
        }
        let (mut v, lambda) = dominant_direction(&scatter, &components);
        fix_sign(&mut v);
        for i in 0..cols {
            for j in 0..cols {
                scatter[i][j] -= lambda * v[i] * v[j];
            }
        }
        components.push(v);
        eigenvalues.push(lambda / (rows - 1) as f64);
    }

    // Deflation already yields a non-increasing spectrum up to rounding;
    // pair-sort to make the invariant unconditional.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
    let components = order.iter().map(|&i| components[i].clone()).collect();
    let eigenvalues = order.iter().map(|&i| eigenvalues[i]).collect();

    Ok(PcaModel {
        dim: cols,
        mean,
        components,
        eigenvalues,
    })
}

/// Rank-`k` reconstruction of `m`: fit on `m` itself, project, map back.
///
/// The result keeps `m`'s dimensions so spatial statistics (GLCM) can run
/// on the dimensionally reduced matrix.
pub fn pca_reduce_image(m: &RealMatrix, k: usize) -> Result<RealMatrix> {
    let model = pca_fit(m, k)?;
    let scores = model.project(m)?;
    model.reconstruct(&scores)
}

// ---------------------------------------------------------------------------
// GLCM

/// Discrete gray-level matrix produced by [`quantize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMatrix {
    rows: usize,
    cols: usize,
    levels: usize,
    data: Vec<u16>,
}

impl LevelMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.data[row * self.cols + col] as usize
    }

    pub fn values(&self) -> &[u16] {
        &self.data
    }
}

/// Linear equal-width binning of `[min, max]` into `levels` bins.
///
/// The maximum maps to `levels - 1`; a constant matrix maps to all zeros.
pub fn quantize(m: &RealMatrix, levels: usize) -> Result<LevelMatrix> {
    if !(2..=65536).contains(&levels) {
        return Err(Error::InvalidParameter(format!(
            "quantization levels {levels} out of range 2..=65536"
        )));
    }
    let (lo, hi) = (m.min(), m.max());
    let span = hi - lo;
    let data = m
        .entries()
        .iter()
        .map(|&v| {
            if span <= 0.0 {
                0
            } else {
                let bin = ((v - lo) / span * levels as f64).floor() as usize;
                bin.min(levels - 1) as u16
            }
        })
        .collect();
    Ok(LevelMatrix {
        rows: m.rows(),
        cols: m.cols(),
        levels,
        data,
    })
}

/// Normalized gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    q: Vec<f64>,
}

impl Glcm {
    /// Directly wraps a normalized co-occurrence table (row-major,
    /// `levels * levels` entries). Intended for tests and documentation.
    pub fn from_normalized(levels: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != levels * levels {
            return Err(Error::DimensionMismatch(
                "GLCM needs levels^2 entries".into(),
            ));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "GLCM entries must sum to 1".into(),
            ));
        }
        Ok(Self { levels, q })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, t: usize, r: usize) -> f64 {
        self.q[t * self.levels + r]
    }

    pub fn entries(&self) -> &[f64] {
        &self.q
    }
}

/// Counts gray-level pairs at the given `(row, col)` offset and normalizes.
///
/// With `symmetric` the transposed counts are added before normalization,
/// making the matrix exactly symmetric.
pub fn glcm(m: &LevelMatrix, offset: (isize, isize), symmetric: bool) -> Result<Glcm> {
    let (dr, dc) = offset;
    if m.rows() < 2 || m.cols() < 2 {
        return Err(Error::InvalidParameter(
            "GLCM needs a matrix of at least 2x2".into(),
        ));
    }
    if dr == 0 && dc == 0 {
        return Err(Error::InvalidParameter("GLCM offset must be nonzero".into()));
    }
    if dr.unsigned_abs() >= m.rows() || dc.unsigned_abs() >= m.cols() {
        return Err(Error::InvalidParameter(format!(
            "offset ({dr}, {dc}) larger than matrix {}x{}",
            m.rows(),
            m.cols()
        )));
    }

    let levels = m.levels();
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for i in 0..m.rows() {
        let Some(i2) = i.checked_add_signed(dr).filter(|&v| v < m.rows()) else {
            continue;
        };
        for j in 0..m.cols() {
            let Some(j2) = j.checked_add_signed(dc).filter(|&v| v < m.cols()) else {
                continue;
            };
            let (a, b) = (m.get(i, j), m.get(i2, j2));
            counts[a * levels + b] += 1;
            total += 1;
            if symmetric {
                counts[b * levels + a] += 1;
                total += 1;
            }
        }
    }
    let q = counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect();
    Ok(Glcm { levels, q })
}

/// The GLCM-derived members of the feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaralickFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
    /// Computed with the same inverse-difference weighting as
    /// `homogeneity`; the two are kept as separate outputs because the
    /// feature vector carries both slots.
    pub idm: f64,
}

/// Texture statistics over a normalized co-occurrence matrix.
///
/// Correlation uses marginal means and standard deviations, so a purely
/// diagonal GLCM scores exactly 1; a uniform matrix (zero marginal spread)
/// scores 0 by convention.
pub fn haralick_features(g: &Glcm) -> HaralickFeatures {
    let levels = g.levels();
    let mut contrast = 0.0;
    let mut energy = 0.0;
    let mut homogeneity = 0.0;
    let mut mean_t = 0.0;
    let mut mean_r = 0.0;
    for t in 0..levels {
        for r in 0..levels {
            let q = g.get(t, r);
            let diff = t.abs_diff(r) as f64;
            contrast += diff * diff * q;
            energy += q * q;
            homogeneity += q / (1.0 + diff);
            mean_t += t as f64 * q;
            mean_r += r as f64 * q;
        }
    }
    let mut var_t = 0.0;
    let mut var_r = 0.0;
    let mut cov = 0.0;
    for t in 0..levels {
        for r in 0..levels {
            let q = g.get(t, r);
            let dt = t as f64 - mean_t;
            let dr = r as f64 - mean_r;
            var_t += dt * dt * q;
            var_r += dr * dr * q;
            cov += dt * dr * q;
        }
    }
    let denom = var_t.sqrt() * var_r.sqrt();
    let correlation = if denom > 1e-12 { cov / denom } else { 0.0 };
    HaralickFeatures {
        contrast,
        correlation,
        energy,
        homogeneity,
        idm: homogeneity,
    }
}

/// The distribution-statistics members of the feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticalFeatures {
    pub mean: f64,
    pub std_dev: f64,
    pub kurtosis: f64,
    pub skewness: f64,
    pub variance: f64,
    pub smoothness: f64,
    pub rms: f64,
    pub entropy: f64,
}

/// Fixed quantization used for the entropy histogram.
const ENTROPY_LEVELS: usize = 8;

/// Moment statistics over all matrix entries.
///
/// Variance is the population variance; kurtosis is excess kurtosis
/// (Gaussian scores 0); entropy is measured in bits over the entries
/// quantized to 8 equal-width levels. A spread-free matrix gets
/// skewness and kurtosis of 0.
pub fn statistical_features(m: &RealMatrix) -> Result<StatisticalFeatures> {
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "statistics need at least 2 entries".into(),
        ));
    }
    let nf = n as f64;
    let mean = m.entries().iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut sum_sq = 0.0;
    for &v in m.entries() {
        let d = v - mean;
        m2 += d * d;
        sum_sq += v * v;
    }
    let variance = m2 / nf;
    let std_dev = variance.sqrt();
    let (skewness, kurtosis) = if std_dev <= 1e-12 * (mean.abs() + 1.0) {
        (0.0, 0.0)
    } else {
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for &v in m.entries() {
            let z = (v - mean) / std_dev;
            let z3 = z * z * z;
            m3 += z3;
            m4 += z3 * z;
        }
        (m3 / nf, m4 / nf - 3.0)
    };
    let smoothness = 1.0 - 1.0 / (1.0 + variance);
    let rms = (sum_sq / nf).sqrt();

    let quantized = quantize(m, ENTROPY_LEVELS)?;
    let mut hist = [0u64; ENTROPY_LEVELS];
    for &v in quantized.values() {
        hist[v as usize] += 1;
    }
    let entropy = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.log2()
        })
        .sum();

    Ok(StatisticalFeatures {
        mean,
        std_dev,
        kurtosis,
        skewness,
        variance,
        smoothness,
        rms,
        entropy,
    })
}

// ---------------------------------------------------------------------------
// Full extraction pipeline

/// Which wavelet plane feeds the feature stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subband {
    Approximation,
    Horizontal,
    Vertical,
    Diagonal,
}

impl Subband {
    fn select(self, sub: &SwtSubbands) -> &RealMatrix {
        match self {
            Subband::Approximation => &sub.approx,
            Subband::Horizontal => &sub.horizontal,
            Subband::Vertical => &sub.vertical,
            Subband::Diagonal => &sub.diagonal,
        }
    }
}

/// Knobs for the feature-extraction stage, persisted inside trained models
/// so prediction always reproduces the training-time pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub filters: WaveletFilterPair,
    pub subband: Subband,
    pub pca_k: usize,
    pub glcm_levels: usize,
    pub glcm_offset: (isize, isize),
    pub glcm_symmetric: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filters: WaveletFilterPair::haar(),
            subband: Subband::Approximation,
            pca_k: 13,
            glcm_levels: 8,
            glcm_offset: (0, 1),
            glcm_symmetric: true,
        }
    }
}

/// Runs the full wavelet -> PCA -> GLCM/statistics chain on one image.
pub fn extract_features(img: &GrayImage, cfg: &PipelineConfig) -> Result<FeatureVector> {
    let sub = swt2(&img.to_matrix(), &cfg.filters)?;
    let plane = cfg.subband.select(&sub);
    let reduced = pca_reduce_image(plane, cfg.pca_k)?;
    let quantized = quantize(&reduced, cfg.glcm_levels)?;
    let g = glcm(&quantized, cfg.glcm_offset, cfg.glcm_symmetric)?;
    let haralick = haralick_features(&g);
    let stats = statistical_features(&reduced)?;
    Ok(FeatureVector {
        contrast: haralick.contrast,
        correlation: haralick.correlation,
        energy: haralick.energy,
        homogeneity: haralick.homogeneity,
        mean: stats.mean,
        std_dev: stats.std_dev,
        kurtosis: stats.kurtosis,
        skewness: stats.skewness,
        variance: stats.variance,
        smoothness: stats.smoothness,
        idm: haralick.idm,
        rms: stats.rms,
        entropy: stats.entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Label;
    use crate::imaging::generate_fixture;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_fn(rows, cols, |_, _| rng.random_range(-10.0..10.0))
    }

    #[test]
    fn pca_finds_known_direction() {
        // Columns (t, 2t, 0): all variance lies along (1, 2, 0)/sqrt(5).
        let x = RealMatrix::from_fn(10, 3, |r, c| {
            let t = (r + 1) as f64;
            match c {
                0 => t,
                1 => 2.0 * t,
                _ => 0.0,
            }
        });
        let model = pca_fit(&x, 3).unwrap();
        let c0 = &model.components()[0];
        let expected = [1.0 / 5.0f64.sqrt(), 2.0 / 5.0f64.sqrt(), 0.0];
        for (got, want) in c0.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(model.eigenvalues()[1].abs() < 1e-9);
        assert!(model.eigenvalues()[2].abs() < 1e-9);
    }

    #[test]
    fn full_basis_reconstructs_exactly() {
        let x = random_matrix(8, 5, 11);
        let model = pca_fit(&x, 5).unwrap();
        let recon = model.reconstruct(&model.project(&x).unwrap()).unwrap();
        assert!(x.distance(&recon) < 1e-9);
    }

    #[test]
    fn components_are_orthonormal() {
        let x = random_matrix(12, 6, 13);
        let model = pca_fit(&x, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let d = super::dot(&model.components()[i], &model.components()[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eigenvalues_are_sorted() {
        let x = random_matrix(9, 7, 21);
        let model = pca_fit(&x, 7).unwrap();
        for pair in model.eigenvalues().windows(2) {
            assert!(pair[0] >= pair[1] - 1e-12);
        }
        assert!(model.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn constant_data_is_degenerate() {
        let x = RealMatrix::from_fn(6, 4, |_, _| 3.25);
        assert!(matches!(pca_fit(&x, 2), Err(Error::DegenerateData)));
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let x = random_matrix(4, 3, 5);
        assert!(pca_fit(&x, 0).is_err());
        assert!(pca_fit(&x, 4).is_err());
    }

    #[test]
    fn rank_one_matrix_is_fully_captured_by_one_component() {
        let m = RealMatrix::from_fn(8, 8, |i, j| (i + 1) as f64 * (j as f64 - 3.0));
        let reduced = pca_reduce_image(&m, 1).unwrap();
        assert!(m.distance(&reduced) < 1e-7);
    }

    #[test]
    fn full_rank_reduction_is_identity() {
        let m = random_matrix(7, 7, 29);
        let reduced = pca_reduce_image(&m, 7).unwrap();
        assert!(m.distance(&reduced) < 1e-7);
    }

    #[test]
    fn reconstruction_error_shrinks_with_k() {
        let m = random_matrix(10, 10, 31);
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let err = m.distance(&pca_reduce_image(&m, k).unwrap());
            assert!(err <= last + 1e-9);
            last = err;
        }
    }

    #[test]
    fn quantize_endpoints_and_identity() {
        let m = RealMatrix::from_vec(1, 2, vec![0.0, 255.0]);
        assert_eq!(quantize(&m, 8).unwrap().values(), &[0, 7]);

        let constant = RealMatrix::from_fn(3, 3, |_, _| 42.0);
        assert!(quantize(&constant, 8).unwrap().values().iter().all(|&v| v == 0));

        let ramp = RealMatrix::from_vec(1, 8, (0..8).map(|v| v as f64).collect());
        let q = quantize(&ramp, 8).unwrap();
        assert_eq!(q.values(), &[0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn quantize_rejects_silly_level_counts() {
        let m = RealMatrix::from_vec(1, 2, vec![0.0, 1.0]);
        assert!(quantize(&m, 1).is_err());
    }

    fn levels(rows: usize, cols: usize, levels: usize, data: &[u16]) -> LevelMatrix {
        LevelMatrix {
            rows,
            cols,
            levels,
            data: data.to_vec(),
        }
    }

    #[test]
    fn glcm_counts_pairs() {
        // [[0,0],[1,1]] offset (0,1): pairs (0,0) and (1,1).
        let m = levels(2, 2, 2, &[0, 0, 1, 1]);
        let g = glcm(&m, (0, 1), false).unwrap();
        assert_eq!(g.entries(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn symmetric_glcm_adds_transpose() {
        // [[0,1],[0,1]] offset (0,1): pairs (0,1) twice, plus transpose.
        let m = levels(2, 2, 2, &[0, 1, 0, 1]);
        let g = glcm(&m, (0, 1), true).unwrap();
        assert_eq!(g.entries(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn glcm_rejects_bad_offsets() {
        let m = levels(2, 2, 2, &[0, 1, 0, 1]);
        assert!(glcm(&m, (0, 0), true).is_err());
        assert!(glcm(&m, (0, 2), true).is_err());
        assert!(glcm(&m, (-2, 0), true).is_err());
    }

    #[test]
    fn haralick_on_diagonal_glcm() {
        let g = Glcm::from_normalized(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let h = haralick_features(&g);
        assert_eq!(h.contrast, 0.0);
        assert_eq!(h.energy, 0.5);
        assert_eq!(h.homogeneity, 1.0);
        assert_eq!(h.idm, 1.0);
        assert!((h.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haralick_on_antidiagonal_glcm() {
        let g = Glcm::from_normalized(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let h = haralick_features(&g);
        assert_eq!(h.contrast, 1.0);
        assert!((h.correlation + 1.0).abs() < 1e-12);
        assert_eq!(h.homogeneity, 0.5);
    }

    #[test]
    fn haralick_on_uniform_glcm() {
        let g = Glcm::from_normalized(2, vec![0.25; 4]).unwrap();
        let h = haralick_features(&g);
        assert_eq!(h.energy, 0.25);
        assert_eq!(h.contrast, 0.5);

        let single = Glcm::from_normalized(1, vec![1.0]).unwrap();
        assert_eq!(haralick_features(&single).correlation, 0.0);
    }

    #[test]
    fn statistics_on_constant_matrix() {
        let m = RealMatrix::from_fn(2, 2, |_, _| 5.0);
        let s = statistical_features(&m).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.std_dev, 0.0);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.kurtosis, 0.0);
        assert_eq!(s.smoothness, 0.0);
        assert_eq!(s.rms, 5.0);
        assert_eq!(s.entropy, 0.0);
    }

    #[test]
    fn statistics_on_two_point_distribution() {
        let m = RealMatrix::from_vec(2, 2, vec![0.0, 0.0, 255.0, 255.0]);
        let s = statistical_features(&m).unwrap();
        assert!((s.mean - 127.5).abs() < 1e-9);
        assert!((s.variance - 16256.25).abs() < 1e-9);
        assert!((s.std_dev - 127.5).abs() < 1e-9);
        assert!((s.rms - 255.0 / 2.0f64.sqrt()).abs() < 1e-9);
        assert!(s.skewness.abs() < 1e-9);
        assert!((s.kurtosis + 2.0).abs() < 1e-9);
        assert!((s.entropy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_image_fails_feature_extraction() {
        let img = GrayImage::new(32, 32, vec![90; 32 * 32]).unwrap();
        let err = extract_features(&img, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateData));
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = generate_fixture(Label::Malignant, 3);
        let cfg = PipelineConfig::default();
        let a = extract_features(&img, &cfg).unwrap();
        let b = extract_features(&img, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixture_classes_are_separable_in_texture() {
        let cfg = PipelineConfig::default();
        for seed in [7, 21, 99] {
            let benign = extract_features(&generate_fixture(Label::Benign, seed), &cfg).unwrap();
            let malignant =
                extract_features(&generate_fixture(Label::Malignant, seed), &cfg).unwrap();
            assert!(
                malignant.contrast > benign.contrast,
                "seed {seed}: contrast {} vs {}",
                malignant.contrast,
                benign.contrast
            );
            assert!(
                malignant.entropy > benign.entropy,
                "seed {seed}: entropy {} vs {}",
                malignant.entropy,
                benign.entropy
            );
        }
    }

    #[test]
    fn feature_vector_invariants_hold_on_fixtures() {
        let cfg = PipelineConfig::default();
        for (class, seed) in [(Label::Benign, 4u64), (Label::Malignant, 4u64)] {
            let f = extract_features(&generate_fixture(class, seed), &cfg).unwrap();
            assert!(f.is_finite());
            assert!(f.energy >= 0.0 && f.energy <= 1.0);
            assert!(f.homogeneity > 0.0 && f.homogeneity <= 1.0);
            assert!(f.idm > 0.0 && f.idm <= 1.0);
            assert_eq!(f.homogeneity, f.idm);
            assert!(f.entropy >= 0.0);
            assert!(f.variance >= 0.0);
            assert!((f.std_dev - f.variance.sqrt()).abs() < 1e-9);
            assert!(f.smoothness >= 0.0 && f.smoothness < 1.0);
        }
    }

    proptest! {
        #[test]
        fn glcm_always_normalized(seed in 0u64..200, symmetric: bool) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (rows, cols) = (rng.random_range(2..9), rng.random_range(2..9));
            let data: Vec<u16> = (0..rows * cols).map(|_| rng.random_range(0..4)).collect();
            let m = LevelMatrix { rows, cols, levels: 4, data };
            let g = glcm(&m, (0, 1), symmetric).unwrap();
            let sum: f64 = g.entries().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            if symmetric {
                for t in 0..4 {
                    for r in 0..4 {
                        prop_assert_eq!(g.get(t, r), g.get(r, t));
                    }
                }
            }
        }

        #[test]
        fn statistics_respect_affine_maps(seed in 0u64..100, a in -3.0f64..3.0, b in -50.0f64..50.0) {
            prop_assume!(a.abs() > 0.05);
            let m = random_matrix(6, 6, seed);
            let mapped = m.map(|v| a * v + b);
            let s = statistical_features(&m).unwrap();
            let t = statistical_features(&mapped).unwrap();
            let scale = s.std_dev.max(1.0);
            prop_assert!((t.mean - (a * s.mean + b)).abs() < 1e-9 * (a.abs() * scale + b.abs() + 1.0));
            prop_assert!((t.std_dev - a.abs() * s.std_dev).abs() < 1e-9 * a.abs() * scale);
            prop_assert!((t.skewness - a.signum() * s.skewness).abs() < 1e-9);
            prop_assert!((t.kurtosis - s.kurtosis).abs() < 1e-9);
        }

        #[test]
        fn contrast_zero_iff_diagonal(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let levels = 3usize;
            let mut q = vec![0.0; levels * levels];
            for v in q.iter_mut() {
                *v = rng.random_range(0.0..1.0);
            }
            let sum: f64 = q.iter().sum();
            for v in q.iter_mut() {
                *v /= sum;
            }
            let g = Glcm { levels, q: q.clone() };
            let h = haralick_features(&g);
            let off_diagonal_mass: f64 = (0..levels)
                .flat_map(|t| (0..levels).map(move |r| (t, r)))
                .filter(|&(t, r)| t != r)
                .map(|(t, r)| q[t * levels + r])
                .sum();
            prop_assert_eq!(h.contrast == 0.0, off_diagonal_mass == 0.0);
        }
    }
}
