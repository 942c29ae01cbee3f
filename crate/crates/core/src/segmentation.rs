//! Otsu's automatic threshold, binary masks, and tumor-area measurement.
//!
//! The threshold `n` splits intensities into class 0 = `[0, n-1]` and
//! class 1 = `[n, 255]` and is chosen to maximize the between-class
//! variance `A0(n) * A1(n) * (mu0(n) - mu1(n))^2`. Ties resolve to the
//! smallest maximizing `n`. Class moments accumulate in integer arithmetic
//! so the variance decomposition holds to near machine precision.

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Number of gray levels.
pub const LEVELS: usize = 256;

/// Physical side of one pixel in the source imagery, in millimeters.
pub const MM_PER_PIXEL: f64 = 0.264;

/// Intensity histogram with exactly 256 bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; LEVELS],
    total: u64,
}

impl Histogram {
    pub fn from_counts(counts: [u64; LEVELS]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64; LEVELS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Counts pixel intensities.
pub fn histogram(img: &GrayImage) -> Histogram {
    let mut counts = [0u64; LEVELS];
    for &p in img.pixels() {
        counts[p as usize] += 1;
    }
    Histogram::from_counts(counts)
}

/// Zeroth/first/second moments of the histogram up to (exclusive) each bin.
struct Moments {
    count: u64,
    sum: u64,
    sum_sq: u64,
}

fn moments_below(hist: &Histogram, n: usize) -> Moments {
    let mut m = Moments {
        count: 0,
        sum: 0,
        sum_sq: 0,
    };
    for (k, &c) in hist.counts.iter().enumerate().take(n) {
        m.count += c;
        m.sum += k as u64 * c;
        m.sum_sq += (k * k) as u64 * c;
    }
    m
}

/// Between-class variance at threshold `n` (class 0 below `n`).
///
/// Zero when either class is empty.
pub fn between_class_variance(hist: &Histogram, n: u8) -> f64 {
    let below = moments_below(hist, n as usize);
    let total = hist.total;
    if below.count == 0 || below.count == total {
        return 0.0;
    }
    let all = moments_below(hist, LEVELS);
    let a0 = below.count as f64 / total as f64;
    let a1 = 1.0 - a0;
    let mu0 = below.sum as f64 / below.count as f64;
    let mu1 = (all.sum - below.sum) as f64 / (total - below.count) as f64;
    a0 * a1 * (mu0 - mu1) * (mu0 - mu1)
}

/// Within-class variance at threshold `n`: `A0*var0 + A1*var1`.
///
/// With one class empty this degenerates to the total variance, so the
/// decomposition `within + between = total` holds for every `n`.
pub fn within_class_variance(hist: &Histogram, n: u8) -> f64 {
    let below = moments_below(hist, n as usize);
    let total = hist.total;
    if below.count == 0 || below.count == total {
        return total_variance(hist);
    }
    let all = moments_below(hist, LEVELS);
    let var_of = |count: u64, sum: u64, sum_sq: u64| {
        let mean = sum as f64 / count as f64;
        sum_sq as f64 / count as f64 - mean * mean
    };
    let a0 = below.count as f64 / total as f64;
    let var0 = var_of(below.count, below.sum, below.sum_sq);
    let var1 = var_of(
        total - below.count,
        all.sum - below.sum,
        all.sum_sq - below.sum_sq,
    );
    a0 * var0 + (1.0 - a0) * var1
}

/// Variance of the full intensity distribution.
pub fn total_variance(hist: &Histogram) -> f64 {
    let all = moments_below(hist, LEVELS);
    if all.count == 0 {
        return 0.0;
    }
    let mean = all.sum as f64 / all.count as f64;
    all.sum_sq as f64 / all.count as f64 - mean * mean
}

/// Picks the threshold maximizing between-class variance.
///
/// Candidates run over `n in [1, 255]`; those leaving a class empty are
/// skipped; ties resolve to the smallest `n`. Errors when all mass sits in
/// one bin, since no split produces two non-empty classes.
pub fn otsu_threshold(hist: &Histogram) -> Result<u8> {
    if hist.total == 0 {
        return Err(Error::EmptyInput);
    }
    let all = moments_below(hist, LEVELS);
    let total = hist.total as f64;
    let grand_sum = all.sum as f64;

    let mut best: Option<(u8, f64)> = None;
    let mut count0 = 0u64;
    let mut sum0 = 0u64;
    for n in 1..LEVELS {
        count0 += hist.counts[n - 1];
        sum0 += (n - 1) as u64 * hist.counts[n - 1];
        if count0 == 0 || count0 == hist.total {
            continue;
        }
        let a0 = count0 as f64 / total;
        let a1 = 1.0 - a0;
        let mu0 = sum0 as f64 / count0 as f64;
        let mu1 = (grand_sum - sum0 as f64) / (hist.total - count0) as f64;
        let sigma_b = a0 * a1 * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|(_, b)| sigma_b > b) {
            best = Some((n as u8, sigma_b));
        }
    }
    let (n, _) = best.ok_or(Error::DegenerateHistogram)?;

    // Mean/probability identities at the chosen threshold.
    let below = moments_below(hist, n as usize);
    let a0 = below.count as f64 / total;
    let a1 = (hist.total - below.count) as f64 / total;
    let mu0 = below.sum as f64 / below.count as f64;
    let mu1 = (all.sum - below.sum) as f64 / (hist.total - below.count) as f64;
    let mu_total = grand_sum / total;
    assert!((a0 + a1 - 1.0).abs() < 1e-9, "class probabilities must sum to 1");
    assert!(
        (a0 * mu0 + a1 * mu1 - mu_total).abs() < 1e-9 * mu_total.max(1.0),
        "class means must recombine to the grand mean"
    );

    Ok(n)
}

/// Per-pixel foreground/background mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    /// Builds a mask from 0/1 values.
    pub fn from_values(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} mask",
                values.len()
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter(
                "mask values must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Per-pixel values, 0 = background and 1 = foreground.
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Renders as an 8-bit image with foreground at 255.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| v * 255).collect(),
        )
        .expect("mask dimensions are valid")
    }
}

/// Marks pixels with intensity `>= n` as foreground.
pub fn binarize(img: &GrayImage, n: u8) -> BinaryMask {
    BinaryMask {
        width: img.width(),
        height: img.height(),
        values: img.pixels().iter().map(|&p| u8::from(p >= n)).collect(),
    }
}

/// White-pixel count and the derived area figure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TumorArea {
    pub white_pixels: u64,
    pub area_mm2: f64,
}

/// Measures the segmented region: `P` white pixels, area `sqrt(P) * 0.264`.
///
/// The formula is the pipeline's reporting contract, kept as is even
/// though `sqrt(pixels) * mm/pixel` is dimensionally a length rather
/// than an area.
pub fn tumor_area_mm2(mask: &BinaryMask) -> TumorArea {
    let white_pixels = mask.values.iter().filter(|&&v| v == 1).count() as u64;
    TumorArea {
        white_pixels,
        area_mm2: (white_pixels as f64).sqrt() * MM_PER_PIXEL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::GrayImage;
    use proptest::prelude::*;

    fn hist_of(pairs: &[(u8, u64)]) -> Histogram {
        let mut counts = [0u64; LEVELS];
        for &(k, c) in pairs {
            counts[k as usize] += c;
        }
        Histogram::from_counts(counts)
    }

    #[test]
    fn histogram_counts_pixels() {
        let img = GrayImage::new(2, 2, vec![0, 0, 255, 7]).unwrap();
        let h = histogram(&img);
        assert_eq!(h.counts()[0], 2);
        assert_eq!(h.counts()[7], 1);
        assert_eq!(h.counts()[255], 1);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn histogram_of_constant_image() {
        let img = GrayImage::new(200, 200, vec![42; 40000]).unwrap();
        let h = histogram(&img);
        assert_eq!(h.counts()[42], 40000);
        assert_eq!(h.total(), 40000);
    }

    #[test]
    fn fifty_fifty_extremes_tie_break_to_one() {
        // Every n in [1,255] gives the same between-class variance.
        let h = hist_of(&[(0, 100), (255, 100)]);
        assert_eq!(otsu_threshold(&h).unwrap(), 1);
    }

    #[test]
    fn two_spikes_split_above_lower_spike() {
        let h = hist_of(&[(10, 30), (200, 70)]);
        // Brute force: sigma_b is constant for n in [11, 200] and smaller
        // outside, so the smallest argmax is 11.
        let oracle = brute_force_otsu(&h).unwrap();
        assert_eq!(oracle, 11);
        assert_eq!(otsu_threshold(&h).unwrap(), oracle);
    }

    #[test]
    fn degenerate_histogram_errors() {
        let h = hist_of(&[(80, 40000)]);
        assert!(matches!(
            otsu_threshold(&h),
            Err(Error::DegenerateHistogram)
        ));
    }

    /// Independent exhaustive search: evaluate the between-class variance
    /// definition at every candidate and take the smallest argmax.
    fn brute_force_otsu(hist: &Histogram) -> Option<u8> {
        let total = hist.total() as f64;
        let mut best: Option<(u8, f64)> = None;
        for n in 1..=255usize {
            let (mut c0, mut s0) = (0.0, 0.0);
            for k in 0..n {
                c0 += hist.counts()[k] as f64;
                s0 += (k * hist.counts()[k] as usize) as f64;
            }
            let (mut c1, mut s1) = (0.0, 0.0);
            for k in n..LEVELS {
                c1 += hist.counts()[k] as f64;
                s1 += (k * hist.counts()[k] as usize) as f64;
            }
            if c0 == 0.0 || c1 == 0.0 {
                continue;
            }
            let (a0, a1) = (c0 / total, c1 / total);
            let diff = s0 / c0 - s1 / c1;
            let sigma_b = a0 * a1 * diff * diff;
            if best.is_none_or(|(_, b)| sigma_b > b) {
                best = Some((n as u8, sigma_b));
            }
        }
        best.map(|(n, _)| n)
    }

    #[test]
    fn matches_brute_force_oracle_on_random_histograms() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let mut counts = [0u64; LEVELS];
            for c in counts.iter_mut() {
                *c = rng.random_range(0..50);
            }
            let h = Histogram::from_counts(counts);
            assert_eq!(otsu_threshold(&h).unwrap(), brute_force_otsu(&h).unwrap());
        }
    }

    #[test]
    fn binarize_threshold_is_inclusive() {
        let img = GrayImage::new(3, 1, vec![0, 154, 200]).unwrap();
        assert_eq!(binarize(&img, 154).values(), &[0, 1, 1]);
    }

    #[test]
    fn binarize_extremes() {
        let img = GrayImage::new(3, 1, vec![0, 100, 254]).unwrap();
        assert!(binarize(&img, 0).values().iter().all(|&v| v == 1));
        assert!(binarize(&img, 255).values().iter().all(|&v| v == 0));
    }

    #[test]
    fn otsu_partition_is_nonempty_both_sides() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let pixels: Vec<u8> = (0..400).map(|_| rng.random()).collect();
            let img = GrayImage::new(20, 20, pixels).unwrap();
            let n = otsu_threshold(&histogram(&img)).unwrap();
            let mask = binarize(&img, n);
            let ones = mask.values().iter().filter(|&&v| v == 1).count();
            assert!(ones > 0 && ones < 400);
        }
    }

    #[test]
    fn area_formula_fixed_points() {
        let zero = BinaryMask {
            width: 2,
            height: 2,
            values: vec![0; 4],
        };
        assert_eq!(
            tumor_area_mm2(&zero),
            TumorArea {
                white_pixels: 0,
                area_mm2: 0.0
            }
        );
        let one = BinaryMask {
            width: 2,
            height: 2,
            values: vec![1, 0, 0, 0],
        };
        assert_eq!(tumor_area_mm2(&one).area_mm2, 0.264);
        let big = BinaryMask {
            width: 200,
            height: 200,
            values: (0..40000).map(|i| u8::from(i < 10000)).collect(),
        };
        let area = tumor_area_mm2(&big);
        assert_eq!(area.white_pixels, 10000);
        // Exactly the double-precision evaluation of sqrt(10000) * 0.264.
        assert_eq!(area.area_mm2, 100.0 * 0.264);
        assert!((area.area_mm2 - 26.4).abs() < 1e-12);
    }

    proptest! {
        /// Scaling all counts by the same factor leaves the argmax unchanged.
        #[test]
        fn otsu_invariant_under_count_scaling(seed in 0u64..500, factor in 2u64..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut counts = [0u64; LEVELS];
            for c in counts.iter_mut() {
                *c = rng.random_range(0..20);
            }
            let h = Histogram::from_counts(counts);
            if let Ok(n) = otsu_threshold(&h) {
                let scaled: [u64; LEVELS] = std::array::from_fn(|i| counts[i] * factor);
                prop_assert_eq!(otsu_threshold(&Histogram::from_counts(scaled)).unwrap(), n);
            }
        }

        /// within + between variance is the total variance at every cut.
        #[test]
        fn variance_decomposition_holds(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut counts = [0u64; LEVELS];
            for c in counts.iter_mut() {
                *c = rng.random_range(0..30);
            }
            let h = Histogram::from_counts(counts);
            let sigma_total = total_variance(&h);
            for n in 0..=255u8 {
                let sum = within_class_variance(&h, n) + between_class_variance(&h, n);
                prop_assert!((sum - sigma_total).abs() < 1e-9,
                    "n={} sum={} total={}", n, sum, sigma_total);
            }
        }
    }
}
