//! Shared test oracles, written independently of the library's own
//! numerical paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tumorscan::matrix::RealMatrix;

pub fn random_matrix(rows: usize, cols: usize, seed: u64, lo: f64, hi: f64) -> RealMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Column-centered scatter matrix `Xc^T Xc`, computed with plain loops.
pub fn centered_scatter(x: &RealMatrix) -> Vec<Vec<f64>> {
    let (rows, cols) = (x.rows(), x.cols());
    let mut mean = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            mean[c] += x.get(r, c);
        }
    }
    for m in mean.iter_mut() {
        *m /= rows as f64;
    }
    let mut s = vec![vec![0.0; cols]; cols];
    for r in 0..rows {
        for i in 0..cols {
            for j in 0..cols {
                s[i][j] += (x.get(r, i) - mean[i]) * (x.get(r, j) - mean[j]);
            }
        }
    }
    s
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in non-increasing order with their eigenvectors as
/// rows. Independent of the library's power-iteration path.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    // V accumulates the rotations; columns end up as eigenvectors.
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k][p];
                    let akq = m[k][q];
                    m[k][p] = c * akp - s * akq;
                    m[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p][k];
                    let aqk = m[q][k];
                    m[p][k] = c * apk - s * aqk;
                    m[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

#[allow(dead_code)]
pub fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}
