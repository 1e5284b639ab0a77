//! Independent reference implementations used to check the library.
//!
//! Everything here recomputes results from first principles (dense
//! arithmetic, brute-force loops, nalgebra factorizations) and must stay
//! independent of the code paths under test.

use kmesn::linalg::{DenseMatrix, SparseMatrix};
use nalgebra::DMatrix;

/// Sparse matrix expanded to a dense row-major table.
pub fn to_dense(m: &SparseMatrix) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; m.cols()]; m.rows()];
    for (r, c, v) in m.triplets() {
        out[r][c] = v;
    }
    out
}

/// Dense matrix-vector product.
pub fn dense_matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Largest eigenvalue modulus via a full dense eigendecomposition.
pub fn eigenvalue_modulus_oracle(m: &SparseMatrix) -> f64 {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    let mut dense = DMatrix::zeros(n, n);
    for (r, c, v) in m.triplets() {
        dense[(r, c)] = v;
    }
    dense
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Solves `X G = B` by explicitly inverting `G` with nalgebra.
pub fn solve_via_inverse_oracle(g: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = g.rows();
    let g_na = DMatrix::from_row_slice(n, n, g.values());
    let inv = g_na.try_inverse().expect("oracle G invertible");
    let b_na = DMatrix::from_row_slice(b.rows(), b.cols(), b.values());
    let x = b_na * inv;
    let mut values = Vec::with_capacity(b.rows() * n);
    for r in 0..b.rows() {
        for c in 0..n {
            values.push(x[(r, c)]);
        }
    }
    DenseMatrix::from_values(b.rows(), n, values).unwrap()
}

/// Ridge regression on explicitly stacked data: forms `S^T S + eps I` from
/// the full state stack and inverts it, following the normal equations
/// directly.
pub fn stacked_ridge_oracle(
    states: &DenseMatrix,
    targets: &DenseMatrix,
    epsilon: f64,
) -> DenseMatrix {
    let t = states.rows();
    let dim = states.cols();
    let n_out = targets.cols();
    assert_eq!(targets.rows(), t);
    let s = DMatrix::from_row_slice(t, dim, states.values());
    let d = DMatrix::from_row_slice(t, n_out, targets.values());
    let mut gram = s.transpose() * &s;
    for i in 0..dim {
        gram[(i, i)] += epsilon;
    }
    let cross = d.transpose() * &s;
    let w = cross * gram.try_inverse().expect("oracle gram invertible");
    let mut values = Vec::with_capacity(n_out * dim);
    for r in 0..n_out {
        for c in 0..dim {
            values.push(w[(r, c)]);
        }
    }
    DenseMatrix::from_values(n_out, dim, values).unwrap()
}

/// Full-batch Lloyd iterations with farthest-point style seeding from the
/// data rows. Asserts the classic monotonicity property: one
/// assignment-plus-recentering step never increases the SSE.
pub fn lloyd_kmeans(x: &DenseMatrix, k: usize, seed: u64, max_iters: usize) -> (Vec<Vec<f64>>, f64) {
    use rand::Rng;
    use rand::SeedableRng;
    let n = x.rows();
    assert!(n >= k);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    // Greedy farthest-point seeding from a random start row.
    let mut centers: Vec<Vec<f64>> = vec![x.row(rng.random_range(0..n)).to_vec()];
    while centers.len() < k {
        let (mut best_i, mut best_d) = (0, -1.0);
        for i in 0..n {
            let d = centers
                .iter()
                .map(|c| dist2(x.row(i), c))
                .fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best_i = i;
            }
        }
        centers.push(x.row(best_i).to_vec());
    }

    let mut prev_sse = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for _ in 0..max_iters {
        let mut sse = 0.0;
        for i in 0..n {
            let (mut best, mut best_d) = (0, dist2(x.row(i), &centers[0]));
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = dist2(x.row(i), center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            labels[i] = best;
            sse += best_d;
        }
        assert!(
            sse <= prev_sse * (1.0 + 1e-12) + 1e-12,
            "Lloyd step increased SSE: {prev_sse} -> {sse}"
        );
        if (prev_sse - sse).abs() <= 1e-15 * sse.max(1.0) {
            prev_sse = sse;
            break;
        }
        prev_sse = sse;

        let mut sums = vec![vec![0.0; x.cols()]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centers[c] = sums[c].clone();
            }
        }
    }
    (centers, prev_sse)
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Brute-force SSE: for every point, scan all centroids.
pub fn sse_oracle(x: &DenseMatrix, centers: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.rows() {
        let mut best = f64::INFINITY;
        for c in centers {
            let d = dist2(x.row(i), c);
            if d < best {
                best = d;
            }
        }
        total += best;
    }
    total
}

/// Counting error-rate oracle.
pub fn error_rate_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let mut wrong = 0usize;
    for i in 0..pred.len() {
        if pred[i] != truth[i] {
            wrong += 1;
        }
    }
    wrong as f64 / pred.len() as f64
}

/// Double-loop MSE oracle.
pub fn mse_oracle(y: &DenseMatrix, d: &DenseMatrix) -> f64 {
    let mut sum = 0.0;
    for r in 0..y.rows() {
        for c in 0..y.cols() {
            let diff = y.get(r, c) - d.get(r, c);
            sum += diff * diff;
        }
    }
    sum / (y.rows() * y.cols()) as f64
}

/// A random sparse matrix with exactly `per_row` entries per row.
pub fn random_sparse(
    rows: usize,
    cols: usize,
    per_row: usize,
    seed: u64,
    gaussian: bool,
) -> SparseMatrix {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let row_entries: Vec<Vec<(usize, f64)>> = (0..rows)
        .map(|_| {
            let mut cols_chosen = rand::seq::index::sample(&mut rng, cols, per_row).into_vec();
            cols_chosen.sort_unstable();
            cols_chosen
                .into_iter()
                .map(|c| {
                    let v: f64 = if gaussian {
                        normal.sample(&mut rng)
                    } else {
                        rng.random_range(-1.0..1.0)
                    };
                    (c, if v == 0.0 { 0.5 } else { v })
                })
                .collect()
        })
        .collect();
    SparseMatrix::from_row_entries(cols, &row_entries).unwrap()
}

/// A random dense matrix with entries uniform in `[-1, 1)`.
pub fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::from_values(rows, cols, values).unwrap()
}

/// A random symmetric positive-definite matrix `A A^T + n I`.
pub fn random_spd(n: usize, seed: u64) -> DenseMatrix {
    let a = random_dense(n, n, seed);
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            for k in 0..n {
                sum += a.get(i, k) * a.get(j, k);
            }
            g.set(i, j, sum + if i == j { n as f64 * 0.05 } else { 0.0 });
        }
    }
    g
}

/// Relative max-abs difference between two equally shaped matrices.
pub fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.cols(), b.cols());
    let scale = b.max_abs().max(1e-300);
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}
