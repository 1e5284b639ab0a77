//! Oracle-backed checks for the linear-algebra kernels.

mod common;

use common::oracles;
use kmesn::linalg::{largest_abs_eigenvalue, solve_spd, DenseMatrix, SparseMatrix};
use proptest::prelude::*;

#[test]
fn spmv_matches_dense_product() {
    let m = oracles::random_sparse(20, 20, 10, 7, false);
    let dense = oracles::to_dense(&m);
    let v = oracles::random_dense(1, 20, 77);
    let got = m.spmv(v.row(0)).unwrap();
    let want = oracles::dense_matvec(&dense, v.row(0));
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn spmv_linearity(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let m = oracles::random_sparse(12, 9, 4, seed, true);
        let u = oracles::random_dense(1, 9, seed ^ 0xAB);
        let v = oracles::random_dense(1, 9, seed ^ 0xCD);
        let combo: Vec<f64> = u.row(0).iter().zip(v.row(0)).map(|(x, y)| a * x + b * y).collect();
        let left = m.spmv(&combo).unwrap();
        let mu = m.spmv(u.row(0)).unwrap();
        let mv = m.spmv(v.row(0)).unwrap();
        let scale = left.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        for i in 0..left.len() {
            let right = a * mu[i] + b * mv[i];
            prop_assert!((left[i] - right).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn eigenvalue_matches_dense_oracle() {
    let m = oracles::random_sparse(50, 50, 10, 3, true);
    let want = oracles::eigenvalue_modulus_oracle(&m);
    let got = largest_abs_eigenvalue(&m, 1e-8, 10_000, 3).unwrap();
    assert!(
        (got - want).abs() <= 1e-6 * want,
        "power iteration {got} vs dense oracle {want}"
    );
}

#[test]
fn eigenvalue_scaling_property() {
    for seed in [1u64, 2, 3, 4, 5] {
        let m = oracles::random_sparse(30, 30, 6, seed, true);
        let base = largest_abs_eigenvalue(&m, 1e-9, 10_000, seed).unwrap();
        for c in [-2.0, 0.5, 3.0] {
            let scaled = m.scaled(c).unwrap();
            let got = largest_abs_eigenvalue(&scaled, 1e-9, 10_000, seed).unwrap();
            let want = c.abs() * base;
            assert!(
                (got - want).abs() <= 1e-6 * want,
                "seed {seed} c {c}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn solve_matches_explicit_inverse() {
    let g = oracles::random_spd(10, 9);
    let b = oracles::random_dense(4, 10, 10);
    let got = solve_spd(&g, &b).unwrap();
    let want = oracles::solve_via_inverse_oracle(&g, &b);
    assert!(oracles::rel_diff(&got, &want) < 1e-9);
}

#[test]
fn solve_residual_up_to_200() {
    for (n, seed) in [(20usize, 1u64), (80, 2), (200, 3)] {
        let g = oracles::random_spd(n, seed);
        let b = oracles::random_dense(3, n, seed ^ 0xF0);
        let x = solve_spd(&g, &b).unwrap();
        // Residual ||X G - B||_inf / ||B||_inf.
        let mut max_res = 0.0f64;
        for r in 0..b.rows() {
            for c in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += x.get(r, k) * g.get(k, c);
                }
                max_res = max_res.max((acc - b.get(r, c)).abs());
            }
        }
        let scale = b.max_abs();
        assert!(
            max_res / scale < 1e-8,
            "n={n}: relative residual {}",
            max_res / scale
        );
    }
}

#[test]
fn solve_spd_shape_checks() {
    let g = oracles::random_spd(4, 0);
    let b = DenseMatrix::zeros(2, 3);
    assert!(solve_spd(&g, &b).is_err());
    let rect = DenseMatrix::zeros(3, 4);
    assert!(solve_spd(&rect, &DenseMatrix::zeros(2, 4)).is_err());
}

#[test]
fn sparse_triplets_round_trip_structure() {
    let m = oracles::random_sparse(15, 8, 3, 99, false);
    let rebuilt = SparseMatrix::from_triplets(15, 8, &m.triplets()).unwrap();
    assert_eq!(m, rebuilt);
}
