//! Minimal dense/sparse linear algebra kernels.
//!
//! Covers exactly what the reservoir pipeline needs: a row-major dense
//! matrix, a compressed-row sparse matrix with sparse matrix-vector
//! products, dominant-eigenvalue-modulus estimation, and symmetric
//! positive-definite solves. Everything is immutable after construction
//! and safe to share across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseMatrixRepr")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct DenseMatrixRepr {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TryFrom<DenseMatrixRepr> for DenseMatrix {
    type Error = Error;

    fn try_from(repr: DenseMatrixRepr) -> Result<Self> {
        DenseMatrix::from_values(repr.rows, repr.cols, repr.values)
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major values, checking length and finiteness.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {}x{}={} values, got {}",
                rows,
                cols,
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_values(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(value.is_finite());
        self.values[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute entry; 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "vstack: {} vs {} columns",
                self.cols, other.cols
            )));
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(&other.values);
        Ok(DenseMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            values,
        })
    }
}

/// Compressed-row sparse matrix.
///
/// Construction rejects duplicate coordinates, out-of-range indices, and
/// zero or non-finite values, so the stored structure is always canonical:
/// entries sorted by (row, col) with one value per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SparseMatrixRepr", try_from = "SparseMatrixRepr")]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SparseMatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl From<SparseMatrix> for SparseMatrixRepr {
    fn from(m: SparseMatrix) -> Self {
        let entries = m.triplets();
        SparseMatrixRepr {
            rows: m.rows,
            cols: m.cols,
            entries,
        }
    }
}

impl TryFrom<SparseMatrixRepr> for SparseMatrix {
    type Error = Error;

    fn try_from(repr: SparseMatrixRepr) -> Result<Self> {
        SparseMatrix::from_triplets(repr.rows, repr.cols, &repr.entries)
    }
}

impl SparseMatrix {
    /// A matrix with no stored entries.
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from (row, col, value) triplets in any order.
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for &(r, c, v) in entries {
            if r >= rows || c >= cols {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() || v == 0.0 {
                return Err(Error::Config(format!(
                    "sparse entry ({r}, {c}) must be finite and non-zero, got {v}"
                )));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for pair in sorted.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::Config(format!(
                    "duplicate sparse entry at ({}, {})",
                    pair[0].0, pair[0].1
                )));
            }
        }

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &sorted {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = sorted.iter().map(|e| e.1).collect();
        let values = sorted.iter().map(|e| e.2).collect();
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from per-row `(col, value)` lists; row order is preserved.
    pub fn from_row_entries(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let triplets: Vec<(usize, usize, f64)> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, entries)| entries.iter().map(move |&(c, v)| (r, c, v)))
            .collect();
        Self::from_triplets(rows.len(), cols, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    pub fn row_entries(&self, row: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Entries as (row, col, value) triplets in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (cols, vals) = self.row_entries(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.push((r, c, v));
            }
        }
        out
    }

    /// Returns the matrix with every stored value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<SparseMatrix> {
        if !factor.is_finite() || factor == 0.0 {
            return Err(Error::Config(format!(
                "scale factor must be finite and non-zero, got {factor}"
            )));
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        Ok(out)
    }

    /// Sparse matrix-vector product `M·v`.
    pub fn spmv(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "spmv: vector length {} vs {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.spmv_into(v, &mut out);
        Ok(out)
    }

    /// Same as [`spmv`](Self::spmv) but writing into a caller-owned buffer.
    /// Lengths are assumed correct.
    #[inline]
    pub fn spmv_into(&self, v: &[f64], out: &mut [f64]) {
        for r in 0..self.rows {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[i] * v[self.col_idx[i]];
            }
            out[r] = acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Krylov subspace dimension for the eigenvalue estimator.
const ARNOLDI_DIM: usize = 30;
/// Squaring steps when reading the dominant modulus off the projected
/// matrix; each step doubles the effective power.
const SQUARINGS: usize = 60;

struct ArnoldiRun {
    /// Square part of the Hessenberg projection, `k x k` row-major.
    h: Vec<Vec<f64>>,
    /// Orthonormal Krylov basis vectors.
    basis: Vec<Vec<f64>>,
    /// Matrix-vector applications consumed.
    applications: usize,
}

/// Builds a Krylov basis of dimension up to `dim` by the Arnoldi process
/// with one reorthogonalization pass. Stops early on breakdown (an exact
/// invariant subspace).
fn arnoldi(m: &SparseMatrix, v0: &[f64], dim: usize) -> ArnoldiRun {
    let n = m.rows;
    let mut basis: Vec<Vec<f64>> = vec![v0.to_vec()];
    let mut h = vec![vec![0.0; dim]; dim];
    let mut applications = 0;
    let mut w = vec![0.0; n];
    for j in 0..dim {
        m.spmv_into(&basis[j], &mut w);
        applications += 1;
        let scale = norm(&w);
        for (i, q) in basis.iter().enumerate() {
            let hij = dot(&w, q);
            h[i][j] = hij;
            for (wx, qx) in w.iter_mut().zip(q) {
                *wx -= hij * qx;
            }
        }
        for (i, q) in basis.iter().enumerate() {
            let c = dot(&w, q);
            h[i][j] += c;
            for (wx, qx) in w.iter_mut().zip(q) {
                *wx -= c * qx;
            }
        }
        let rem = norm(&w);
        if j + 1 == dim || rem <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            let k = j + 1;
            h.truncate(k);
            for row in &mut h {
                row.truncate(k);
            }
            return ArnoldiRun {
                h,
                basis,
                applications,
            };
        }
        let next: Vec<f64> = w.iter().map(|x| x / rem).collect();
        h[j + 1][j] = rem;
        basis.push(next);
    }
    unreachable!("loop returns at j + 1 == dim")
}

/// Spectral radius of a small dense matrix by normalized repeated
/// squaring (Gelfand's formula): insensitive to complex conjugate
/// dominant pairs. Also returns the dominant column of the final iterate,
/// which spans the dominant invariant subspace and serves as a restart
/// direction.
fn small_spectral_radius(h: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let k = h.len();
    let frob = |m: &[Vec<f64>]| -> f64 {
        m.iter()
            .flat_map(|row| row.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    };
    let mut e1 = vec![0.0; k];
    e1[0] = 1.0;

    let scale = frob(h);
    if scale == 0.0 {
        return (0.0, e1);
    }
    let mut m: Vec<Vec<f64>> = h
        .iter()
        .map(|row| row.iter().map(|v| v / scale).collect())
        .collect();
    let mut log_radius = scale.ln();
    let mut sq = vec![vec![0.0; k]; k];
    for j in 1..=SQUARINGS {
        for (r, out_row) in sq.iter_mut().enumerate() {
            for (c, out) in out_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, m_row) in m.iter().enumerate() {
                    acc += m[r][i] * m_row[c];
                }
                *out = acc;
            }
        }
        let c = frob(&sq);
        if c == 0.0 {
            // Nilpotent projection: dominant modulus is zero.
            return (0.0, e1);
        }
        log_radius += c.ln() / 2f64.powi(j as i32);
        for (m_row, sq_row) in m.iter_mut().zip(&sq) {
            for (mv, sv) in m_row.iter_mut().zip(sq_row) {
                *mv = sv / c;
            }
        }
    }

    let mut best_col = 0;
    let mut best_norm = -1.0;
    for c in 0..k {
        let col_norm: f64 = m.iter().map(|row| row[c] * row[c]).sum();
        if col_norm > best_norm {
            best_norm = col_norm;
            best_col = c;
        }
    }
    let column = m.iter().map(|row| row[best_col]).collect();
    (log_radius.exp(), column)
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let nv = norm(&v);
        if nv > 0.0 {
            return v.iter().map(|x| x / nv).collect();
        }
    }
}

/// Estimates `max |lambda_i(M)|` for a square sparse matrix.
///
/// Restarted Arnoldi iteration: project onto a Krylov subspace, read the
/// dominant eigenvalue modulus of the small projection off normalized
/// repeated squaring, and restart from the dominant direction. Converged
/// when two successive restart estimates differ by less than `tol`
/// relative; `max_iter` caps the total matrix-vector applications.
pub fn largest_abs_eigenvalue(
    m: &SparseMatrix,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<f64> {
    if m.rows != m.cols {
        return Err(Error::Dimension(format!(
            "eigenvalue of non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    if m.nnz() == 0 {
        return Err(Error::DegenerateSpectrum("all-zero matrix".into()));
    }

    let n = m.rows;
    let dim = ARNOLDI_DIM.min(n).min(max_iter);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_unit(&mut rng, n);
    let mut prev = f64::NAN;
    let mut used = 0usize;
    loop {
        let run = arnoldi(m, &v, dim);
        used += run.applications;
        let (est, coeffs) = small_spectral_radius(&run.h);
        if (est - prev).abs() <= tol * est.max(f64::MIN_POSITIVE) {
            return Ok(est);
        }
        prev = est;
        if used >= max_iter {
            return Err(Error::DegenerateSpectrum(format!(
                "no convergence within {max_iter} matrix applications (last estimate {est})"
            )));
        }
        // Lift the dominant direction back to the full space for the
        // restart; a vanishing lift falls back to a fresh random vector.
        let mut lifted = vec![0.0; n];
        for (c, q) in coeffs.iter().zip(&run.basis) {
            for (x, qx) in lifted.iter_mut().zip(q) {
                *x += c * qx;
            }
        }
        let ln = norm(&lifted);
        v = if ln > 0.0 {
            lifted.iter().map(|x| x / ln).collect()
        } else {
            random_unit(&mut rng, n)
        };
    }
}

/// Solves `X · G = B` for symmetric positive-definite `G` via Cholesky.
///
/// Retries once with a jitter of `1e-12 · trace(G)/n` on the diagonal before
/// reporting the system as singular.
pub fn solve_spd(g: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if g.rows() != g.cols() {
        return Err(Error::Dimension(format!(
            "solve_spd: G is {}x{}, not square",
            g.rows(),
            g.cols()
        )));
    }
    if b.cols() != g.rows() {
        return Err(Error::Dimension(format!(
            "solve_spd: B has {} columns, G is {}x{}",
            b.cols(),
            g.rows(),
            g.cols()
        )));
    }
    match cholesky(g) {
        Some(l) => Ok(solve_with_factor(&l, b)),
        None => {
            let n = g.rows();
            let trace: f64 = (0..n).map(|i| g.get(i, i)).sum();
            let jitter = 1e-12 * trace / n as f64;
            let mut jittered = g.clone();
            for i in 0..n {
                jittered.set(i, i, jittered.get(i, i) + jitter);
            }
            match cholesky(&jittered) {
                Some(l) => Ok(solve_with_factor(&l, b)),
                None => Err(Error::SingularSystem(format!(
                    "Cholesky failed for {n}x{n} system even with jitter {jitter:e}"
                ))),
            }
        }
    }
}

/// Lower-triangular Cholesky factor, or None when a pivot falls below
/// `1e-12 x` the largest diagonal entry.
fn cholesky(g: &DenseMatrix) -> Option<DenseMatrix> {
    let n = g.rows();
    let max_diag = (0..n).map(|i| g.get(i, i)).fold(0.0f64, f64::max);
    let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum < floor {
                    return None;
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Solves `X · G = B` one row of `B` at a time given `G = L·Lᵀ`:
/// forward substitution with `L`, back substitution with `Lᵀ`.
fn solve_with_factor(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut x = DenseMatrix::zeros(b.rows(), n);
    let mut y = vec![0.0; n];
    for r in 0..b.rows() {
        let rhs = b.row(r);
        for i in 0..n {
            let mut sum = rhs[i];
            for k in 0..i {
                sum -= l.get(i, k) * y[k];
            }
            y[i] = sum / l.get(i, i);
        }
        let out = x.row_mut(r);
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l.get(k, i) * out[k];
            }
            out[i] = sum / l.get(i, i);
        }
    }
    x
}
