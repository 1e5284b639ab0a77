//! Mini-batch K-Means with K-Means++ seeding and SSE evaluation.
//!
//! Follows Sculley's scheme: per mini-batch, assignments are computed
//! against the batch-start centroids, then each centroid moves towards its
//! assigned points with a per-center learning rate of `1/count`. A fixed
//! iteration budget keeps runs reproducible; there is no early stopping.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::seed;

/// Cluster prototypes (`K x N_in`) plus per-center assignment counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    pub mu: DenseMatrix,
    pub counts: Vec<u64>,
}

impl Centroids {
    pub fn k(&self) -> usize {
        self.mu.rows()
    }

    pub fn n_in(&self) -> usize {
        self.mu.cols()
    }
}

/// Mini-batch K-Means configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    /// Mini-batch size; clamped to the number of observations.
    pub batch_size: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Centers whose final count is at or below this value are re-seeded
    /// to random data rows; 0 re-seeds only never-hit centers.
    pub reassign_threshold: f64,
}

impl ClusterConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            batch_size: 1024,
            max_iterations: 300,
            seed,
            reassign_threshold: 0.0,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || n < self.k {
            return Err(Error::Config(format!(
                "cannot form {} clusters from {n} observations",
                self.k
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.reassign_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "reassign_threshold must be >= 0, got {}",
                self.reassign_threshold
            )));
        }
        Ok(())
    }
}

/// Per-observation cluster indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Nearest centroid of `x`; ties broken by lowest index.
fn nearest(x: &[f64], mu: &DenseMatrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = dist2(x, mu.row(0));
    for k in 1..mu.rows() {
        let d = dist2(x, mu.row(k));
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    (best, best_d)
}

/// K-Means++ seeding: D²-weighted sampling of `k` distinct rows.
pub fn kmeanspp_init(x: &DenseMatrix, k: usize, seed: u64) -> Result<Centroids> {
    if k == 0 || x.rows() < k {
        return Err(Error::Config(format!(
            "cannot seed {k} centroids from {} observations",
            x.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeanspp_with_rng(x, k, &mut rng)
}

fn kmeanspp_with_rng(x: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> Result<Centroids> {
    let n = x.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];

    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;

    // d2[i]: squared distance from row i to the nearest chosen center.
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(x.row(i), x.row(first))).collect();

    while chosen.len() < k {
        let total: f64 = d2
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(_, d)| d)
            .sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = None;
            for i in 0..n {
                if taken[i] {
                    continue;
                }
                if d2[i] >= target {
                    pick = Some(i);
                    break;
                }
                target -= d2[i];
            }
            // Guard against summation rounding: fall back to the last
            // untaken row.
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| !taken[i]).expect("k <= n"))
        } else {
            // Every remaining row coincides with a chosen center; pick
            // uniformly among the untaken rows.
            let remaining: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        taken[next] = true;
        chosen.push(next);
        for i in 0..n {
            let d = dist2(x.row(i), x.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| x.row(i).to_vec()).collect();
    Ok(Centroids {
        mu: DenseMatrix::from_rows(&rows)?,
        counts: vec![0; k],
    })
}

/// Sculley-style mini-batch K-Means over a fixed iteration budget.
pub fn minibatch_kmeans(x: &DenseMatrix, cfg: &ClusterConfig) -> Result<Centroids> {
    cfg.validate(x.rows())?;
    let n = x.rows();
    let batch = cfg.batch_size.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = kmeanspp_with_rng(x, cfg.k, &mut rng)?;

    let mut indices = vec![0usize; batch];
    for _ in 0..cfg.max_iterations {
        for slot in indices.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        // Assign the whole batch against the batch-start centroids, then
        // apply the per-center 1/count updates sequentially.
        let assigned: Vec<usize> = if batch >= 256 {
            indices
                .par_iter()
                .map(|&i| nearest(x.row(i), &centroids.mu).0)
                .collect()
        } else {
            indices
                .iter()
                .map(|&i| nearest(x.row(i), &centroids.mu).0)
                .collect()
        };
        for (&i, &c) in indices.iter().zip(&assigned) {
            centroids.counts[c] += 1;
            let eta = 1.0 / centroids.counts[c] as f64;
            let row = centroids.mu.row_mut(c);
            for (m, &v) in row.iter_mut().zip(x.row(i)) {
                *m += eta * (v - *m);
            }
        }
    }

    for c in 0..cfg.k {
        if (centroids.counts[c] as f64) <= cfg.reassign_threshold {
            let i = rng.random_range(0..n);
            centroids.mu.row_mut(c).copy_from_slice(x.row(i));
        }
    }
    Ok(centroids)
}

/// Maps each observation to its nearest centroid.
pub fn assign(x: &DenseMatrix, centroids: &Centroids) -> Result<Assignment> {
    check_dims(x, centroids)?;
    let labels = (0..x.rows())
        .into_par_iter()
        .map(|i| nearest(x.row(i), &centroids.mu).0)
        .collect();
    Ok(Assignment { labels })
}

/// Within-cluster sum of squares under the nearest-centroid partition.
pub fn sse(x: &DenseMatrix, centroids: &Centroids) -> Result<f64> {
    check_dims(x, centroids)?;
    let mut total = 0.0;
    for i in 0..x.rows() {
        total += nearest(x.row(i), &centroids.mu).1;
    }
    Ok(total)
}

fn check_dims(x: &DenseMatrix, centroids: &Centroids) -> Result<()> {
    if x.cols() != centroids.n_in() {
        return Err(Error::Dimension(format!(
            "observations have {} features, centroids {}",
            x.cols(),
            centroids.n_in()
        )));
    }
    Ok(())
}

/// SSE over a list of cluster counts, one independently seeded run each.
pub fn elbow_scan(
    x: &DenseMatrix,
    ks: &[usize],
    template: &ClusterConfig,
) -> Result<Vec<(usize, f64)>> {
    if ks.is_empty() {
        return Err(Error::Config("elbow scan needs at least one k".into()));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("elbow scan ks must be ascending".into()));
    }
    ks.iter()
        .map(|&k| {
            let cfg = ClusterConfig {
                k,
                seed: seed::derive(template.seed, k as u64),
                ..template.clone()
            };
            let centroids = minibatch_kmeans(x, &cfg)?;
            Ok((k, sse(x, &centroids)?))
        })
        .collect()
}

/// Writes elbow-scan results as a two-column CSV.
pub fn write_elbow_csv(results: &[(usize, f64)], writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "sse"])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for &(k, sse) in results {
        w.write_record([k.to_string(), sse.to_string()])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn duplicated_points() -> DenseMatrix {
        let mut rows = Vec::new();
        for _ in 0..50 {
            rows.push(vec![0.0]);
            rows.push(vec![10.0]);
        }
        DenseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn kmeanspp_zero_distance_forcing() {
        // Three distinct repeated points, k = 3: seeding must recover all
        // three values.
        let mut rows = Vec::new();
        for _ in 0..20 {
            rows.push(vec![0.0, 0.0]);
            rows.push(vec![5.0, 0.0]);
            rows.push(vec![0.0, 5.0]);
        }
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let c = kmeanspp_init(&x, 3, 11).unwrap();
        let mut found: Vec<Vec<f64>> = (0..3).map(|k| c.mu.row(k).to_vec()).collect();
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            found,
            vec![vec![0.0, 0.0], vec![0.0, 5.0], vec![5.0, 0.0]]
        );
    }

    #[test]
    fn kmeanspp_single_center_is_a_row() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = kmeanspp_init(&x, 1, 0).unwrap();
        let row = c.mu.row(0);
        assert!(row == x.row(0) || row == x.row(1));
    }

    #[test]
    fn kmeanspp_too_few_points() {
        let x = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            kmeanspp_init(&x, 3, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn minibatch_separated_duplicates_exact() {
        let x = duplicated_points();
        let cfg = ClusterConfig::new(2, 5);
        let c = minibatch_kmeans(&x, &cfg).unwrap();
        let mut vals = vec![c.mu.get(0, 0), c.mu.get(1, 0)];
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vals, vec![0.0, 10.0]);
        assert_eq!(sse(&x, &c).unwrap(), 0.0);
    }

    #[test]
    fn minibatch_single_cluster_near_mean() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 99.0]).collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let cfg = ClusterConfig::new(1, 3);
        let c = minibatch_kmeans(&x, &cfg).unwrap();
        assert!((c.mu.get(0, 0) - 0.5).abs() < 1e-2);
    }

    #[test]
    fn minibatch_reproducible() {
        let x = duplicated_points();
        let cfg = ClusterConfig::new(2, 9);
        assert_eq!(minibatch_kmeans(&x, &cfg).unwrap(), minibatch_kmeans(&x, &cfg).unwrap());
    }

    #[test]
    fn assign_tie_goes_to_lowest_index() {
        let c = Centroids {
            mu: DenseMatrix::from_rows(&[vec![0.0], vec![2.0], vec![5.0]]).unwrap(),
            counts: vec![0; 3],
        };
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![5.0]]).unwrap();
        let a = assign(&x, &c).unwrap();
        assert_eq!(a.labels, vec![0, 2]);
    }

    #[test]
    fn sse_hand_sum() {
        let c = Centroids {
            mu: DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            counts: vec![0],
        };
        let x = DenseMatrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(sse(&x, &c).unwrap(), 2.0);
    }

    #[test]
    fn elbow_k_equals_n_gives_zero() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 3.0]).collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let template = ClusterConfig::new(1, 21);
        let results = elbow_scan(&x, &[2, 6], &template).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[1].0, 6);
        assert_eq!(results[1].1, 0.0);
    }

    #[test]
    fn elbow_requires_ascending() {
        let x = DenseMatrix::zeros(4, 1);
        let template = ClusterConfig::new(1, 0);
        assert!(elbow_scan(&x, &[3, 2], &template).is_err());
    }

    #[test]
    fn scaling_equivariance_on_duplicates() {
        let x = duplicated_points();
        let scaled_rows: Vec<Vec<f64>> = (0..x.rows()).map(|i| vec![x.get(i, 0) * 2.0]).collect();
        let x2 = DenseMatrix::from_rows(&scaled_rows).unwrap();
        let cfg = ClusterConfig::new(2, 13);
        let c = minibatch_kmeans(&x, &cfg).unwrap();
        let c2 = minibatch_kmeans(&x2, &cfg).unwrap();
        let mut a = vec![c.mu.get(0, 0), c.mu.get(1, 0)];
        let mut b = vec![c2.mu.get(0, 0), c2.mu.get(1, 0)];
        a.sort_by(|p, q| p.partial_cmp(q).unwrap());
        b.sort_by(|p, q| p.partial_cmp(q).unwrap());
        assert_eq!(b, vec![a[0] * 2.0, a[1] * 2.0]);
    }
}
