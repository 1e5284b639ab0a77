//! KM-ESN input weights built from cluster centroids.
//!
//! The first `K` reservoir rows carry the centroid vectors as pre-synaptic
//! input weights; any remaining rows get no input connections at all
//! (the sparse KM-ESN). Recurrent and bias weights stay random and are
//! generated exactly as for the basic ESN, so a KM-ESN and a basic ESN
//! built from the same seed share those parts bit for bit.

use std::io::{BufRead, Write};

use crate::clustering::Centroids;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::reservoir::{
    gen_recurrent_and_bias, HyperParams, InputInitTag, WeightSet,
};

/// Recipe for a KM-ESN input matrix.
#[derive(Debug, Clone)]
pub struct KmInputSpec {
    pub centroids: Centroids,
    pub n_res: usize,
    /// L2-normalize each centroid row (cosine-similarity mode). Off by
    /// default: the raw centroids are the model.
    pub normalize_rows: bool,
}

impl KmInputSpec {
    pub fn new(centroids: Centroids, n_res: usize) -> Self {
        Self {
            centroids,
            n_res,
            normalize_rows: false,
        }
    }
}

/// Builds the `N_res x N_in` input matrix: centroid rows first, then
/// all-zero rows. Exact-zero centroid components become structural zeros.
pub fn build_km_input_weights(spec: &KmInputSpec) -> Result<SparseMatrix> {
    let k = spec.centroids.k();
    if spec.n_res < k {
        return Err(Error::Config(format!(
            "reservoir size {} smaller than centroid count {k}",
            spec.n_res
        )));
    }
    let n_in = spec.centroids.n_in();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(spec.n_res);
    for c in 0..k {
        let row = spec.centroids.mu.row(c);
        let norm = if spec.normalize_rows {
            row.iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            1.0
        };
        // A zero-norm centroid stays an all-zero row rather than dividing.
        let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        rows.push(
            row.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v * scale))
                .collect(),
        );
    }
    rows.resize_with(spec.n_res, Vec::new);
    SparseMatrix::from_row_entries(n_in, &rows)
}

/// Builds a full KM-ESN weight set: centroid input weights plus random
/// recurrent and bias weights drawn exactly as `init_random_weights` would
/// from the same seed.
pub fn build_km_weightset(spec: &KmInputSpec, hp: &HyperParams, seed: u64) -> Result<WeightSet> {
    hp.validate()?;
    if hp.reservoir_size != spec.n_res {
        return Err(Error::Config(format!(
            "hyper-parameters declare reservoir size {}, spec has {}",
            hp.reservoir_size, spec.n_res
        )));
    }
    if hp.input_dim != spec.centroids.n_in() {
        return Err(Error::Config(format!(
            "hyper-parameters declare input dim {}, centroids have {}",
            hp.input_dim,
            spec.centroids.n_in()
        )));
    }
    let w_in_base = build_km_input_weights(spec)?;
    let (w_res_base, w_bi_base) = gen_recurrent_and_bias(hp, seed)?;
    let input_init_tag = if spec.centroids.k() == spec.n_res {
        InputInitTag::KmeansDense
    } else {
        InputInitTag::KmeansSparse
    };
    Ok(WeightSet {
        w_in_base,
        w_res_base,
        w_bi_base,
        input_init_tag,
    })
}

/// Cosine similarity `(w·u) / (‖w‖·‖u‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(w: &[f64], u: &[f64]) -> Result<f64> {
    if w.len() != u.len() {
        return Err(Error::Dimension(format!(
            "cosine similarity of lengths {} and {}",
            w.len(),
            u.len()
        )));
    }
    let dot: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
    let nw: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nu: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nw == 0.0 || nu == 0.0 {
        return Err(Error::DegenerateInput("cosine similarity of zero vector".into()));
    }
    Ok((dot / (nw * nu)).clamp(-1.0, 1.0))
}

/// Writes a centroid matrix as CSV, one row per centroid.
pub fn write_centroids_csv(centroids: &Centroids, mut writer: impl Write) -> Result<()> {
    for r in 0..centroids.k() {
        let line = centroids
            .mu
            .row(r)
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

/// Reads a centroid matrix written by [`write_centroids_csv`]. Counts are
/// not stored in the CSV and come back as zeros.
pub fn read_centroids_csv(reader: impl BufRead) -> Result<Centroids> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: (i + 1) as u64,
                    message: format!("invalid centroid value: {field:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = rows.len();
    Ok(Centroids {
        mu: DenseMatrix::from_rows(&rows)?,
        counts: vec![0; k],
    })
}
