//! Echo State Network model: weight generation, leaky state updates, and
//! ridge-regression readout training via mergeable normal-equation
//! accumulators.
//!
//! Weights are stored in base (unit-scale) form: `w_in_base` and `w_bi_base`
//! hold raw draws, `w_res_base` is rescaled to unit largest-absolute
//! eigenvalue at generation time. The effective scalings (input scaling,
//! spectral radius, bias scaling) are applied multiplicatively inside the
//! state update, so a hyper-parameter search can re-evaluate hundreds of
//! scalings against one fixed weight structure.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{largest_abs_eigenvalue, solve_spd, DenseMatrix, SparseMatrix};
use crate::seed;

/// Seed salts for the independent generator streams; stable because saved
/// models must be reproducible from their recorded seed.
const SALT_INPUT: u64 = 0x01;
const SALT_RECURRENT: u64 = 0x02;
const SALT_BIAS: u64 = 0x03;
const SALT_POWER_ITERATION: u64 = 0x04;

/// Reservoir activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Logistic,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }
}

/// The tunable surface of the model: scalings, regularization, and the
/// structural sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Input scaling applied to `w_in_base`.
    pub input_scaling: f64,
    /// Spectral radius applied to the unit-scaled `w_res_base`.
    pub spectral_radius: f64,
    /// Leaky-integration coefficient in `(0, 1]`.
    pub leakage: f64,
    /// Bias scaling applied to `w_bi_base`.
    pub bias_scaling: f64,
    /// Ridge regularization for readout training.
    pub regularization: f64,
    pub reservoir_size: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Input connections per reservoir node.
    pub input_fanin: usize,
    /// Recurrent connections per reservoir node.
    pub recurrent_fanin: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_scaling", self.input_scaling),
            ("spectral_radius", self.spectral_radius),
            ("bias_scaling", self.bias_scaling),
            ("regularization", self.regularization),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.leakage > 0.0 && self.leakage <= 1.0) {
            return Err(Error::Config(format!(
                "leakage must be in (0, 1], got {}",
                self.leakage
            )));
        }
        for (name, v) in [
            ("reservoir_size", self.reservoir_size),
            ("input_dim", self.input_dim),
            ("output_dim", self.output_dim),
            ("input_fanin", self.input_fanin),
            ("recurrent_fanin", self.recurrent_fanin),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.input_fanin > self.input_dim {
            return Err(Error::Config(format!(
                "input_fanin {} exceeds input_dim {}",
                self.input_fanin, self.input_dim
            )));
        }
        if self.recurrent_fanin > self.reservoir_size {
            return Err(Error::Config(format!(
                "recurrent_fanin {} exceeds reservoir_size {}",
                self.recurrent_fanin, self.reservoir_size
            )));
        }
        Ok(())
    }
}

/// How the input weights of a [`WeightSet`] were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputInitTag {
    Random,
    KmeansDense,
    KmeansSparse,
}

/// The three fixed weight matrices in base (unit-scale) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub w_in_base: SparseMatrix,
    pub w_res_base: SparseMatrix,
    pub w_bi_base: Vec<f64>,
    pub input_init_tag: InputInitTag,
}

impl WeightSet {
    pub fn reservoir_size(&self) -> usize {
        self.w_res_base.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in_base.cols()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weight set serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let ws: WeightSet =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("weight set: {e}")))?;
        if ws.w_res_base.rows() != ws.w_res_base.cols()
            || ws.w_in_base.rows() != ws.w_res_base.rows()
            || ws.w_bi_base.len() != ws.w_res_base.rows()
        {
            return Err(Error::Dimension("inconsistent weight set shapes".into()));
        }
        Ok(ws)
    }
}

/// Reservoir state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState(pub Vec<f64>);

impl ReservoirState {
    pub fn zeros(n: usize) -> Self {
        ReservoirState(vec![0.0; n])
    }
}

/// Generates input weights: per reservoir row, exactly `input_fanin`
/// connections chosen without replacement, values uniform on [-1, 1].
pub(crate) fn gen_input_weights(hp: &HyperParams, base_seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(base_seed, SALT_INPUT));
    let k = hp.input_fanin.min(hp.input_dim);
    let rows: Vec<Vec<(usize, f64)>> = (0..hp.reservoir_size)
        .map(|_| {
            let mut cols = rand::seq::index::sample(&mut rng, hp.input_dim, k).into_vec();
            cols.sort_unstable();
            cols.into_iter()
                .map(|c| (c, nonzero_uniform(&mut rng)))
                .collect()
        })
        .collect();
    SparseMatrix::from_row_entries(hp.input_dim, &rows).expect("generated entries are canonical")
}

/// Generates the recurrent matrix (rescaled to unit largest-absolute
/// eigenvalue) and the bias vector.
pub(crate) fn gen_recurrent_and_bias(
    hp: &HyperParams,
    base_seed: u64,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(base_seed, SALT_RECURRENT));
    let k = hp.recurrent_fanin.min(hp.reservoir_size);
    let rows: Vec<Vec<(usize, f64)>> = (0..hp.reservoir_size)
        .map(|_| {
            let mut cols = rand::seq::index::sample(&mut rng, hp.reservoir_size, k).into_vec();
            cols.sort_unstable();
            cols.into_iter()
                .map(|c| {
                    let v = loop {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        if v != 0.0 {
                            break v;
                        }
                    };
                    (c, v)
                })
                .collect()
        })
        .collect();
    let raw = SparseMatrix::from_row_entries(hp.reservoir_size, &rows)
        .expect("generated entries are canonical");
    let radius = largest_abs_eigenvalue(
        &raw,
        1e-8,
        10_000,
        seed::derive(base_seed, SALT_POWER_ITERATION),
    )?;
    if radius == 0.0 {
        return Err(Error::DegenerateSpectrum(
            "recurrent matrix has zero spectral radius".into(),
        ));
    }
    let unit = raw.scaled(1.0 / radius)?;

    let mut bias_rng = ChaCha8Rng::seed_from_u64(seed::derive(base_seed, SALT_BIAS));
    let bias = (0..hp.reservoir_size)
        .map(|_| bias_rng.random_range(-1.0..=1.0))
        .collect();
    Ok((unit, bias))
}

fn nonzero_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = rng.random_range(-1.0..=1.0);
        if v != 0.0 {
            return v;
        }
    }
}

/// Generates a fully random [`WeightSet`], reproducible from `seed`.
pub fn init_random_weights(hp: &HyperParams, seed: u64) -> Result<WeightSet> {
    hp.validate()?;
    let w_in_base = gen_input_weights(hp, seed);
    let (w_res_base, w_bi_base) = gen_recurrent_and_bias(hp, seed)?;
    Ok(WeightSet {
        w_in_base,
        w_res_base,
        w_bi_base,
        input_init_tag: InputInitTag::Random,
    })
}

/// One leaky-integration step:
/// `r = (1-λ)·r_prev + λ·f(α_u·W_in·u + ρ·W_res·r_prev + α_bi·w_bi)`.
pub fn update_state(
    r_prev: &ReservoirState,
    u: &[f64],
    w: &WeightSet,
    hp: &HyperParams,
) -> Result<ReservoirState> {
    let n = w.reservoir_size();
    if r_prev.0.len() != n {
        return Err(Error::Dimension(format!(
            "state length {} vs reservoir size {n}",
            r_prev.0.len()
        )));
    }
    let mut next = ReservoirState::zeros(n);
    update_state_into(r_prev, u, w, hp, &mut next)?;
    Ok(next)
}

fn update_state_into(
    r_prev: &ReservoirState,
    u: &[f64],
    w: &WeightSet,
    hp: &HyperParams,
    out: &mut ReservoirState,
) -> Result<()> {
    let input = w.w_in_base.spmv(u)?;
    let recurrent = w.w_res_base.spmv(&r_prev.0)?;
    let leak = hp.leakage;
    for i in 0..out.0.len() {
        let pre = hp.input_scaling * input[i]
            + hp.spectral_radius * recurrent[i]
            + hp.bias_scaling * w.w_bi_base[i];
        out.0[i] = (1.0 - leak) * r_prev.0[i] + leak * hp.activation.apply(pre);
    }
    Ok(())
}

/// Runs a whole sequence, returning the `T x (N_res+1)` matrix of states
/// expanded by the constant intercept column.
pub fn run_sequence(
    inputs: &DenseMatrix,
    w: &WeightSet,
    hp: &HyperParams,
    r0: &ReservoirState,
) -> Result<DenseMatrix> {
    let n = w.reservoir_size();
    if r0.0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state length {} vs reservoir size {n}",
            r0.0.len()
        )));
    }
    let t = inputs.rows();
    let mut out = DenseMatrix::zeros(t, n + 1);
    let mut prev = r0.clone();
    let mut next = ReservoirState::zeros(n);
    for step in 0..t {
        update_state_into(&prev, inputs.row(step), w, hp, &mut next)?;
        let row = out.row_mut(step);
        row[..n].copy_from_slice(&next.0);
        row[n] = 1.0;
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(out)
}

/// Running normal-equation sums for ridge regression: `G = Σ rᵀr` over
/// intercept-expanded states and `C = Σ dᵀr`.
///
/// Only the upper triangle of `G` is maintained during accumulation; the
/// full symmetric matrix is materialized on read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutAccumulator {
    gram_upper: DenseMatrix,
    cross: DenseMatrix,
    sample_count: usize,
}

impl ReadoutAccumulator {
    pub fn new(reservoir_size: usize, output_dim: usize) -> Self {
        Self {
            gram_upper: DenseMatrix::zeros(reservoir_size + 1, reservoir_size + 1),
            cross: DenseMatrix::zeros(output_dim, reservoir_size + 1),
            sample_count: 0,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn state_dim(&self) -> usize {
        self.gram_upper.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.cross.rows()
    }

    /// The symmetric Gram matrix `Σ rᵀr`.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.gram_upper.rows();
        let mut full = self.gram_upper.clone();
        for i in 0..n {
            for j in 0..i {
                full.set(i, j, self.gram_upper.get(j, i));
            }
        }
        full
    }

    /// The cross matrix `Σ dᵀr`.
    pub fn cross(&self) -> &DenseMatrix {
        &self.cross
    }

    /// Adds one sequence of expanded states and matching targets.
    pub fn accumulate(&mut self, states: &DenseMatrix, targets: &DenseMatrix) -> Result<()> {
        let dim = self.gram_upper.rows();
        if states.cols() != dim {
            return Err(Error::Dimension(format!(
                "states have {} columns, accumulator expects {dim}",
                states.cols()
            )));
        }
        if targets.cols() != self.cross.rows() || targets.rows() != states.rows() {
            return Err(Error::Dimension(format!(
                "targets {}x{} vs states {}x{} with {} outputs",
                targets.rows(),
                targets.cols(),
                states.rows(),
                states.cols(),
                self.cross.rows()
            )));
        }
        for t in 0..states.rows() {
            let r = states.row(t);
            for i in 0..dim {
                let ri = r[i];
                let row = self.gram_upper.row_mut(i);
                for j in i..dim {
                    row[j] += ri * r[j];
                }
            }
            let d = targets.row(t);
            for (o, &dv) in d.iter().enumerate() {
                if dv != 0.0 {
                    let row = self.cross.row_mut(o);
                    for (j, &rj) in r.iter().enumerate() {
                        row[j] += dv * rj;
                    }
                }
            }
        }
        self.sample_count += states.rows();
        Ok(())
    }

    /// Elementwise sum of two accumulators.
    pub fn merge(&self, other: &ReadoutAccumulator) -> Result<ReadoutAccumulator> {
        if self.gram_upper.rows() != other.gram_upper.rows()
            || self.cross.rows() != other.cross.rows()
        {
            return Err(Error::Dimension(format!(
                "merge: {}x{} accumulator vs {}x{}",
                self.gram_upper.rows(),
                self.cross.rows(),
                other.gram_upper.rows(),
                other.cross.rows()
            )));
        }
        let mut out = self.clone();
        let merged_gram: Vec<f64> = self
            .gram_upper
            .values()
            .iter()
            .zip(other.gram_upper.values())
            .map(|(a, b)| a + b)
            .collect();
        let merged_cross: Vec<f64> = self
            .cross
            .values()
            .iter()
            .zip(other.cross.values())
            .map(|(a, b)| a + b)
            .collect();
        out.gram_upper =
            DenseMatrix::from_values(self.gram_upper.rows(), self.gram_upper.cols(), merged_gram)?;
        out.cross = DenseMatrix::from_values(self.cross.rows(), self.cross.cols(), merged_cross)?;
        out.sample_count = self.sample_count + other.sample_count;
        Ok(out)
    }

    /// Solves `W_out = C · (G + εI)^{-1}` via the SPD solver.
    pub fn finalize(&self, regularization: f64) -> Result<Readout> {
        if !(regularization >= 0.0) {
            return Err(Error::Config(format!(
                "regularization must be >= 0, got {regularization}"
            )));
        }
        let mut g = self.gram();
        for i in 0..g.rows() {
            g.set(i, i, g.get(i, i) + regularization);
        }
        let w_out = solve_spd(&g, &self.cross)?;
        Ok(Readout { w_out })
    }
}

/// Trained linear readout `W_out` of shape `N_out x (N_res+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub w_out: DenseMatrix,
}

impl Readout {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("readout serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(format!("readout: {e}")))
    }
}

/// Applies the readout to every expanded state row: `Y[t] = W_out · r[t]`.
pub fn predict(states: &DenseMatrix, readout: &Readout) -> Result<DenseMatrix> {
    let w = &readout.w_out;
    if states.cols() != w.cols() {
        return Err(Error::Dimension(format!(
            "states have {} columns, readout expects {}",
            states.cols(),
            w.cols()
        )));
    }
    let mut y = DenseMatrix::zeros(states.rows(), w.rows());
    for t in 0..states.rows() {
        let r = states.row(t);
        let row = y.row_mut(t);
        for o in 0..w.rows() {
            let mut acc = 0.0;
            for (j, &rj) in r.iter().enumerate() {
                acc += w.get(o, j) * rj;
            }
            row[o] = acc;
        }
    }
    Ok(y)
}
