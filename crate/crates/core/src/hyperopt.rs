//! Hyper-parameter optimization: k-fold cross-validated candidate
//! evaluation, staged sequential random search, and joint randomized
//! search.
//!
//! The sequential protocol optimizes parameter groups in order, freezing
//! each stage's best values before the next stage runs. All candidates of
//! a search share one base weight set; only the scalings vary, so the
//! expensive reservoir states are recomputed per candidate but never the
//! weights. Stages that vary only the ridge regularization reuse the
//! cached per-fold accumulators and validation states, since those do not
//! depend on it.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{one_hot_targets, SequenceDataset};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::reservoir::{
    run_sequence, HyperParams, ReadoutAccumulator, Readout, ReservoirState, WeightSet,
};
use crate::seed;

/// Sequences per work chunk when accumulating in parallel. Fixed (instead
/// of derived from the thread count) so results do not depend on the
/// worker configuration.
const ACCUMULATE_CHUNK: usize = 8;

/// A tunable hyper-parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    InputScaling,
    SpectralRadius,
    Leakage,
    BiasScaling,
    Regularization,
}

impl ParamName {
    fn apply(self, hp: &mut HyperParams, value: f64) {
        match self {
            ParamName::InputScaling => hp.input_scaling = value,
            ParamName::SpectralRadius => hp.spectral_radius = value,
            ParamName::Leakage => hp.leakage = value,
            ParamName::BiasScaling => hp.bias_scaling = value,
            ParamName::Regularization => hp.regularization = value,
        }
    }

    pub fn get(self, hp: &HyperParams) -> f64 {
        match self {
            ParamName::InputScaling => hp.input_scaling,
            ParamName::SpectralRadius => hp.spectral_radius,
            ParamName::Leakage => hp.leakage,
            ParamName::BiasScaling => hp.bias_scaling,
            ParamName::Regularization => hp.regularization,
        }
    }
}

/// Sampling distribution for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDistribution {
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    Grid { low: f64, high: f64, steps: usize },
}

impl ParamDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ParamDistribution::Uniform { low, high } => {
                if !low.is_finite() || !high.is_finite() || low > high {
                    return Err(Error::Config(format!("bad uniform bounds [{low}, {high}]")));
                }
            }
            ParamDistribution::LogUniform { low, high } => {
                if !(low > 0.0) || !high.is_finite() || low > high {
                    return Err(Error::Config(format!(
                        "bad log-uniform bounds [{low}, {high}]"
                    )));
                }
            }
            ParamDistribution::Grid { low, high, steps } => {
                if steps == 0 || !low.is_finite() || !high.is_finite() || low > high {
                    return Err(Error::Config(format!(
                        "bad grid [{low}, {high}] with {steps} steps"
                    )));
                }
            }
        }
        Ok(())
    }

    /// A single fixed point (constant draws).
    pub fn is_degenerate(&self) -> bool {
        match *self {
            ParamDistribution::Uniform { low, high } => low == high,
            ParamDistribution::LogUniform { low, high } => low == high,
            ParamDistribution::Grid { low, high, steps } => steps == 1 || low == high,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match *self {
            ParamDistribution::Uniform { low, high }
            | ParamDistribution::LogUniform { low, high }
            | ParamDistribution::Grid { low, high, .. } => (low..=high).contains(&value),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ParamDistribution::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    rng.random_range(low..high)
                }
            }
            ParamDistribution::LogUniform { low, high } => {
                if low == high {
                    low
                } else {
                    let (ll, lh) = (low.ln(), high.ln());
                    rng.random_range(ll..lh).exp()
                }
            }
            ParamDistribution::Grid { steps, .. } => {
                self.grid_value(rng.random_range(0..steps))
            }
        }
    }

    fn grid_value(&self, index: usize) -> f64 {
        match *self {
            ParamDistribution::Grid { low, high, steps } => {
                if steps == 1 {
                    low
                } else {
                    low + (high - low) * index as f64 / (steps - 1) as f64
                }
            }
            _ => unreachable!("grid_value on a non-grid distribution"),
        }
    }
}

/// One stage of the sequential protocol: a named parameter group with its
/// distributions and an iteration budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStage {
    pub params: Vec<(ParamName, ParamDistribution)>,
    pub iterations: usize,
}

impl SearchStage {
    pub fn random(params: Vec<(ParamName, ParamDistribution)>, iterations: usize) -> Self {
        Self { params, iterations }
    }

    /// A 1-D grid stage; the iteration count equals the number of grid
    /// points.
    pub fn grid(param: ParamName, low: f64, high: f64, steps: usize) -> Self {
        Self {
            params: vec![(param, ParamDistribution::Grid { low, high, steps })],
            iterations: steps,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("stage with no parameters".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("stage iterations must be at least 1".into()));
        }
        for (i, (name, dist)) in self.params.iter().enumerate() {
            dist.validate()?;
            if self.params[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::Config(format!("duplicate parameter {name:?} in stage")));
            }
            if let ParamDistribution::Grid { steps, .. } = dist {
                if self.params.len() != 1 {
                    return Err(Error::Config(
                        "grid search stages must optimize a single parameter".into(),
                    ));
                }
                if *steps != self.iterations {
                    return Err(Error::Config(format!(
                        "grid stage: {steps} steps but {} iterations",
                        self.iterations
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of candidates the stage actually evaluates: a stage whose
    /// distributions are all degenerate collapses to one evaluation.
    fn effective_iterations(&self) -> usize {
        if self.params.iter().all(|(_, d)| d.is_degenerate()) {
            1
        } else {
            self.iterations
        }
    }
}

/// The staged search spaces used as defaults: input scaling and spectral
/// radius jointly (200 random draws), then leakage (50 log-uniform draws),
/// then bias scaling (21-point grid), then regularization (50 log-uniform
/// draws); 321 evaluations in total.
pub fn default_sequential_stages() -> Vec<SearchStage> {
    vec![
        SearchStage::random(
            vec![
                (
                    ParamName::InputScaling,
                    ParamDistribution::Uniform { low: 1e-3, high: 1.0 },
                ),
                (
                    ParamName::SpectralRadius,
                    ParamDistribution::Uniform { low: 0.0, high: 2.0 },
                ),
            ],
            200,
        ),
        SearchStage::random(
            vec![(
                ParamName::Leakage,
                ParamDistribution::LogUniform { low: 1e-5, high: 1.0 },
            )],
            50,
        ),
        SearchStage::grid(ParamName::BiasScaling, 0.0, 2.0, 21),
        SearchStage::random(
            vec![(
                ParamName::Regularization,
                ParamDistribution::LogUniform { low: 1e-5, high: 10.0 },
            )],
            50,
        ),
    ]
}

/// The joint search space over all five tunable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpace {
    pub input_scaling: ParamDistribution,
    pub spectral_radius: ParamDistribution,
    pub leakage: ParamDistribution,
    pub bias_scaling: ParamDistribution,
    pub regularization: ParamDistribution,
}

impl JointSpace {
    fn entries(&self) -> [(ParamName, &ParamDistribution); 5] {
        [
            (ParamName::InputScaling, &self.input_scaling),
            (ParamName::SpectralRadius, &self.spectral_radius),
            (ParamName::Leakage, &self.leakage),
            (ParamName::BiasScaling, &self.bias_scaling),
            (ParamName::Regularization, &self.regularization),
        ]
    }
}

impl Default for JointSpace {
    fn default() -> Self {
        Self {
            input_scaling: ParamDistribution::Uniform { low: 1e-3, high: 1.0 },
            spectral_radius: ParamDistribution::Uniform { low: 0.0, high: 2.0 },
            leakage: ParamDistribution::LogUniform { low: 1e-5, high: 1.0 },
            bias_scaling: ParamDistribution::Uniform { low: 0.0, high: 2.0 },
            regularization: ParamDistribution::LogUniform { low: 1e-5, high: 10.0 },
        }
    }
}

/// Cross-validation plan: fold count and shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    pub seed: u64,
}

/// Train/validation sequence indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Sequence-level k-fold split: a disjoint cover with sizes differing by
/// at most one, shuffled by the plan seed.
pub fn kfold_split(n_sequences: usize, plan: &CvPlan) -> Result<Vec<Fold>> {
    if plan.folds < 2 {
        return Err(Error::Config(format!(
            "cross validation needs at least 2 folds, got {}",
            plan.folds
        )));
    }
    if n_sequences < plan.folds {
        return Err(Error::Config(format!(
            "cannot split {n_sequences} sequences into {} folds",
            plan.folds
        )));
    }
    let mut indices: Vec<usize> = (0..n_sequences).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    indices.shuffle(&mut rng);

    let base = n_sequences / plan.folds;
    let extra = n_sequences % plan.folds;
    let mut folds = Vec::with_capacity(plan.folds);
    let mut start = 0;
    for f in 0..plan.folds {
        let size = base + usize::from(f < extra);
        let mut validation: Vec<usize> = indices[start..start + size].to_vec();
        let mut train: Vec<usize> = indices[..start]
            .iter()
            .chain(&indices[start + size..])
            .copied()
            .collect();
        validation.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(folds)
}

/// Runs the given sequences through the reservoir and accumulates the
/// normal-equation sums. Sequences are processed in fixed-size chunks in
/// parallel and merged in order, so the result does not depend on the
/// thread count.
pub fn accumulate_sequences(
    data: &SequenceDataset,
    targets: &[DenseMatrix],
    indices: &[usize],
    weights: &WeightSet,
    hp: &HyperParams,
) -> Result<ReadoutAccumulator> {
    let chunks: Vec<ReadoutAccumulator> = indices
        .par_chunks(ACCUMULATE_CHUNK)
        .map(|chunk| {
            let mut acc = ReadoutAccumulator::new(hp.reservoir_size, hp.output_dim);
            for &i in chunk {
                let seq = &data.sequences()[i];
                let states = run_sequence(
                    &seq.features,
                    weights,
                    hp,
                    &ReservoirState::zeros(hp.reservoir_size),
                )?;
                acc.accumulate(&states, &targets[i])?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = ReadoutAccumulator::new(hp.reservoir_size, hp.output_dim);
    for acc in &chunks {
        total = total.merge(acc)?;
    }
    Ok(total)
}

/// Per-fold training accumulator plus validation states, reusable across
/// regularization values.
struct FoldStates {
    acc: ReadoutAccumulator,
    /// (sequence index, expanded states) per validation sequence.
    validation: Vec<(usize, DenseMatrix)>,
}

impl FoldStates {
    fn validation_mse(&self, readout: &Readout, targets: &[DenseMatrix]) -> Result<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, states) in &self.validation {
            let y = crate::reservoir::predict(states, readout)?;
            let d = &targets[*i];
            sum += y
                .values()
                .iter()
                .zip(d.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            count += y.values().len();
        }
        if count == 0 {
            return Err(Error::DegenerateInput("fold with no validation frames".into()));
        }
        Ok(sum / count as f64)
    }
}

/// Shared evaluation context for one search.
struct EvalContext<'a> {
    data: &'a SequenceDataset,
    targets: Vec<DenseMatrix>,
    base: &'a WeightSet,
    folds: &'a [Fold],
}

impl<'a> EvalContext<'a> {
    fn new(data: &'a SequenceDataset, base: &'a WeightSet, folds: &'a [Fold]) -> Result<Self> {
        if data.n_sequences() == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            data,
            targets: one_hot_targets(data)?,
            base,
            folds,
        })
    }

    fn check(&self, hp: &HyperParams) -> Result<()> {
        hp.validate()?;
        if hp.reservoir_size != self.base.reservoir_size() {
            return Err(Error::Config(format!(
                "candidate reservoir size {} vs weight set {}",
                hp.reservoir_size,
                self.base.reservoir_size()
            )));
        }
        if hp.input_dim != self.data.n_in() {
            return Err(Error::Dimension(format!(
                "candidate input dim {} vs dataset {}",
                hp.input_dim,
                self.data.n_in()
            )));
        }
        if hp.output_dim != self.data.n_classes() {
            return Err(Error::Dimension(format!(
                "candidate output dim {} vs {} classes",
                hp.output_dim,
                self.data.n_classes()
            )));
        }
        Ok(())
    }

    /// Computes the per-fold accumulators and validation states for the
    /// candidate's scalings (everything except regularization).
    fn fold_states(&self, hp: &HyperParams) -> Result<Vec<FoldStates>> {
        self.check(hp)?;
        self.folds
            .iter()
            .map(|fold| {
                let acc =
                    accumulate_sequences(self.data, &self.targets, &fold.train, self.base, hp)?;
                let validation = fold
                    .validation
                    .par_iter()
                    .map(|&i| {
                        let states = run_sequence(
                            &self.data.sequences()[i].features,
                            self.base,
                            hp,
                            &ReservoirState::zeros(hp.reservoir_size),
                        )?;
                        Ok((i, states))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(FoldStates { acc, validation })
            })
            .collect()
    }

    fn eval_per_fold(&self, hp: &HyperParams) -> Result<Vec<f64>> {
        let states = self.fold_states(hp)?;
        states
            .iter()
            .map(|fold| {
                let readout = fold.acc.finalize(hp.regularization)?;
                fold.validation_mse(&readout, &self.targets)
            })
            .collect()
    }
}

/// Per-fold validation MSE of one candidate: train the readout on each
/// fold's training sequences and score the held-out sequences against
/// their one-hot targets.
pub fn evaluate_candidate_per_fold(
    hp: &HyperParams,
    base: &WeightSet,
    data: &SequenceDataset,
    folds: &[Fold],
) -> Result<Vec<f64>> {
    let ctx = EvalContext::new(data, base, folds)?;
    ctx.eval_per_fold(hp)
}

/// Mean cross-validation MSE of one candidate.
pub fn evaluate_candidate(
    hp: &HyperParams,
    base: &WeightSet,
    data: &SequenceDataset,
    folds: &[Fold],
) -> Result<f64> {
    let per_fold = evaluate_candidate_per_fold(hp, base, data, folds)?;
    Ok(mean(&per_fold))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// One evaluated candidate of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedCandidate {
    pub hyperparams: HyperParams,
    pub per_fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

/// All evaluated candidates plus the index of the best one (lowest mean
/// MSE; ties go to the earliest evaluation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub candidates: Vec<EvaluatedCandidate>,
    pub best: usize,
}

impl SearchTrace {
    pub fn best_candidate(&self) -> &EvaluatedCandidate {
        &self.candidates[self.best]
    }

    /// One CSV row per candidate: parameters, per-fold MSEs, mean.
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let folds = self
            .candidates
            .first()
            .map_or(0, |c| c.per_fold_mse.len());
        let mut header = vec![
            "index".to_string(),
            "input_scaling".to_string(),
            "spectral_radius".to_string(),
            "leakage".to_string(),
            "bias_scaling".to_string(),
            "regularization".to_string(),
        ];
        header.extend((0..folds).map(|f| format!("fold_{f}_mse")));
        header.push("mean_mse".to_string());
        w.write_record(&header)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for (i, c) in self.candidates.iter().enumerate() {
            let mut row = vec![
                i.to_string(),
                c.hyperparams.input_scaling.to_string(),
                c.hyperparams.spectral_radius.to_string(),
                c.hyperparams.leakage.to_string(),
                c.hyperparams.bias_scaling.to_string(),
                c.hyperparams.regularization.to_string(),
            ];
            row.extend(c.per_fold_mse.iter().map(|m| m.to_string()));
            row.push(c.mean_mse.to_string());
            w.write_record(&row)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// The best candidate as a pretty-printed JSON document.
    pub fn best_json(&self) -> String {
        #[derive(Serialize)]
        struct Best<'a> {
            index: usize,
            mean_mse: f64,
            per_fold_mse: &'a [f64],
            hyperparams: &'a HyperParams,
        }
        let c = self.best_candidate();
        serde_json::to_string_pretty(&Best {
            index: self.best,
            mean_mse: c.mean_mse,
            per_fold_mse: &c.per_fold_mse,
            hyperparams: &c.hyperparams,
        })
        .expect("trace serializes")
    }
}

/// Evaluates a list of candidates in parallel, preserving order. When all
/// candidates share their scalings and differ only in regularization, the
/// reservoir states are computed once and every candidate refits from the
/// cached accumulators.
fn evaluate_batch(ctx: &EvalContext, candidates: &[HyperParams]) -> Result<Vec<Vec<f64>>> {
    let eps_only = candidates.len() > 1
        && candidates.windows(2).all(|w| {
            w[0].input_scaling == w[1].input_scaling
                && w[0].spectral_radius == w[1].spectral_radius
                && w[0].leakage == w[1].leakage
                && w[0].bias_scaling == w[1].bias_scaling
        });
    if eps_only {
        let states = ctx.fold_states(&candidates[0])?;
        candidates
            .par_iter()
            .map(|hp| {
                states
                    .iter()
                    .map(|fold| {
                        let readout = fold.acc.finalize(hp.regularization)?;
                        fold.validation_mse(&readout, &ctx.targets)
                    })
                    .collect()
            })
            .collect()
    } else {
        candidates
            .par_iter()
            .map(|hp| ctx.eval_per_fold(hp))
            .collect()
    }
}

fn push_candidates(
    trace: &mut SearchTrace,
    candidates: Vec<HyperParams>,
    scores: Vec<Vec<f64>>,
) -> usize {
    let offset = trace.candidates.len();
    for (hp, per_fold) in candidates.into_iter().zip(scores) {
        let mean_mse = mean(&per_fold);
        trace.candidates.push(EvaluatedCandidate {
            hyperparams: hp,
            per_fold_mse: per_fold,
            mean_mse,
        });
    }
    let mut best = offset;
    for i in offset..trace.candidates.len() {
        if trace.candidates[i].mean_mse < trace.candidates[best].mean_mse {
            best = i;
        }
    }
    if trace.candidates[best].mean_mse < trace.candidates[trace.best].mean_mse {
        trace.best = best;
    }
    best
}

/// Staged sequential random search. Stage draws are taken up front from a
/// per-stage stream, so the trace is reproducible regardless of the
/// evaluation schedule; after each stage the stage-best values are frozen
/// for all later stages.
pub fn sequential_search(
    stages: &[SearchStage],
    defaults: &HyperParams,
    base: &WeightSet,
    data: &SequenceDataset,
    plan: &CvPlan,
    seed: u64,
) -> Result<SearchTrace> {
    if stages.is_empty() {
        return Err(Error::Config("sequential search needs at least one stage".into()));
    }
    for (i, stage) in stages.iter().enumerate() {
        stage.validate()?;
        for (name, _) in &stage.params {
            if stages[..i]
                .iter()
                .any(|s| s.params.iter().any(|(other, _)| other == name))
            {
                return Err(Error::Config(format!(
                    "parameter {name:?} appears in more than one stage"
                )));
            }
        }
    }
    let folds = kfold_split(data.n_sequences(), plan)?;
    let ctx = EvalContext::new(data, base, &folds)?;

    let mut trace = SearchTrace {
        candidates: Vec::new(),
        best: 0,
    };
    let mut current = defaults.clone();
    for (stage_index, stage) in stages.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, stage_index as u64 + 1));
        let iterations = stage.effective_iterations();
        let candidates: Vec<HyperParams> = (0..iterations)
            .map(|i| {
                let mut hp = current.clone();
                for (name, dist) in &stage.params {
                    let value = match dist {
                        ParamDistribution::Grid { .. } => dist.grid_value(i),
                        _ => dist.sample(&mut rng),
                    };
                    name.apply(&mut hp, value);
                }
                hp
            })
            .collect();
        let scores = evaluate_batch(&ctx, &candidates)?;
        let stage_best = push_candidates(&mut trace, candidates, scores);
        current = trace.candidates[stage_best].hyperparams.clone();
    }
    Ok(trace)
}

/// Joint randomized search: `n` independent draws across the full space.
pub fn joint_random_search(
    space: &JointSpace,
    n: usize,
    defaults: &HyperParams,
    base: &WeightSet,
    data: &SequenceDataset,
    plan: &CvPlan,
    seed: u64,
) -> Result<SearchTrace> {
    if n == 0 {
        return Err(Error::Config("joint search needs at least one draw".into()));
    }
    for (_, dist) in space.entries() {
        dist.validate()?;
    }
    let folds = kfold_split(data.n_sequences(), plan)?;
    let ctx = EvalContext::new(data, base, &folds)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 0));
    let candidates: Vec<HyperParams> = (0..n)
        .map(|_| {
            let mut hp = defaults.clone();
            for (name, dist) in space.entries() {
                name.apply(&mut hp, dist.sample(&mut rng));
            }
            hp
        })
        .collect();
    let scores = evaluate_batch(&ctx, &candidates)?;
    let mut trace = SearchTrace {
        candidates: Vec::new(),
        best: 0,
    };
    push_candidates(&mut trace, candidates, scores);
    Ok(trace)
}
