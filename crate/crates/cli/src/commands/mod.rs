//! Subcommand implementations and the shared training pipeline.

pub mod cluster_scan;
pub mod describe;
pub mod evaluate;
pub mod optimize;
pub mod sweep;
pub mod train;

use kmesn::clustering::Centroids;
use kmesn::data::{one_hot_targets, SequenceDataset, TaskKind};
use kmesn::hyperopt::accumulate_sequences;
use kmesn::km_init::{build_km_weightset, KmInputSpec};
use kmesn::reservoir::{init_random_weights, HyperParams, Readout, WeightSet};

use crate::config::{ExperimentConfig, ModelKind, ScalingParams};
use crate::model_io::{centroids_for, data_hash, load_dataset, PreprocessModel};
use crate::CliError;

/// Loaded and preprocessed training data plus its cache key.
pub struct TrainContext {
    pub preprocess: PreprocessModel,
    pub data: SequenceDataset,
    pub hash: String,
}

pub fn prepare_train(config: &ExperimentConfig) -> Result<TrainContext, CliError> {
    let path = config
        .train
        .as_ref()
        .ok_or_else(|| CliError::Usage("no training dataset: set --train or config.train".into()))?;
    let raw = load_dataset(path, config.task_kind())?;
    let preprocess = PreprocessModel::fit(config.preprocess, &raw)?;
    let data = preprocess.apply(&raw)?;
    let hash = data_hash(&data);
    Ok(TrainContext {
        preprocess,
        data,
        hash,
    })
}

/// Full hyper-parameters for one model cell: configured structure plus the
/// given scalings. Fan-ins are clamped to the cell's dimensions.
pub fn cell_hyperparams(
    config: &ExperimentConfig,
    scalings: &ScalingParams,
    n_res: usize,
    n_in: usize,
    n_out: usize,
    task: TaskKind,
) -> HyperParams {
    let mut hp = config.search_defaults(n_res, n_in, n_out, task);
    scalings.apply_to(&mut hp);
    hp
}

/// Centroid count for a model kind at a given reservoir size: the dense
/// KM-ESN grows K with the reservoir, the sparse KM-ESN keeps the largest
/// configured K, and the basic ESN uses none.
pub fn k_for_cell(config: &ExperimentConfig, model: ModelKind, n_res: usize) -> usize {
    match model {
        ModelKind::Basic => 0,
        ModelKind::KmDense => n_res,
        ModelKind::KmSparse => *config.k_list.iter().max().expect("validated non-empty"),
    }
}

/// Builds the weight set for a cell, clustering (or loading cached
/// centroids) for the KM variants.
pub fn build_weights(
    config: &ExperimentConfig,
    model: ModelKind,
    hp: &HyperParams,
    k: usize,
    train: &SequenceDataset,
    train_hash: &str,
    seed: u64,
) -> Result<(WeightSet, Option<Centroids>), CliError> {
    match model {
        ModelKind::Basic => Ok((init_random_weights(hp, seed)?, None)),
        ModelKind::KmDense | ModelKind::KmSparse => {
            let centroids = centroids_for(config, train, train_hash, k)?;
            let weights = weights_from_centroids(config, &centroids, hp, seed)?;
            Ok((weights, Some(centroids)))
        }
    }
}

/// KM weight set from already-computed centroids.
pub fn weights_from_centroids(
    config: &ExperimentConfig,
    centroids: &Centroids,
    hp: &HyperParams,
    seed: u64,
) -> Result<WeightSet, CliError> {
    let mut spec = KmInputSpec::new(centroids.clone(), hp.reservoir_size);
    spec.normalize_rows = config.normalize_centroid_rows;
    Ok(build_km_weightset(&spec, hp, seed)?)
}

/// Trains the readout on the full training set.
pub fn fit_readout(
    train: &SequenceDataset,
    weights: &WeightSet,
    hp: &HyperParams,
) -> Result<Readout, CliError> {
    let targets = one_hot_targets(train)?;
    let indices: Vec<usize> = (0..train.n_sequences()).collect();
    let acc = accumulate_sequences(train, &targets, &indices, weights, hp)?;
    Ok(acc.finalize(hp.regularization)?)
}
