//! Model artifacts on disk: weight sets, readouts, centroids,
//! preprocessing parameters, and the training manifest.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kmesn::clustering::{minibatch_kmeans, Centroids, ClusterConfig};
use kmesn::data::{
    self, apply_standardizer, fit_minmax, fit_standardizer, minmax_rescale, DatasetStats,
    LoadOptions, MinMaxBounds, SequenceDataset, Standardizer, TaskKind,
};
use kmesn::km_init::{read_centroids_csv, write_centroids_csv};
use kmesn::reservoir::{HyperParams, InputInitTag, Readout, WeightSet};

use crate::config::{ExperimentConfig, ModelKind, PreprocessKind};
use crate::CliError;

pub const WEIGHTS_FILE: &str = "weightset.json";
pub const READOUT_FILE: &str = "readout.json";
pub const CENTROIDS_FILE: &str = "centroids.csv";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Fitted preprocessing, stored next to the model so evaluation applies
/// the same transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreprocessModel {
    None,
    Standardize(Standardizer),
    Minmax(MinMaxBounds),
}

impl PreprocessModel {
    pub fn fit(kind: PreprocessKind, train: &SequenceDataset) -> Result<Self, CliError> {
        Ok(match kind {
            PreprocessKind::None => PreprocessModel::None,
            PreprocessKind::Standardize => PreprocessModel::Standardize(fit_standardizer(train)?),
            PreprocessKind::Minmax => PreprocessModel::Minmax(fit_minmax(train)?),
        })
    }

    pub fn apply(&self, ds: &SequenceDataset) -> Result<SequenceDataset, CliError> {
        Ok(match self {
            PreprocessModel::None => ds.clone(),
            PreprocessModel::Standardize(s) => apply_standardizer(s, ds)?,
            PreprocessModel::Minmax(b) => minmax_rescale(b, ds)?,
        })
    }

    pub fn kind(&self) -> PreprocessKind {
        match self {
            PreprocessModel::None => PreprocessKind::None,
            PreprocessModel::Standardize(_) => PreprocessKind::Standardize,
            PreprocessModel::Minmax(_) => PreprocessKind::Minmax,
        }
    }
}

/// Training record written next to the model files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub model: ModelKind,
    pub k: usize,
    pub n_res: usize,
    pub seed: u64,
    pub task: TaskKind,
    pub n_classes: usize,
    pub preprocess: PreprocessKind,
    pub input_init_tag: InputInitTag,
    pub hyperparams: HyperParams,
    pub dataset: DatasetStats,
    pub config_hash: String,
}

/// A trained model directory.
pub struct ModelArtifacts {
    pub manifest: Manifest,
    pub weights: WeightSet,
    pub readout: Readout,
    pub preprocess: PreprocessModel,
}

pub fn save_model(
    dir: &Path,
    manifest: &Manifest,
    weights: &WeightSet,
    readout: &Readout,
    preprocess: &PreprocessModel,
    centroids: Option<&Centroids>,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(WEIGHTS_FILE), weights.to_json())?;
    fs::write(dir.join(READOUT_FILE), readout.to_json())?;
    fs::write(
        dir.join(PREPROCESS_FILE),
        serde_json::to_string_pretty(preprocess)?,
    )?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(manifest)?)?;
    if let Some(centroids) = centroids {
        let file = fs::File::create(dir.join(CENTROIDS_FILE))?;
        write_centroids_csv(centroids, file)?;
    }
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<ModelArtifacts, CliError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let weights = WeightSet::from_json(&fs::read_to_string(dir.join(WEIGHTS_FILE))?)?;
    let readout = Readout::from_json(&fs::read_to_string(dir.join(READOUT_FILE))?)?;
    let preprocess: PreprocessModel =
        serde_json::from_str(&fs::read_to_string(dir.join(PREPROCESS_FILE))?)?;
    Ok(ModelArtifacts {
        manifest,
        weights,
        readout,
        preprocess,
    })
}

/// Loads a dataset with the configured task override.
pub fn load_dataset(path: &Path, task: Option<TaskKind>) -> Result<SequenceDataset, CliError> {
    Ok(data::load_csv_with(
        path,
        LoadOptions {
            task,
            n_classes: None,
        },
    )?)
}

/// Hash of preprocessed training features, used as the centroid cache key.
pub fn data_hash(ds: &SequenceDataset) -> String {
    let pooled = ds.pooled_frames();
    let mut hasher = Sha256::new();
    hasher.update(pooled.rows().to_le_bytes());
    hasher.update(pooled.cols().to_le_bytes());
    for v in pooled.values() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Returns the centroids for `(train, k)`, reading them from the cache
/// under `<out>/cache` when present and clustering (then caching) otherwise.
pub fn centroids_for(
    config: &ExperimentConfig,
    train: &SequenceDataset,
    train_hash: &str,
    k: usize,
) -> Result<Centroids, CliError> {
    let seed = config.clustering_seed();
    let cache_dir = config.out.join("cache");
    let cache_path: PathBuf = cache_dir.join(format!("centroids-{train_hash}-k{k}-s{seed}.csv"));
    if cache_path.is_file() {
        let file = fs::File::open(&cache_path)?;
        return Ok(read_centroids_csv(BufReader::new(file))?);
    }

    let cfg = ClusterConfig {
        k,
        batch_size: config.clustering.batch_size,
        max_iterations: config.clustering.max_iterations,
        seed,
        reassign_threshold: config.clustering.reassign_threshold,
    };
    let centroids = minibatch_kmeans(&train.pooled_frames(), &cfg)?;
    fs::create_dir_all(&cache_dir)?;
    let file = fs::File::create(&cache_path)?;
    write_centroids_csv(&centroids, file)?;
    Ok(centroids)
}
