//! Experiment configuration: a single JSON document, with every CLI flag
//! overriding its JSON counterpart.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kmesn::data::TaskKind;
use kmesn::hyperopt::{ParamDistribution, ParamName, SearchStage};
use kmesn::reservoir::{Activation, HyperParams};
use kmesn::seed;

use crate::CliError;

/// Seed salts for the derived component seeds.
const SALT_SEARCH: u64 = 0x10;
const SALT_CV: u64 = 0x11;
const SALT_CLUSTER: u64 = 0x12;
const SALT_OPTIMIZE_WEIGHTS: u64 = 0x13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Basic,
    KmDense,
    KmSparse,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Basic => "basic",
            ModelKind::KmDense => "km_dense",
            ModelKind::KmSparse => "km_sparse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TaskArg {
    Frame,
    Sequence,
}

impl From<TaskArg> for TaskKind {
    fn from(value: TaskArg) -> Self {
        match value {
            TaskArg::Frame => TaskKind::FrameLevel,
            TaskArg::Sequence => TaskKind::SequenceLevel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessKind {
    #[default]
    None,
    Standardize,
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Sequential,
    Joint,
    /// No search: explicit hyper-parameters from the config.
    None,
}

/// The five tunable scalings, as stored in configs and per-model tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub input_scaling: f64,
    pub spectral_radius: f64,
    pub leakage: f64,
    pub bias_scaling: f64,
    pub regularization: f64,
}

impl ScalingParams {
    pub fn from_hyperparams(hp: &HyperParams) -> Self {
        Self {
            input_scaling: hp.input_scaling,
            spectral_radius: hp.spectral_radius,
            leakage: hp.leakage,
            bias_scaling: hp.bias_scaling,
            regularization: hp.regularization,
        }
    }

    pub fn apply_to(&self, hp: &mut HyperParams) {
        hp.input_scaling = self.input_scaling;
        hp.spectral_radius = self.spectral_radius;
        hp.leakage = self.leakage;
        hp.bias_scaling = self.bias_scaling;
        hp.regularization = self.regularization;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub protocol: Protocol,
    /// Draws for the joint randomized search.
    pub joint_iterations: usize,
    /// Draws for the joint input-scaling / spectral-radius stage.
    pub scaling_iterations: usize,
    pub leakage_iterations: usize,
    /// Grid points for the bias-scaling stage (step 0.1 over [0, high]).
    pub bias_grid_steps: usize,
    pub bias_grid_high: f64,
    pub regularization_iterations: usize,
    /// Lower bound of the input-scaling stage.
    pub input_scaling_low: f64,
    pub seed: Option<u64>,
    pub cv_seed: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Sequential,
            joint_iterations: 2000,
            scaling_iterations: 200,
            leakage_iterations: 50,
            bias_grid_steps: 21,
            bias_grid_high: 2.0,
            regularization_iterations: 50,
            input_scaling_low: 1e-3,
            seed: None,
            cv_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Reservoir size during hyper-parameter optimization.
    pub n_res: usize,
    /// Centroid count during optimization of KM models; defaults to the
    /// optimization reservoir size (dense input layer).
    pub k: Option<usize>,
    /// Seed of the shared base weight set used by all candidates.
    pub weights_seed: Option<u64>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            n_res: 50,
            k: None,
            weights_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub batch_size: usize,
    pub max_iterations: usize,
    pub reassign_threshold: f64,
    pub seed: Option<u64>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            max_iterations: 300,
            reassign_threshold: 0.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub task: Option<TaskArg>,
    pub preprocess: PreprocessKind,
    pub models: Vec<ModelKind>,
    /// Centroid counts: the cluster-scan list; its maximum is the sparse
    /// KM-ESN centroid count.
    pub k_list: Vec<usize>,
    pub n_res_list: Vec<usize>,
    /// Weight-initialization seeds for the sweep; defaults to `[base_seed]`.
    pub seeds: Vec<u64>,
    pub base_seed: u64,
    pub folds: usize,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub out: PathBuf,
    pub search: SearchConfig,
    pub optimize: OptimizeConfig,
    pub clustering: ClusteringConfig,
    /// Explicit scalings used when `search.protocol` is `none`.
    pub hyperparams: Option<ScalingParams>,
    /// Per-model overrides of `hyperparams` (keys: basic, km_dense, km_sparse).
    pub hyperparams_per_model: BTreeMap<String, ScalingParams>,
    pub input_fanin: usize,
    pub recurrent_fanin: usize,
    pub activation: Activation,
    /// L2-normalize centroid rows in KM input weights.
    pub normalize_centroid_rows: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            task: None,
            preprocess: PreprocessKind::None,
            models: vec![ModelKind::Basic],
            k_list: vec![50],
            n_res_list: vec![50],
            seeds: Vec::new(),
            base_seed: 0,
            folds: 5,
            workers: 0,
            out: PathBuf::from("out"),
            search: SearchConfig::default(),
            optimize: OptimizeConfig::default(),
            clustering: ClusteringConfig::default(),
            hyperparams: None,
            hyperparams_per_model: BTreeMap::new(),
            input_fanin: 10,
            recurrent_fanin: 10,
            activation: Activation::Tanh,
            normalize_centroid_rows: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.models.is_empty() {
            return Err(CliError::Usage("models must not be empty".into()));
        }
        if self.k_list.is_empty() || self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage("k_list must be non-empty and ascending".into()));
        }
        if self.n_res_list.is_empty() {
            return Err(CliError::Usage("n_res_list must not be empty".into()));
        }
        if self.models.contains(&ModelKind::KmSparse) {
            let max_k = *self.k_list.iter().max().unwrap();
            let min_n = *self.n_res_list.iter().min().unwrap();
            if max_k > min_n {
                return Err(CliError::Usage(format!(
                    "km_sparse pairs K = max(k_list) = {max_k} with every reservoir size, \
                     but min(n_res_list) = {min_n}"
                )));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.base_seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn search_seed(&self) -> u64 {
        self.search
            .seed
            .unwrap_or_else(|| seed::derive(self.base_seed, SALT_SEARCH))
    }

    pub fn cv_seed(&self) -> u64 {
        self.search
            .cv_seed
            .unwrap_or_else(|| seed::derive(self.base_seed, SALT_CV))
    }

    pub fn clustering_seed(&self) -> u64 {
        self.clustering
            .seed
            .unwrap_or_else(|| seed::derive(self.base_seed, SALT_CLUSTER))
    }

    pub fn optimize_weights_seed(&self) -> u64 {
        self.optimize
            .weights_seed
            .unwrap_or_else(|| seed::derive(self.base_seed, SALT_OPTIMIZE_WEIGHTS))
    }

    pub fn task_kind(&self) -> Option<TaskKind> {
        self.task.map(TaskKind::from)
    }

    /// The default leakage: 1.0 for frame-level targets, 0.1 for
    /// sequence-level targets (constant targets want a lower cutoff).
    pub fn default_leakage(task: TaskKind) -> f64 {
        match task {
            TaskKind::FrameLevel => 1.0,
            TaskKind::SequenceLevel => 0.1,
        }
    }

    /// Search defaults before any stage has run.
    pub fn search_defaults(
        &self,
        n_res: usize,
        n_in: usize,
        n_out: usize,
        task: TaskKind,
    ) -> HyperParams {
        HyperParams {
            input_scaling: 1.0,
            spectral_radius: 0.0,
            leakage: Self::default_leakage(task),
            bias_scaling: 0.0,
            regularization: 1e-5,
            reservoir_size: n_res,
            input_dim: n_in,
            output_dim: n_out,
            input_fanin: self.input_fanin.min(n_in),
            recurrent_fanin: self.recurrent_fanin.min(n_res),
            activation: self.activation,
        }
    }

    /// The staged search spaces from the search configuration.
    pub fn sequential_stages(&self) -> Vec<SearchStage> {
        vec![
            SearchStage::random(
                vec![
                    (
                        ParamName::InputScaling,
                        ParamDistribution::Uniform {
                            low: self.search.input_scaling_low,
                            high: 1.0,
                        },
                    ),
                    (
                        ParamName::SpectralRadius,
                        ParamDistribution::Uniform { low: 0.0, high: 2.0 },
                    ),
                ],
                self.search.scaling_iterations,
            ),
            SearchStage::random(
                vec![(
                    ParamName::Leakage,
                    ParamDistribution::LogUniform { low: 1e-5, high: 1.0 },
                )],
                self.search.leakage_iterations,
            ),
            SearchStage::grid(
                ParamName::BiasScaling,
                0.0,
                self.search.bias_grid_high,
                self.search.bias_grid_steps,
            ),
            SearchStage::random(
                vec![(
                    ParamName::Regularization,
                    ParamDistribution::LogUniform { low: 1e-5, high: 10.0 },
                )],
                self.search.regularization_iterations,
            ),
        ]
    }

    /// Hash of the resolved configuration, recorded in manifests.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Explicit scalings for a model, when the protocol is `none`.
    pub fn explicit_scalings(&self, model: ModelKind) -> Option<&ScalingParams> {
        self.hyperparams_per_model
            .get(model.name())
            .or(self.hyperparams.as_ref())
    }
}
