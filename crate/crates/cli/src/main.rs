//! Command-line front end for the reservoir-computing toolkit: elbow
//! scans, hyper-parameter searches, training, evaluation, and the
//! reservoir-size x seed sweep comparing the basic ESN against the KM-ESN.
//!
//! Exit codes: 0 success, 2 configuration or parse errors, 3 numeric
//! failures.

mod commands;
mod config;
mod model_io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{ExperimentConfig, ModelKind, Protocol, TaskArg};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] kmesn::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                kmesn::Error::SingularSystem(_)
                | kmesn::Error::DegenerateSpectrum(_)
                | kmesn::Error::DegenerateInput(_) => 3,
                _ => 2,
            },
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "kmesn",
    version,
    about = "Echo State Networks with K-Means-based input weight initialization"
)]
struct Cli {
    /// Experiment configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed from which all component seeds are derived.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Target kind override for dataset loading.
    #[arg(long, global = true, value_enum)]
    task: Option<TaskArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SSE elbow scan over a list of centroid counts.
    ClusterScan {
        /// Centroid counts (ascending); defaults to the configured k_list.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Hyper-parameter search at the optimization reservoir size.
    Optimize {
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        #[arg(long, value_enum)]
        protocol: Option<Protocol>,
        /// Draws for the joint protocol.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Train one model and write its artifacts to the output directory.
    Train {
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        /// Hyper-parameters JSON: an optimize best.json, a full
        /// hyper-parameter document, or the five scalings.
        #[arg(long)]
        hyperparams: Option<PathBuf>,
        #[arg(long)]
        n_res: Option<usize>,
        /// Centroid count for the KM variants.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Evaluate a trained model directory on a test set.
    Evaluate {
        #[arg(long)]
        model_dir: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Train and evaluate every (model, reservoir size, seed) cell.
    Sweep {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Print dataset statistics.
    Describe { data: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = cli.out {
        config.out = out;
    }
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(task) = cli.task {
        config.task = Some(task);
    }
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    }

    match cli.command {
        Command::ClusterScan { ks, train } => {
            if let Some(train) = train {
                config.train = Some(train);
            }
            commands::cluster_scan::run(&config, ks)
        }
        Command::Optimize {
            model,
            protocol,
            iterations,
            train,
        } => {
            if let Some(train) = train {
                config.train = Some(train);
            }
            if let Some(protocol) = protocol {
                config.search.protocol = protocol;
            }
            if let Some(iterations) = iterations {
                config.search.joint_iterations = iterations;
            }
            commands::optimize::run(&config, model)
        }
        Command::Train {
            model,
            hyperparams,
            n_res,
            k,
            train,
        } => {
            if let Some(train) = train {
                config.train = Some(train);
            }
            let args = commands::train::TrainArgs {
                model,
                hyperparams,
                n_res,
                k,
            };
            commands::train::run(&config, &args)
        }
        Command::Evaluate { model_dir, test } => {
            commands::evaluate::run(&config, &model_dir, test)
        }
        Command::Sweep { train, test } => {
            if let Some(train) = train {
                config.train = Some(train);
            }
            if let Some(test) = test {
                config.test = Some(test);
            }
            commands::sweep::run(&config)
        }
        Command::Describe { data } => commands::describe::run(&config, &data),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
