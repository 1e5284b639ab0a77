//! `optimize`: hyper-parameter search at the optimization reservoir size,
//! writing the full trace CSV and the best candidate JSON.

use std::fs;
use std::path::PathBuf;

use kmesn::data::SequenceDataset;
use kmesn::hyperopt::{
    joint_random_search, sequential_search, CvPlan, JointSpace, ParamDistribution, SearchTrace,
};

use crate::commands::{build_weights, k_for_cell, prepare_train};
use crate::config::{ExperimentConfig, ModelKind, Protocol};
use crate::CliError;

/// Joint search space from the configured bounds.
pub fn joint_space(config: &ExperimentConfig) -> JointSpace {
    JointSpace {
        input_scaling: ParamDistribution::Uniform {
            low: config.search.input_scaling_low,
            high: 1.0,
        },
        bias_scaling: ParamDistribution::Uniform {
            low: 0.0,
            high: config.search.bias_grid_high,
        },
        ..JointSpace::default()
    }
}

/// Runs the configured search for one model on prepared training data.
pub fn search_for_model(
    config: &ExperimentConfig,
    model: ModelKind,
    train: &SequenceDataset,
    train_hash: &str,
) -> Result<SearchTrace, CliError> {
    let n_res = config.optimize.n_res;
    let k = config
        .optimize
        .k
        .unwrap_or_else(|| k_for_cell(config, model, n_res).min(n_res).max(1));
    let defaults = config.search_defaults(
        n_res,
        train.n_in(),
        train.n_classes(),
        train.task_kind(),
    );
    let (weights, _) = build_weights(
        config,
        model,
        &defaults,
        k,
        train,
        train_hash,
        config.optimize_weights_seed(),
    )?;
    let plan = CvPlan {
        folds: config.folds,
        seed: config.cv_seed(),
    };
    let trace = match config.search.protocol {
        Protocol::Sequential => sequential_search(
            &config.sequential_stages(),
            &defaults,
            &weights,
            train,
            &plan,
            config.search_seed(),
        )?,
        Protocol::Joint => joint_random_search(
            &joint_space(config),
            config.search.joint_iterations,
            &defaults,
            &weights,
            train,
            &plan,
            config.search_seed(),
        )?,
        Protocol::None => {
            return Err(CliError::Usage(
                "search.protocol is 'none'; nothing to optimize".into(),
            ))
        }
    };
    Ok(trace)
}

/// Writes `optimize_<model>_trace.csv` and `optimize_<model>_best.json`.
pub fn write_artifacts(
    config: &ExperimentConfig,
    model: ModelKind,
    trace: &SearchTrace,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&config.out)?;
    let trace_path = config.out.join(format!("optimize_{}_trace.csv", model.name()));
    trace.write_csv(fs::File::create(&trace_path)?)?;
    let best_path = config.out.join(format!("optimize_{}_best.json", model.name()));
    fs::write(&best_path, trace.best_json())?;
    Ok(best_path)
}

pub fn run(config: &ExperimentConfig, model: Option<ModelKind>) -> Result<(), CliError> {
    config.validate()?;
    let model = model.unwrap_or(config.models[0]);
    let ctx = prepare_train(config)?;
    let trace = search_for_model(config, model, &ctx.data, &ctx.hash)?;
    let best_path = write_artifacts(config, model, &trace)?;
    println!("{}", trace.best_json());
    println!(
        "evaluated {} candidates; best written to {}",
        trace.candidates.len(),
        best_path.display()
    );
    Ok(())
}
