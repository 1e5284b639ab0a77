//! `train`: fit one model and write its artifacts to the output directory.

use std::path::{Path, PathBuf};

use kmesn::data::describe;
use kmesn::reservoir::HyperParams;

use crate::commands::{build_weights, cell_hyperparams, fit_readout, k_for_cell, prepare_train};
use crate::config::{ExperimentConfig, ModelKind, ScalingParams};
use crate::model_io::{save_model, Manifest};
use crate::CliError;

#[derive(Debug, Default)]
pub struct TrainArgs {
    pub model: Option<ModelKind>,
    pub hyperparams: Option<PathBuf>,
    pub n_res: Option<usize>,
    pub k: Option<usize>,
}

/// Reads scalings from a JSON file: either an `optimize` best.json (with a
/// `hyperparams` object), a full hyper-parameter document, or the bare five
/// scalings.
pub fn read_scalings(path: &Path) -> Result<ScalingParams, CliError> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let object = value.get("hyperparams").unwrap_or(&value);
    if let Ok(hp) = serde_json::from_value::<HyperParams>(object.clone()) {
        return Ok(ScalingParams::from_hyperparams(&hp));
    }
    serde_json::from_value::<ScalingParams>(object.clone()).map_err(|e| {
        CliError::Usage(format!(
            "{}: neither hyper-parameters nor scalings: {e}",
            path.display()
        ))
    })
}

pub fn run(config: &ExperimentConfig, args: &TrainArgs) -> Result<(), CliError> {
    config.validate()?;
    let model = args.model.unwrap_or(config.models[0]);
    let ctx = prepare_train(config)?;

    let n_res = args.n_res.unwrap_or(config.n_res_list[0]);
    let k = args.k.unwrap_or_else(|| k_for_cell(config, model, n_res));
    if model == ModelKind::KmDense && k != n_res {
        return Err(CliError::Usage(format!(
            "km_dense requires K = reservoir size; got K={k}, N_res={n_res}"
        )));
    }

    let scalings = match &args.hyperparams {
        Some(path) => read_scalings(path)?,
        None => config
            .explicit_scalings(model)
            .cloned()
            .ok_or_else(|| {
                CliError::Usage(
                    "no hyper-parameters: pass --hyperparams, set config.hyperparams, \
                     or run `optimize` first"
                        .into(),
                )
            })?,
    };

    let task = ctx.data.task_kind();
    let hp = cell_hyperparams(
        config,
        &scalings,
        n_res,
        ctx.data.n_in(),
        ctx.data.n_classes(),
        task,
    );
    hp.validate()?;

    let seed = config.base_seed;
    let (weights, centroids) = build_weights(config, model, &hp, k, &ctx.data, &ctx.hash, seed)?;
    let readout = fit_readout(&ctx.data, &weights, &hp)?;

    let manifest = Manifest {
        model,
        k,
        n_res,
        seed,
        task,
        n_classes: ctx.data.n_classes(),
        preprocess: ctx.preprocess.kind(),
        input_init_tag: weights.input_init_tag,
        hyperparams: hp,
        dataset: describe(&ctx.data),
        config_hash: config.hash(),
    };
    save_model(
        &config.out,
        &manifest,
        &weights,
        &readout,
        &ctx.preprocess,
        centroids.as_ref(),
    )?;
    println!("model written to {}", config.out.display());
    Ok(())
}
