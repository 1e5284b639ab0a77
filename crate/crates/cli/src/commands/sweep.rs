//! `sweep`: train and evaluate every configured (model kind, reservoir
//! size, seed) cell and write a long-format results CSV with per-group
//! summary rows.

use std::collections::BTreeMap;
use std::fs;

use rayon::prelude::*;

use kmesn::clustering::Centroids;
use kmesn::data::{SequenceDataset, TaskKind};
use kmesn::reservoir::init_random_weights;

use crate::commands::evaluate::score_model;
use crate::commands::optimize::{search_for_model, write_artifacts};
use crate::commands::{
    cell_hyperparams, fit_readout, k_for_cell, prepare_train, weights_from_centroids,
};
use crate::config::{ExperimentConfig, ModelKind, Protocol, ScalingParams};
use crate::model_io::{centroids_for, load_dataset};
use crate::CliError;

struct CellSpec {
    model: ModelKind,
    k: usize,
    n_res: usize,
    seed: u64,
}

struct CellOutcome {
    spec: CellSpec,
    result: Result<Vec<(&'static str, f64)>, String>,
}

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    config.validate()?;
    let ctx = prepare_train(config)?;
    let test_path = config
        .test
        .as_ref()
        .ok_or_else(|| CliError::Usage("no test dataset: set --test or config.test".into()))?;
    let raw_test = load_dataset(test_path, Some(ctx.data.task_kind()))?;
    let mut test = ctx.preprocess.apply(&raw_test)?;

    let mut train = ctx.data.clone();
    let n_out = train.n_classes().max(test.n_classes());
    train.ensure_n_classes(n_out);
    test.ensure_n_classes(n_out);
    let task = train.task_kind();

    // Hyper-parameters per model kind: explicit from the config, or the
    // configured search run once per kind.
    let mut scalings: BTreeMap<&'static str, ScalingParams> = BTreeMap::new();
    for &model in &config.models {
        let resolved = match config.explicit_scalings(model) {
            Some(s) => s.clone(),
            None if config.search.protocol != Protocol::None => {
                eprintln!("optimizing hyper-parameters for {}", model.name());
                let trace = search_for_model(config, model, &train, &ctx.hash)?;
                write_artifacts(config, model, &trace)?;
                ScalingParams::from_hyperparams(&trace.best_candidate().hyperparams)
            }
            None => {
                return Err(CliError::Usage(format!(
                    "search.protocol is 'none' but no hyper-parameters are configured for {}",
                    model.name()
                )))
            }
        };
        scalings.insert(model.name(), resolved);
    }

    // Cluster once per distinct centroid count before the parallel phase.
    let mut centroid_map: BTreeMap<usize, Centroids> = BTreeMap::new();
    for &model in &config.models {
        for &n_res in &config.n_res_list {
            let k = k_for_cell(config, model, n_res);
            if k > 0 && !centroid_map.contains_key(&k) {
                centroid_map.insert(k, centroids_for(config, &train, &ctx.hash, k)?);
            }
        }
    }

    let cells: Vec<CellSpec> = config
        .models
        .iter()
        .flat_map(|&model| {
            config.n_res_list.iter().flat_map(move |&n_res| {
                config.seeds().into_iter().map(move |seed| CellSpec {
                    model,
                    k: k_for_cell(config, model, n_res),
                    n_res,
                    seed,
                })
            })
        })
        .collect();

    let outcomes: Vec<CellOutcome> = cells
        .into_par_iter()
        .map(|spec| {
            let result = run_cell(config, &spec, &scalings, &centroid_map, &train, &test, task);
            CellOutcome { spec, result }
        })
        .collect();

    fs::create_dir_all(&config.out)?;
    let csv_path = config.out.join("sweep_results.csv");
    write_results_csv(&outcomes, &csv_path)?;

    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    for outcome in &outcomes {
        if let Err(message) = &outcome.result {
            eprintln!(
                "cell {}/n_res={}/seed={} failed: {message}",
                outcome.spec.model.name(),
                outcome.spec.n_res,
                outcome.spec.seed
            );
        }
    }
    println!(
        "{} cells ({} failed); results written to {}",
        outcomes.len(),
        failed,
        csv_path.display()
    );
    Ok(())
}

fn run_cell(
    config: &ExperimentConfig,
    spec: &CellSpec,
    scalings: &BTreeMap<&'static str, ScalingParams>,
    centroid_map: &BTreeMap<usize, Centroids>,
    train: &SequenceDataset,
    test: &SequenceDataset,
    task: TaskKind,
) -> Result<Vec<(&'static str, f64)>, String> {
    let inner = || -> Result<Vec<(&'static str, f64)>, CliError> {
        let hp = cell_hyperparams(
            config,
            &scalings[spec.model.name()],
            spec.n_res,
            train.n_in(),
            train.n_classes(),
            task,
        );
        hp.validate()?;
        let weights = match spec.model {
            ModelKind::Basic => init_random_weights(&hp, spec.seed)?,
            ModelKind::KmDense | ModelKind::KmSparse => {
                weights_from_centroids(config, &centroid_map[&spec.k], &hp, spec.seed)?
            }
        };
        let readout = fit_readout(train, &weights, &hp)?;
        let (report, _) = score_model(test, &weights, &readout, &hp, train.n_classes())?;
        Ok(match task {
            TaskKind::FrameLevel => vec![
                ("mse", report.mse.expect("frame-level report")),
                ("fer", report.fer.expect("frame-level report")),
            ],
            TaskKind::SequenceLevel => {
                vec![("cer", report.cer.expect("sequence-level report"))]
            }
        })
    };
    inner().map_err(|e| e.to_string())
}

fn write_results_csv(outcomes: &[CellOutcome], path: &std::path::Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    w.write_record(["model", "k", "n_res", "seed", "metric", "value", "min", "max", "status"])
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;

    for outcome in outcomes {
        let spec = &outcome.spec;
        match &outcome.result {
            Ok(metrics) => {
                for (name, value) in metrics {
                    w.write_record([
                        spec.model.name().to_string(),
                        spec.k.to_string(),
                        spec.n_res.to_string(),
                        spec.seed.to_string(),
                        (*name).to_string(),
                        value.to_string(),
                        String::new(),
                        String::new(),
                        "ok".to_string(),
                    ])
                    .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
                }
            }
            Err(_) => {
                w.write_record([
                    spec.model.name().to_string(),
                    spec.k.to_string(),
                    spec.n_res.to_string(),
                    spec.seed.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "failed".to_string(),
                ])
                .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
            }
        }
    }

    // Summary rows: mean/min/max over the seeds of each (model, size,
    // metric) group, mirroring the error-bar protocol of the size sweeps.
    let mut groups: BTreeMap<(String, usize, usize, String), Vec<f64>> = BTreeMap::new();
    let mut group_order: Vec<(String, usize, usize, String)> = Vec::new();
    for outcome in outcomes {
        if let Ok(metrics) = &outcome.result {
            for (name, value) in metrics {
                let key = (
                    outcome.spec.model.name().to_string(),
                    outcome.spec.k,
                    outcome.spec.n_res,
                    (*name).to_string(),
                );
                if !groups.contains_key(&key) {
                    group_order.push(key.clone());
                }
                groups.entry(key).or_default().push(*value);
            }
        }
    }
    for key in group_order {
        let values = &groups[&key];
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (model, k, n_res, metric) = key;
        w.write_record([
            model,
            k.to_string(),
            n_res.to_string(),
            String::new(),
            metric,
            mean.to_string(),
            min.to_string(),
            max.to_string(),
            "summary".to_string(),
        ])
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
