//! `evaluate`: score a trained model on a test set, writing the metrics
//! JSON and the per-frame predictions CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use kmesn::data::{
    cer, fer, frame_decisions, mse, one_hot_targets, sequence_decision, SequenceDataset, Target,
    TaskKind,
};
use kmesn::linalg::DenseMatrix;
use kmesn::reservoir::{predict, run_sequence, ReservoirState};

use kmesn::reservoir::{HyperParams, Readout, WeightSet};

use crate::config::ExperimentConfig;
use crate::model_io::{load_dataset, load_model};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub n_sequences: usize,
    pub n_frames: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cer: Option<f64>,
    /// `confusion[truth][predicted]` counts: frames for frame-level tasks,
    /// sequences otherwise.
    pub confusion: Vec<Vec<u64>>,
}

/// Runs a model over every test sequence and assembles the report plus
/// the per-frame outputs.
pub fn score_model(
    test: &SequenceDataset,
    weights: &WeightSet,
    readout: &Readout,
    hp: &HyperParams,
    n_out: usize,
) -> Result<(EvalReport, Vec<DenseMatrix>), CliError> {
    if test.n_classes() > n_out {
        return Err(CliError::Core(kmesn::Error::Dimension(format!(
            "test set has {} classes, model was trained with {n_out}",
            test.n_classes()
        ))));
    }

    let mut outputs = Vec::with_capacity(test.n_sequences());
    for seq in test.sequences() {
        let states = run_sequence(
            &seq.features,
            weights,
            hp,
            &ReservoirState::zeros(hp.reservoir_size),
        )?;
        outputs.push(predict(&states, readout)?);
    }

    let n_frames: usize = outputs.iter().map(|y| y.rows()).sum();
    let mut confusion = vec![vec![0u64; n_out]; n_out];
    let report = match test.task_kind() {
        TaskKind::FrameLevel => {
            let targets = one_hot_targets(test)?;
            let mut sq_sum = 0.0;
            let mut count = 0usize;
            let mut predicted = Vec::with_capacity(n_frames);
            let mut truth = Vec::with_capacity(n_frames);
            for (seq_idx, (y, d)) in outputs.iter().zip(&targets).enumerate() {
                sq_sum += mse(y, d)? * (y.rows() * y.cols()) as f64;
                count += y.rows() * y.cols();
                predicted.extend(frame_decisions(y));
                match &test.sequences()[seq_idx].target {
                    Target::Frames(labels) => truth.extend(labels.iter().copied()),
                    Target::Sequence(_) => unreachable!("frame-level task"),
                }
            }
            for (&p, &t) in predicted.iter().zip(&truth) {
                confusion[t][p] += 1;
            }
            EvalReport {
                task: TaskKind::FrameLevel,
                n_sequences: test.n_sequences(),
                n_frames,
                mse: Some(sq_sum / count as f64),
                fer: Some(fer(&predicted, &truth)?),
                cer: None,
                confusion,
            }
        }
        TaskKind::SequenceLevel => {
            let mut predicted = Vec::with_capacity(test.n_sequences());
            let mut truth = Vec::with_capacity(test.n_sequences());
            for (y, seq) in outputs.iter().zip(test.sequences()) {
                predicted.push(sequence_decision(y)?);
                match seq.target {
                    Target::Sequence(label) => truth.push(label),
                    Target::Frames(_) => unreachable!("sequence-level task"),
                }
            }
            for (&p, &t) in predicted.iter().zip(&truth) {
                confusion[t][p] += 1;
            }
            EvalReport {
                task: TaskKind::SequenceLevel,
                n_sequences: test.n_sequences(),
                n_frames,
                mse: None,
                fer: None,
                cer: Some(cer(&predicted, &truth)?),
                confusion,
            }
        }
    };
    Ok((report, outputs))
}

/// Writes `predictions.csv`: one row per frame with the raw readouts.
pub fn write_predictions(
    outputs: &[DenseMatrix],
    n_out: usize,
    path: &Path,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    let mut header = vec!["seq".to_string(), "t".to_string()];
    header.extend((0..n_out).map(|j| format!("y{j}")));
    w.write_record(&header)
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    for (s, y) in outputs.iter().enumerate() {
        for t in 0..y.rows() {
            let mut row = vec![s.to_string(), t.to_string()];
            row.extend(y.row(t).iter().map(|v| v.to_string()));
            w.write_record(&row)
                .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(
    config: &ExperimentConfig,
    model_dir: &Path,
    test_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let model = load_model(model_dir)?;
    let test_path = test_path
        .or_else(|| config.test.clone())
        .ok_or_else(|| CliError::Usage("no test dataset: set --test or config.test".into()))?;
    let mut test = load_dataset(&test_path, Some(model.manifest.task))?;
    test.ensure_n_classes(model.manifest.n_classes);
    let test = model.preprocess.apply(&test)?;

    let (report, outputs) = score_model(
        &test,
        &model.weights,
        &model.readout,
        &model.manifest.hyperparams,
        model.manifest.n_classes,
    )?;

    fs::create_dir_all(&config.out)?;
    let metrics_path = config.out.join("metrics.json");
    fs::write(&metrics_path, serde_json::to_string_pretty(&report)?)?;
    write_predictions(
        &outputs,
        model.manifest.n_classes,
        &config.out.join("predictions.csv"),
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
