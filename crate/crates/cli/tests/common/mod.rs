//! Test support for the CLI: tiny synthetic datasets and binary invocation.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kmesn::data::{save_csv_path, Sequence, SequenceDataset, Target, TaskKind};
use kmesn::linalg::DenseMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Invokes the built `kmesn` binary.
pub fn kmesn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmesn"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Sequence-level task: each class emits noisy copies of its own
/// prototype vector; trivially separable by accumulated readouts.
pub fn sequence_task(n_sequences: usize, frames: usize, seed: u64) -> SequenceDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let prototypes: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..6).map(|j| if j == 2 * c { 1.5 } else { 0.1 }).collect())
        .collect();
    let sequences = (0..n_sequences)
        .map(|i| {
            let class = i % 3;
            let rows: Vec<Vec<f64>> = (0..frames)
                .map(|_| {
                    prototypes[class]
                        .iter()
                        .map(|&p| {
                            let n: f64 = normal.sample(&mut rng);
                            p + 0.2 * n
                        })
                        .collect()
                })
                .collect();
            Sequence {
                features: DenseMatrix::from_rows(&rows).unwrap(),
                target: Target::Sequence(class),
            }
        })
        .collect();
    SequenceDataset::new(sequences, 3, TaskKind::SequenceLevel).unwrap()
}

/// Frame-level task whose label is readable from the current frame alone:
/// features are a scaled one-hot of the label.
pub fn frame_task(n_sequences: usize, frames: usize, seed: u64) -> SequenceDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences = (0..n_sequences)
        .map(|_| {
            let mut rows = Vec::with_capacity(frames);
            let mut labels = Vec::with_capacity(frames);
            for _ in 0..frames {
                let class = rng.random_range(0..3usize);
                let mut row = vec![0.0; 3];
                row[class] = 2.0;
                rows.push(row);
                labels.push(class);
            }
            Sequence {
                features: DenseMatrix::from_rows(&rows).unwrap(),
                target: Target::Frames(labels),
            }
        })
        .collect();
    SequenceDataset::new(sequences, 3, TaskKind::FrameLevel).unwrap()
}

pub fn write_dataset(ds: &SequenceDataset, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    save_csv_path(ds, &path).unwrap();
    path
}

pub fn write_config(dir: &Path, name: &str, json: &serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(json).unwrap()).unwrap();
    path
}
