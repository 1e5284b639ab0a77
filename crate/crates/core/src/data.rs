//! Dataset ingestion, preprocessing, target encoding, decisions, and metrics.
//!
//! The canonical dataset format is a CSV file with header
//! `seq,t,f0,...,f{N_in-1},label`: one row per frame, `seq` an integer
//! sequence id, `t` a zero-based contiguous timestep within its sequence,
//! and `label` an integer class. Frame-level tasks carry one label per
//! frame; sequence-level tasks repeat the sequence label on every frame.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Whether targets attach to individual frames or to whole sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FrameLevel,
    SequenceLevel,
}

/// Target of one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// One label per frame.
    Frames(Vec<usize>),
    /// A single label for the whole sequence.
    Sequence(usize),
}

/// One labeled multivariate sequence: `T x N_in` features plus its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub features: DenseMatrix,
    pub target: Target,
}

/// A labeled sequence dataset with uniform feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    sequences: Vec<Sequence>,
    n_classes: usize,
    task_kind: TaskKind,
}

impl SequenceDataset {
    /// Validates and assembles a dataset.
    pub fn new(sequences: Vec<Sequence>, n_classes: usize, task_kind: TaskKind) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_in = sequences[0].features.cols();
        for (i, seq) in sequences.iter().enumerate() {
            if seq.features.cols() != n_in {
                return Err(Error::Dimension(format!(
                    "sequence {i} has {} features, expected {n_in}",
                    seq.features.cols()
                )));
            }
            match (&seq.target, task_kind) {
                (Target::Frames(labels), TaskKind::FrameLevel) => {
                    if labels.len() != seq.features.rows() {
                        return Err(Error::Dimension(format!(
                            "sequence {i}: {} labels for {} frames",
                            labels.len(),
                            seq.features.rows()
                        )));
                    }
                    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
                        return Err(Error::Label(format!(
                            "sequence {i} frame label {bad} >= {n_classes} classes"
                        )));
                    }
                }
                (Target::Sequence(label), TaskKind::SequenceLevel) => {
                    if *label >= n_classes {
                        return Err(Error::Label(format!(
                            "sequence {i} label {label} >= {n_classes} classes"
                        )));
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "sequence {i} target does not match task kind {task_kind:?}"
                    )))
                }
            }
        }
        Ok(Self {
            sequences,
            n_classes,
            task_kind,
        })
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn n_sequences(&self) -> usize {
        self.sequences.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn n_in(&self) -> usize {
        self.sequences[0].features.cols()
    }

    /// Raises the class count (e.g. to align train and test label spaces).
    pub fn ensure_n_classes(&mut self, n_classes: usize) {
        if n_classes > self.n_classes {
            self.n_classes = n_classes;
        }
    }

    /// All frames of all sequences stacked into one `N x N_in` matrix.
    pub fn pooled_frames(&self) -> DenseMatrix {
        let n_in = self.n_in();
        let total: usize = self.sequences.iter().map(|s| s.features.rows()).sum();
        let mut values = Vec::with_capacity(total * n_in);
        for seq in &self.sequences {
            values.extend_from_slice(seq.features.values());
        }
        DenseMatrix::from_values(total, n_in, values).expect("pooled frames are finite")
    }

    /// Dataset restricted to the given sequence indices.
    pub fn subset(&self, indices: &[usize]) -> Result<SequenceDataset> {
        let sequences = indices
            .iter()
            .map(|&i| {
                self.sequences
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("sequence index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        SequenceDataset::new(sequences, self.n_classes, self.task_kind)
    }

    /// Applies a per-frame feature transform, keeping targets.
    fn map_features(&self, f: impl Fn(usize, f64) -> f64) -> SequenceDataset {
        let sequences = self
            .sequences
            .iter()
            .map(|seq| {
                let cols = seq.features.cols();
                let values = seq
                    .features
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| f(i % cols, v))
                    .collect();
                Sequence {
                    features: DenseMatrix::from_values(seq.features.rows(), cols, values)
                        .expect("transformed features are finite"),
                    target: seq.target.clone(),
                }
            })
            .collect();
        SequenceDataset {
            sequences,
            n_classes: self.n_classes,
            task_kind: self.task_kind,
        }
    }
}

/// Options for [`load_csv_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Overrides task-kind inference.
    pub task: Option<TaskKind>,
    /// Overrides the inferred class count (must cover all labels).
    pub n_classes: Option<usize>,
}

/// Loads the canonical CSV format, inferring the task kind.
///
/// A file in which every sequence carries a single constant label is read
/// as sequence-level; use [`LoadOptions::task`] to force frame-level for
/// such datasets.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SequenceDataset> {
    load_csv_with(path, LoadOptions::default())
}

pub fn load_csv_with(path: impl AsRef<Path>, options: LoadOptions) -> Result<SequenceDataset> {
    let file = std::fs::File::open(path)?;
    load_csv_from(file, options)
}

/// Reader-based variant of [`load_csv_with`].
pub fn load_csv_from(reader: impl Read, options: LoadOptions) -> Result<SequenceDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let n_in = {
        let headers = rdr
            .headers()
            .map_err(|e| csv_parse_error(&e, 1))?
            .clone();
        parse_header(&headers)?
    };

    struct RawSeq {
        frames: Vec<Vec<f64>>,
        labels: Vec<usize>,
        first_line: u64,
    }
    let mut order: Vec<i64> = Vec::new();
    let mut by_id: HashMap<i64, RawSeq> = HashMap::new();

    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr
            .read_record(&mut record)
            .map_err(|e| csv_parse_error(&e, record.position().map_or(0, |p| p.line())))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != n_in + 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", n_in + 3, record.len()),
            });
        }
        let seq_id: i64 = parse_field(&record, 0, line, "sequence id")?;
        let t: usize = parse_field(&record, 1, line, "timestep")?;
        let mut frame = Vec::with_capacity(n_in);
        for j in 0..n_in {
            let v: f64 = parse_field(&record, 2 + j, line, "feature")?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite feature f{j}"),
                });
            }
            frame.push(v);
        }
        let label: usize = parse_field(&record, n_in + 2, line, "label")?;

        let entry = by_id.entry(seq_id).or_insert_with(|| {
            order.push(seq_id);
            RawSeq {
                frames: Vec::new(),
                labels: Vec::new(),
                first_line: line,
            }
        });
        if t != entry.frames.len() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "sequence {seq_id}: expected timestep {}, got {t}",
                    entry.frames.len()
                ),
            });
        }
        entry.frames.push(frame);
        entry.labels.push(label);
    }

    if order.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let uniform = order.iter().all(|id| {
        let raw = &by_id[id];
        raw.labels.windows(2).all(|w| w[0] == w[1])
    });
    let task_kind = options.task.unwrap_or(if uniform {
        TaskKind::SequenceLevel
    } else {
        TaskKind::FrameLevel
    });

    let max_label = order
        .iter()
        .flat_map(|id| by_id[id].labels.iter().copied())
        .max()
        .unwrap_or(0);
    let n_classes = match options.n_classes {
        Some(n) if n > max_label => n,
        Some(n) => {
            return Err(Error::Label(format!(
                "declared {n} classes but found label {max_label}"
            )))
        }
        None => max_label + 1,
    };

    let mut sequences = Vec::with_capacity(order.len());
    for id in &order {
        let raw = by_id.remove(id).expect("present by construction");
        let target = match task_kind {
            TaskKind::FrameLevel => Target::Frames(raw.labels),
            TaskKind::SequenceLevel => {
                if raw.labels.windows(2).any(|w| w[0] != w[1]) {
                    return Err(Error::Parse {
                        line: raw.first_line,
                        message: format!("sequence {id}: varying labels on a sequence-level task"),
                    });
                }
                Target::Sequence(raw.labels[0])
            }
        };
        sequences.push(Sequence {
            features: DenseMatrix::from_rows(&raw.frames)
                .map_err(|e| Error::Config(e.to_string()))?,
            target,
        });
    }
    SequenceDataset::new(sequences, n_classes, task_kind)
}

fn csv_parse_error(e: &csv::Error, fallback_line: u64) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => fallback_line,
    };
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn parse_header(headers: &csv::StringRecord) -> Result<usize> {
    let fields: Vec<&str> = headers.iter().collect();
    if fields.len() < 3 || fields[0] != "seq" || fields[1] != "t" || fields[fields.len() - 1] != "label"
    {
        return Err(Error::Parse {
            line: 1,
            message: "header must be seq,t,f0,...,label".into(),
        });
    }
    let n_in = fields.len() - 3;
    for (j, name) in fields[2..fields.len() - 1].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected feature column f{j}, found {name}"),
            });
        }
    }
    Ok(n_in)
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    index: usize,
    line: u64,
    what: &str,
) -> Result<T> {
    record[index].trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what}: {:?}", &record[index]),
    })
}

/// Writes the canonical CSV format; sequence ids are the dataset order.
pub fn save_csv(ds: &SequenceDataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let n_in = ds.n_in();
    let mut header = vec!["seq".to_string(), "t".to_string()];
    header.extend((0..n_in).map(|j| format!("f{j}")));
    header.push("label".to_string());
    w.write_record(&header).map_err(io_from_csv)?;
    for (s, seq) in ds.sequences.iter().enumerate() {
        for t in 0..seq.features.rows() {
            let label = match &seq.target {
                Target::Frames(labels) => labels[t],
                Target::Sequence(label) => *label,
            };
            let mut row = vec![s.to_string(), t.to_string()];
            row.extend(seq.features.row(t).iter().map(|v| v.to_string()));
            row.push(label.to_string());
            w.write_record(&row).map_err(io_from_csv)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv_path(ds: &SequenceDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    save_csv(ds, file)
}

fn io_from_csv(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Per-feature centering and scaling fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Pooled per-feature mean and population standard deviation over all
/// training frames. Constant features (exact min == max) get mean equal to
/// the constant and scale 1, so they transform to exactly zero.
pub fn fit_standardizer(train: &SequenceDataset) -> Result<Standardizer> {
    let pooled = train.pooled_frames();
    let (rows, cols) = (pooled.rows(), pooled.cols());
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut min = vec![f64::INFINITY; cols];
    let mut max = vec![f64::NEG_INFINITY; cols];
    let mut sum = vec![0.0; cols];
    for r in 0..rows {
        for (j, &v) in pooled.row(r).iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
            sum[j] += v;
        }
    }
    let mut mean: Vec<f64> = sum.iter().map(|s| s / rows as f64).collect();
    let mut sq = vec![0.0; cols];
    for r in 0..rows {
        for (j, &v) in pooled.row(r).iter().enumerate() {
            let d = v - mean[j];
            sq[j] += d * d;
        }
    }
    let mut scale = Vec::with_capacity(cols);
    for j in 0..cols {
        if min[j] == max[j] {
            mean[j] = min[j];
            scale.push(1.0);
        } else {
            scale.push((sq[j] / rows as f64).sqrt());
        }
    }
    Ok(Standardizer { mean, scale })
}

/// Maps `x -> (x - mean) / scale` with the training statistics.
pub fn apply_standardizer(s: &Standardizer, ds: &SequenceDataset) -> Result<SequenceDataset> {
    if s.mean.len() != ds.n_in() {
        return Err(Error::Dimension(format!(
            "standardizer fitted on {} features, dataset has {}",
            s.mean.len(),
            ds.n_in()
        )));
    }
    Ok(ds.map_features(|j, v| (v - s.mean[j]) / s.scale[j]))
}

/// Per-feature min/max bounds fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxBounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(train: &SequenceDataset) -> Result<MinMaxBounds> {
    let pooled = train.pooled_frames();
    if pooled.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let cols = pooled.cols();
    let mut min = vec![f64::INFINITY; cols];
    let mut max = vec![f64::NEG_INFINITY; cols];
    for r in 0..pooled.rows() {
        for (j, &v) in pooled.row(r).iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(MinMaxBounds { min, max })
}

/// Maps `x -> (x - min) / (max - min)` with training bounds; constant
/// features map to 0. Held-out values may fall outside `[0, 1]`.
pub fn minmax_rescale(bounds: &MinMaxBounds, ds: &SequenceDataset) -> Result<SequenceDataset> {
    if bounds.min.len() != ds.n_in() {
        return Err(Error::Dimension(format!(
            "bounds fitted on {} features, dataset has {}",
            bounds.min.len(),
            ds.n_in()
        )));
    }
    Ok(ds.map_features(|j, v| {
        let span = bounds.max[j] - bounds.min[j];
        if span == 0.0 {
            0.0
        } else {
            (v - bounds.min[j]) / span
        }
    }))
}

/// One-hot target matrix for every sequence, `T_i x n_classes` each.
pub fn one_hot_targets(ds: &SequenceDataset) -> Result<Vec<DenseMatrix>> {
    let n_out = ds.n_classes();
    ds.sequences
        .iter()
        .map(|seq| {
            let t = seq.features.rows();
            let mut m = DenseMatrix::zeros(t, n_out);
            match &seq.target {
                Target::Frames(labels) => {
                    for (n, &label) in labels.iter().enumerate() {
                        if label >= n_out {
                            return Err(Error::Label(format!("label {label} >= {n_out}")));
                        }
                        m.set(n, label, 1.0);
                    }
                }
                Target::Sequence(label) => {
                    if *label >= n_out {
                        return Err(Error::Label(format!("label {label} >= {n_out}")));
                    }
                    for n in 0..t {
                        m.set(n, *label, 1.0);
                    }
                }
            }
            Ok(m)
        })
        .collect()
}

/// Per-row argmax; ties go to the lowest index.
pub fn frame_decisions(y: &DenseMatrix) -> Vec<usize> {
    (0..y.rows()).map(|r| argmax(y.row(r))).collect()
}

/// Argmax of the column sums; ties go to the lowest index.
pub fn sequence_decision(y: &DenseMatrix) -> Result<usize> {
    if y.rows() == 0 {
        return Err(Error::DegenerateInput("empty sequence".into()));
    }
    let mut sums = vec![0.0; y.cols()];
    for r in 0..y.rows() {
        for (j, &v) in y.row(r).iter().enumerate() {
            sums[j] += v;
        }
    }
    Ok(argmax(&sums))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Mean squared error over all frames and outputs.
pub fn mse(y: &DenseMatrix, d: &DenseMatrix) -> Result<f64> {
    if y.rows() != d.rows() || y.cols() != d.cols() {
        return Err(Error::Dimension(format!(
            "mse: {}x{} vs {}x{}",
            y.rows(),
            y.cols(),
            d.rows(),
            d.cols()
        )));
    }
    let n = y.values().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = y
        .values()
        .iter()
        .zip(d.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

/// Frame error rate: misclassified frames over total frames.
pub fn fer(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    error_rate(predicted, truth, "frames")
}

/// Classification error rate: misclassified sequences over total sequences.
pub fn cer(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    error_rate(predicted, truth, "sequences")
}

fn error_rate(predicted: &[usize], truth: &[usize], what: &str) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} {what}",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::DegenerateInput(format!("no {what}")));
    }
    let errors = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p != t)
        .count();
    Ok(errors as f64 / predicted.len() as f64)
}

/// Summary statistics reported by `describe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_in: usize,
    pub n_sequences: usize,
    pub n_out: usize,
    pub task_kind: TaskKind,
    pub t_mean: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub n_samples: usize,
}

pub fn describe(ds: &SequenceDataset) -> DatasetStats {
    let lengths: Vec<usize> = ds.sequences.iter().map(|s| s.features.rows()).collect();
    let n_samples: usize = lengths.iter().sum();
    DatasetStats {
        n_in: ds.n_in(),
        n_sequences: ds.n_sequences(),
        n_out: ds.n_classes(),
        task_kind: ds.task_kind(),
        t_mean: n_samples as f64 / lengths.len() as f64,
        t_min: lengths.iter().copied().min().unwrap_or(0),
        t_max: lengths.iter().copied().max().unwrap_or(0),
        n_samples,
    }
}
