//! Synthetic datasets for clustering and sequence-classification tests.

use kmesn::data::{Sequence, SequenceDataset, Target, TaskKind};
use kmesn::linalg::DenseMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Isotropic Gaussian blobs around the given centers, `per_cluster` points
/// each, in center order.
pub fn gaussian_blobs(
    centers: &[Vec<f64>],
    sigma: f64,
    per_cluster: usize,
    seed: u64,
) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let dim = centers[0].len();
    let mut rows = Vec::with_capacity(centers.len() * per_cluster);
    for center in centers {
        for _ in 0..per_cluster {
            let row: Vec<f64> = center
                .iter()
                .map(|&c| {
                    let n: f64 = normal.sample(&mut rng);
                    c + sigma * n
                })
                .collect();
            rows.push(row);
        }
    }
    assert_eq!(rows[0].len(), dim);
    DenseMatrix::from_rows(&rows).unwrap()
}

/// Three well-separated 2-D blob centers (pairwise distance >= 2).
pub fn blob_centers_3() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![2.5, 0.0], vec![0.0, 2.5]]
}

/// Parameters of the prototype Markov-chain benchmark task.
pub const MARKOV_CLASSES: usize = 8;
pub const MARKOV_DIM: usize = 20;
pub const MARKOV_FRAMES: usize = 30;
const MARKOV_NOISE: f64 = 0.3;
const P_STAY: f64 = 0.6;

/// Sequence-classification benchmark: 8 unit-norm prototype vectors in 20
/// dimensions; each class walks a cyclic Markov chain over its own window
/// of three prototypes (class c visits prototypes c, c+1, c+2 mod 8) and
/// emits noisy prototype observations. Neighboring classes share two of
/// their three prototypes, so single frames are ambiguous; the visit
/// statistics over the sequence identify the class.
pub fn markov_prototype_task(
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> (SequenceDataset, SequenceDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;

    let prototypes: Vec<Vec<f64>> = (0..MARKOV_CLASSES)
        .map(|_| {
            let mut p: Vec<f64> = (0..MARKOV_DIM).map(|_| normal.sample(&mut rng)).collect();
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut p {
                *v /= norm;
            }
            p
        })
        .collect();

    let gen_split = |count: usize, rng: &mut ChaCha8Rng| -> SequenceDataset {
        let sequences: Vec<Sequence> = (0..count)
            .map(|i| {
                let class = i % MARKOV_CLASSES;
                // Position within the class's three-prototype cycle.
                let mut position = rng.random_range(0..3usize);
                let mut rows = Vec::with_capacity(MARKOV_FRAMES);
                for _ in 0..MARKOV_FRAMES {
                    let state = (class + position) % MARKOV_CLASSES;
                    let row: Vec<f64> = prototypes[state]
                        .iter()
                        .map(|&p| {
                            let n: f64 = normal.sample(rng);
                            p + MARKOV_NOISE * n
                        })
                        .collect();
                    rows.push(row);
                    let r: f64 = rng.random_range(0.0..1.0);
                    if r >= P_STAY {
                        position = (position + 1) % 3;
                    }
                }
                Sequence {
                    features: DenseMatrix::from_rows(&rows).unwrap(),
                    target: Target::Sequence(class),
                }
            })
            .collect();
        SequenceDataset::new(sequences, MARKOV_CLASSES, TaskKind::SequenceLevel).unwrap()
    };

    let train = gen_split(n_train, &mut rng);
    let test = gen_split(n_test, &mut rng);
    (train, test)
}

/// A small frame-level dataset whose label is decidable from the current
/// frame alone; useful for fast pipeline smoke tests.
pub fn tiny_frame_task(n_sequences: usize, frames: usize, seed: u64) -> SequenceDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences: Vec<Sequence> = (0..n_sequences)
        .map(|_| {
            let mut rows = Vec::with_capacity(frames);
            let mut labels = Vec::with_capacity(frames);
            for _ in 0..frames {
                let class = rng.random_range(0..3usize);
                let mut row = vec![0.0; 4];
                row[class] = 1.0;
                row[3] = rng.random_range(-0.2..0.2);
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
