//! Dataset I/O round trips, preprocessing oracles, and metric properties.

mod common;

use common::oracles;
use kmesn::data::{
    apply_standardizer, cer, describe, fer, fit_minmax, fit_standardizer, frame_decisions,
    load_csv_from, minmax_rescale, mse, one_hot_targets, save_csv, sequence_decision,
    LoadOptions, Sequence, SequenceDataset, Target, TaskKind,
};
use kmesn::linalg::DenseMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_frame_dataset(seed: u64, sequences: usize, n_in: usize, n_classes: usize) -> SequenceDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seqs: Vec<Sequence> = (0..sequences)
        .map(|_| {
            let frames = rng.random_range(1..7usize);
            let rows: Vec<Vec<f64>> = (0..frames)
                .map(|_| {
                    (0..n_in)
                        .map(|_| {
                            // Mix awkward magnitudes to exercise the full
                            // decimal round trip.
                            let v: f64 = rng.random_range(-1.0..1.0);
                            let exp = rng.random_range(-12i32..12);
                            v * 10f64.powi(exp)
                        })
                        .collect()
                })
                .collect();
            let labels = (0..frames).map(|_| rng.random_range(0..n_classes)).collect();
            Sequence {
                features: DenseMatrix::from_rows(&rows).unwrap(),
                target: Target::Frames(labels),
            }
        })
        .collect();
    SequenceDataset::new(seqs, n_classes, TaskKind::FrameLevel).unwrap()
}

#[test]
fn save_load_round_trip_is_exact() {
    let ds = random_frame_dataset(1, 7, 4, 3);
    let mut buf = Vec::new();
    save_csv(&ds, &mut buf).unwrap();
    let back = load_csv_from(
        buf.as_slice(),
        LoadOptions {
            task: Some(TaskKind::FrameLevel),
            n_classes: Some(3),
        },
    )
    .unwrap();
    assert_eq!(ds, back);
}

#[test]
fn sequence_level_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seqs: Vec<Sequence> = (0..5)
        .map(|i| {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            Sequence {
                features: DenseMatrix::from_rows(&rows).unwrap(),
                target: Target::Sequence(i % 4),
            }
        })
        .collect();
    let ds = SequenceDataset::new(seqs, 4, TaskKind::SequenceLevel).unwrap();
    let mut buf = Vec::new();
    save_csv(&ds, &mut buf).unwrap();
    let back = load_csv_from(buf.as_slice(), LoadOptions::default()).unwrap();
    assert_eq!(ds, back);
}

#[test]
fn crlf_input_is_accepted() {
    let csv = "seq,t,f0,label\r\n0,0,0.25,1\r\n0,1,0.5,0\r\n";
    let ds = load_csv_from(csv.as_bytes(), LoadOptions::default()).unwrap();
    assert_eq!(ds.n_sequences(), 1);
    assert_eq!(ds.sequences()[0].features.get(1, 0), 0.5);
}

#[test]
fn standardizer_matches_hand_computation() {
    // Two training frames per feature: mean and population stddev by hand.
    let train = SequenceDataset::new(
        vec![Sequence {
            features: DenseMatrix::from_rows(&[vec![1.0, 10.0], vec![3.0, 30.0]]).unwrap(),
            target: Target::Sequence(0),
        }],
        1,
        TaskKind::SequenceLevel,
    )
    .unwrap();
    let s = fit_standardizer(&train).unwrap();
    assert_eq!(s.mean, vec![2.0, 20.0]);
    assert_eq!(s.scale, vec![1.0, 10.0]);

    // Held-out data transformed with the training statistics.
    let test = SequenceDataset::new(
        vec![Sequence {
            features: DenseMatrix::from_rows(&[vec![5.0, 0.0]]).unwrap(),
            target: Target::Sequence(0),
        }],
        1,
        TaskKind::SequenceLevel,
    )
    .unwrap();
    let out = apply_standardizer(&s, &test).unwrap();
    assert_eq!(out.sequences()[0].features.row(0), &[3.0, -2.0]);
}

#[test]
fn standardized_training_pool_has_zero_mean_unit_variance() {
    let ds = random_frame_dataset(9, 10, 5, 3);
    let s = fit_standardizer(&ds).unwrap();
    let out = apply_standardizer(&s, &ds).unwrap();
    let refit = fit_standardizer(&out).unwrap();
    for j in 0..5 {
        assert!(refit.mean[j].abs() < 1e-10, "mean {}", refit.mean[j]);
        assert!((refit.scale[j] - 1.0).abs() < 1e-8, "scale {}", refit.scale[j]);
    }
}

#[test]
fn minmax_held_out_values_use_training_bounds() {
    let train = SequenceDataset::new(
        vec![Sequence {
            features: DenseMatrix::from_rows(&[vec![2.0], vec![4.0]]).unwrap(),
            target: Target::Sequence(0),
        }],
        1,
        TaskKind::SequenceLevel,
    )
    .unwrap();
    let bounds = fit_minmax(&train).unwrap();
    let test = SequenceDataset::new(
        vec![Sequence {
            features: DenseMatrix::from_rows(&[vec![5.0], vec![1.0]]).unwrap(),
            target: Target::Sequence(0),
        }],
        1,
        TaskKind::SequenceLevel,
    )
    .unwrap();
    let out = minmax_rescale(&bounds, &test).unwrap();
    assert_eq!(out.sequences()[0].features.get(0, 0), 1.5);
    assert_eq!(out.sequences()[0].features.get(1, 0), -0.5);
}

#[test]
fn one_hot_rows_sum_to_one() {
    let ds = random_frame_dataset(17, 12, 3, 4);
    for m in one_hot_targets(&ds).unwrap() {
        for r in 0..m.rows() {
            let sum: f64 = m.row(r).iter().sum();
            assert_eq!(sum, 1.0);
            assert!(m.row(r).iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}

#[test]
fn frame_decisions_match_scan_oracle() {
    let y = oracles::random_dense(50, 6, 21);
    let got = frame_decisions(&y);
    for r in 0..50 {
        let mut best = 0;
        for c in 1..6 {
            if y.get(r, c) > y.get(r, best) {
                best = c;
            }
        }
        assert_eq!(got[r], best);
    }
}

#[test]
fn sequence_decision_matches_column_sum_oracle() {
    let y = oracles::random_dense(30, 5, 23);
    let got = sequence_decision(&y).unwrap();
    let mut sums = vec![0.0; 5];
    for r in 0..30 {
        for c in 0..5 {
            sums[c] += y.get(r, c);
        }
    }
    let want = sums
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .unwrap()
        .0;
    assert_eq!(got, want);
}

#[test]
fn metrics_match_counting_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let n = rng.random_range(1..1000usize);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let want = oracles::error_rate_oracle(&pred, &truth);
        assert_eq!(fer(&pred, &truth).unwrap(), want);
        assert_eq!(cer(&pred, &truth).unwrap(), want);
    }

    let y = oracles::random_dense(25, 4, 37);
    let d = oracles::random_dense(25, 4, 38);
    let got = mse(&y, &d).unwrap();
    let want = oracles::mse_oracle(&y, &d);
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn describe_matches_tally_oracle() {
    let ds = random_frame_dataset(41, 9, 4, 3);
    let stats = describe(&ds);
    let mut total = 0usize;
    let mut t_min = usize::MAX;
    let mut t_max = 0usize;
    for seq in ds.sequences() {
        let t = seq.features.rows();
        total += t;
        t_min = t_min.min(t);
        t_max = t_max.max(t);
    }
    assert_eq!(stats.n_samples, total);
    assert_eq!(stats.t_min, t_min);
    assert_eq!(stats.t_max, t_max);
    assert_eq!(stats.n_sequences, 9);
    assert_eq!(stats.n_in, 4);
    assert!((stats.t_mean - total as f64 / 9.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn error_rates_stay_in_unit_interval(
        pred in prop::collection::vec(0usize..6, 1..200),
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = pred.iter().map(|_| rng.random_range(0..6)).collect();
        let rate = fer(&pred, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&rate));
        prop_assert_eq!(fer(&pred, &pred).unwrap(), 0.0);
        prop_assert_eq!(cer(&pred, &truth).unwrap(), rate);
    }

    #[test]
    fn argmax_invariant_to_shift_and_positive_scale(
        seed in 0u64..1000,
        shift in -10.0f64..10.0,
        scale in 0.01f64..50.0,
    ) {
        let y = oracles::random_dense(8, 5, seed);
        let base = frame_decisions(&y);
        let transformed = DenseMatrix::from_values(
            8,
            5,
            y.values().iter().map(|v| v * scale + shift).collect(),
        ).unwrap();
        prop_assert_eq!(frame_decisions(&transformed), base);
    }

    #[test]
    fn sequence_decision_invariant_to_frame_order(seed in 0u64..1000) {
        // Integer-valued scores make the column sums exact, so any frame
        // permutation yields the same decision.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.random_range(-50i32..50) as f64).collect())
            .collect();
        let y = DenseMatrix::from_rows(&rows).unwrap();
        let mut reversed_rows = rows.clone();
        reversed_rows.reverse();
        let y_rev = DenseMatrix::from_rows(&reversed_rows).unwrap();
        prop_assert_eq!(
            sequence_decision(&y).unwrap(),
            sequence_decision(&y_rev).unwrap()
        );
    }
}
