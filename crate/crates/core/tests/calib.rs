//! Scratch calibration sweeps (ignored by default; run explicitly).

use ccfs_core::config::ModelSettings;
use ccfs_core::data::{class_partition, make_blobs, LabeledDataset};
use ccfs_core::nnet::{Architecture, Augmentation, LrSchedule, ModelSpec, TrainConfig};
use ccfs_core::pipeline::evaluate_coreset;
use ccfs_core::scores::DifficultyScores;
use ccfs_core::select::{
    self_evolved, BackfillPolicy, CoarseMode, FineMode, FilterSource, SelectionConfig,
};
use rand::prelude::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CLASSES: usize = 10;
const PER_CLASS: usize = 500;
const TEST_PER_CLASS: usize = 100;

fn blob_split(noise: f64, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let total = PER_CLASS + TEST_PER_CLASS;
    let all = make_blobs(CLASSES, total, 2, 5.0, noise, seed).unwrap();
    let mut train_ids = Vec::new();
    let mut test_ids = Vec::new();
    for c in 0..CLASSES {
        let base = c * total;
        train_ids.extend(base..base + PER_CLASS);
        test_ids.extend(base + PER_CLASS..base + total);
    }
    (all.subset(&train_ids).unwrap(), all.subset(&test_ids).unwrap())
}

fn train_config(epochs: usize, batch: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: batch,
        base_lr: 0.1,
        momentum: 0.9,
        weight_decay: 5e-4,
        lr_schedule: LrSchedule::Cosine,
        augmentation: Augmentation::None,
        seed,
        record_correctness: false,
    }
}

fn forgetting(train: &LabeledDataset, runs: usize, epochs: usize, seed: u64) -> DifficultyScores {
    let spec = ModelSpec {
        architecture: Architecture::Mlp { hidden: vec![32] },
        input_shape: vec![2],
        num_classes: CLASSES,
        init_seed: seed,
    };
    let mut tc = train_config(epochs, 128, seed);
    tc.record_correctness = true;
    ccfs_core::scores::forgetting_scores(train, &spec, &tc, runs).unwrap()
}

#[allow(clippy::too_many_arguments)]
fn ccfs(
    train: &LabeledDataset,
    test: &LabeledDataset,
    scores: &DifficultyScores,
    ipc: usize,
    alpha: f64,
    beta: f64,
    filter_epochs: usize,
    eval_epochs: usize,
    eval_seeds: usize,
    seed: u64,
) -> (f64, Vec<f64>, Vec<f64>, usize) {
    let config = SelectionConfig {
        ipc,
        distill_portion: alpha,
        num_phases: 3,
        window_start: beta,
        coarse_mode: CoarseMode::Misclassified,
        fine_mode: FineMode::Simplest,
        backfill: BackfillPolicy::EasiestRemaining,
        seed,
    };
    let spec = ModelSpec {
        architecture: Architecture::Mlp { hidden: vec![32] },
        input_shape: vec![2],
        num_classes: CLASSES,
        init_seed: seed + 100,
    };
    let run = self_evolved(
        train,
        scores,
        &config,
        FilterSource::Trained {
            spec: &spec,
            train: &train_config(filter_epochs, 32, seed + 200),
        },
        Some(test),
    )
    .unwrap();
    let coreset = run.state.to_packed(train).unwrap();
    let summary = evaluate_coreset(
        &coreset,
        test,
        &ModelSettings {
            architecture: Architecture::Mlp { hidden: vec![32] },
            init_seed: seed + 300,
        },
        &train_config(eval_epochs, 64, seed + 400),
        eval_seeds,
    )
    .unwrap();
    let accs: Vec<f64> = run.records.iter().filter_map(|r| r.holdout_accuracy).collect();
    let means: Vec<f64> = run
        .records
        .iter()
        .filter_map(|r| r.difficulty.map(|d| d.mean))
        .collect();
    let backfill: usize = run.records.iter().map(|r| r.backfill_count).sum();
    (summary.mean, accs, means, backfill)
}

fn random_arm(
    train: &LabeledDataset,
    test: &LabeledDataset,
    ipc: usize,
    eval_epochs: usize,
    eval_seeds: usize,
    seed: u64,
) -> f64 {
    let index = class_partition(train);
    let mut ids = Vec::new();
    for c in 0..CLASSES {
        let mut members = index.class(c).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        members.shuffle(&mut rng);
        ids.extend_from_slice(&members[..ipc]);
    }
    ids.sort_unstable();
    let coreset = train.subset(&ids).unwrap().to_packed().unwrap();
    evaluate_coreset(
        &coreset,
        test,
        &ModelSettings {
            architecture: Architecture::Mlp { hidden: vec![32] },
            init_seed: seed + 300,
        },
        &train_config(eval_epochs, 64, seed + 400),
        eval_seeds,
    )
    .unwrap()
    .mean
}

#[test]
#[ignore]
fn sweep_criterion_6() {
    let ipc = 50;
    for &noise in &[1.0f64, 1.5, 2.0] {
        for &beta in &[0.3f64, 0.5, 0.7, 0.9] {
            for &alpha in &[0.2f64, 0.4] {
                for &(fe, ee) in &[(30usize, 30usize), (60, 60)] {
                    let mut wins = 0;
                    let mut cm = 0.0;
                    let mut rm = 0.0;
                    let mut bf = 0usize;
                    for seed in 0..10u64 {
                        let (train, test) = blob_split(noise, seed);
                        let scores = forgetting(&train, 3, 40, seed);
                        let (c, _, _, b) =
                            ccfs(&train, &test, &scores, ipc, alpha, beta, fe, ee, 2, seed);
                        let r = random_arm(&train, &test, ipc, ee, 2, seed);
                        if c > r {
                            wins += 1;
                        }
                        cm += c / 10.0;
                        rm += r / 10.0;
                        bf += b;
                    }
                    println!(
                        "noise {noise} beta {beta} alpha {alpha} ep {fe}/{ee}: wins {wins}/10 ccfs {cm:.4} random {rm:.4} diff {:+.4} backfill {bf}",
                        cm - rm
                    );
                }
            }
        }
    }
}

#[test]
#[ignore]
fn sweep_criterion_8() {
    for &noise in &[1.5f64, 2.0, 2.5] {
        for &ipc in &[30usize, 50] {
            for &alpha in &[0.2f64, 0.4] {
                for &fe in &[20usize, 30] {
                    let mut acc_ok = 0;
                    let mut diff_ok = 0;
                    let mut bf_total = 0;
                    for seed in 0..10u64 {
                        let (train, test) = blob_split(noise, seed + 500);
                        let scores = forgetting(&train, 3, 40, seed + 500);
                        let (_, accs, means, bf) =
                            ccfs(&train, &test, &scores, ipc, alpha, 0.5, fe, fe, 1, seed);
                        acc_ok += accs.windows(2).all(|w| w[1] >= w[0]) as usize;
                        diff_ok += means.windows(2).all(|w| w[1] > w[0]) as usize;
                        bf_total += bf;
                    }
                    println!(
                        "noise {noise} ipc {ipc} alpha {alpha} fe {fe}: acc {acc_ok}/10 diff {diff_ok}/10 backfill {bf_total}"
                    );
                }
            }
        }
    }
}
