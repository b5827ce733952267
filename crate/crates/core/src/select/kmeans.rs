//! Per-class k-means prototypes: the desk-scale stand-in for an externally
//! distilled set.
//!
//! The prototypes are Lloyd's-algorithm centroids of each class's samples,
//! labeled with the class. They compress easy, representative structure the
//! way a distilled set does, but they are NOT optimization-based
//! distillation; every artifact that carries them flags them as a
//! surrogate.

use rand::prelude::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{class_partition, LabeledDataset, PackedTensorSet};
use crate::{Error, Result};

/// Per-class k-means prototypes with seeded initialization: the initial
/// centroids of class `c` are `per_class_prototypes` distinct samples drawn
/// from stream `c + 1` of the seed.
pub fn kmeans_surrogate(
    dataset: &LabeledDataset,
    per_class_prototypes: usize,
    iterations: usize,
    seed: u64,
) -> Result<PackedTensorSet> {
    if per_class_prototypes < 1 {
        return Err(Error::Config("per_class_prototypes must be >= 1".into()));
    }
    let index = class_partition(dataset);
    let mut init = Vec::with_capacity(dataset.num_classes());
    for c in 0..dataset.num_classes() {
        let members = index.class(c);
        if members.len() < per_class_prototypes {
            return Err(Error::ClassTooSmall {
                class: c,
                have: members.len(),
                need: per_class_prototypes,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        let mut pool = members.to_vec();
        pool.shuffle(&mut rng);
        pool.truncate(per_class_prototypes);
        pool.sort_unstable();
        init.push(pool);
    }
    kmeans_surrogate_from(dataset, &init, iterations)
}

/// Per-class k-means prototypes from explicit initial centroids: cluster
/// each class's full sample set starting from the given member ids. The
/// prototype count of class `c` is `init_ids_per_class[c].len()`.
pub fn kmeans_surrogate_from(
    dataset: &LabeledDataset,
    init_ids_per_class: &[Vec<usize>],
    iterations: usize,
) -> Result<PackedTensorSet> {
    if iterations < 1 {
        return Err(Error::Config("iterations must be >= 1".into()));
    }
    if init_ids_per_class.len() != dataset.num_classes() {
        return Err(Error::Config(format!(
            "{} init lists for {} classes",
            init_ids_per_class.len(),
            dataset.num_classes()
        )));
    }
    let index = class_partition(dataset);
    let d = dataset.numel();
    let mut labels = Vec::new();
    let mut values: Vec<f32> = Vec::new();
    for (c, init_ids) in init_ids_per_class.iter().enumerate() {
        if init_ids.is_empty() {
            continue;
        }
        for &id in init_ids {
            if id >= dataset.len() || dataset.label(id) != c {
                return Err(Error::Config(format!(
                    "init id {id} is not a class-{c} sample"
                )));
            }
        }
        let members = index.class(c);
        let centroids = lloyd(dataset, members, init_ids, iterations);
        for centroid in centroids {
            labels.push(c as u32);
            values.extend(centroid.iter().map(|&v| v as f32));
        }
        debug_assert_eq!(values.len() % d, 0);
    }
    PackedTensorSet::new(dataset.shape().to_vec(), dataset.num_classes(), labels, values)
}

/// Fixed-iteration Lloyd's algorithm over one class. Ties in the
/// assignment step go to the lower centroid index; empty clusters keep
/// their previous centroid.
fn lloyd(
    dataset: &LabeledDataset,
    members: &[usize],
    init_ids: &[usize],
    iterations: usize,
) -> Vec<Vec<f64>> {
    let d = dataset.numel();
    let k = init_ids.len();
    let mut centroids: Vec<Vec<f64>> =
        init_ids.iter().map(|&id| dataset.sample(id).to_vec()).collect();
    for _ in 0..iterations {
        let mut sums = vec![vec![0.0f64; d]; k];
        let mut counts = vec![0usize; k];
        for &id in members {
            let x = dataset.sample(id);
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (j, centroid) in centroids.iter().enumerate() {
                let dist: f64 = centroid
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist < best_dist {
                    best_dist = dist;
                    best = j;
                }
            }
            counts[best] += 1;
            for (s, &v) in sums[best].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for (cv, s) in centroids[j].iter_mut().zip(&sums[j]) {
                    *cv = s / counts[j] as f64;
                }
            }
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;

    #[test]
    fn single_prototype_is_the_class_mean() {
        let ds = make_blobs(3, 20, 2, 5.0, 1.0, 11).unwrap();
        let set = kmeans_surrogate(&ds, 1, 5, 0).unwrap();
        assert_eq!(set.len(), 3);
        let index = class_partition(&ds);
        for c in 0..3 {
            let members = index.class(c);
            let mut mean = vec![0.0f64; 2];
            for &id in members {
                for (m, &v) in mean.iter_mut().zip(ds.sample(id)) {
                    *m += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= members.len() as f64;
            }
            let (label, values) = set.record(c);
            assert_eq!(label as usize, c);
            for (got, want) in values.iter().zip(&mean) {
                assert!((*got as f64 - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_noise_blobs_recover_centers() {
        let ds = make_blobs(4, 10, 3, 6.0, 0.0, 2).unwrap();
        let set = kmeans_surrogate(&ds, 1, 3, 9).unwrap();
        for c in 0..4 {
            let (_, values) = set.record(c);
            let sample = ds.sample(c * 10); // all class samples equal the center
            for (got, want) in values.iter().zip(sample) {
                assert!((*got as f64 - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn matches_independent_lloyd_run() {
        // Oracle: a separate Lloyd's implementation from the same init ids.
        let ds = make_blobs(2, 30, 2, 4.0, 1.5, 33).unwrap();
        let index = class_partition(&ds);
        let init: Vec<Vec<usize>> = (0..2)
            .map(|c| index.class(c)[..3].to_vec())
            .collect();
        let set = kmeans_surrogate_from(&ds, &init, 8).unwrap();

        let mut expected: Vec<Vec<f64>> = Vec::new();
        for c in 0..2usize {
            let members = index.class(c);
            let mut cents: Vec<Vec<f64>> =
                init[c].iter().map(|&id| ds.sample(id).to_vec()).collect();
            for _ in 0..8 {
                let mut assignments: Vec<usize> = Vec::new();
                for &id in members {
                    let x = ds.sample(id);
                    let mut best = 0;
                    let mut bd = f64::INFINITY;
                    for (j, cent) in cents.iter().enumerate() {
                        let dist: f64 =
                            cent.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                        if dist < bd {
                            bd = dist;
                            best = j;
                        }
                    }
                    assignments.push(best);
                }
                for j in 0..3 {
                    let assigned: Vec<usize> = members
                        .iter()
                        .zip(&assignments)
                        .filter(|(_, &a)| a == j)
                        .map(|(&id, _)| id)
                        .collect();
                    if assigned.is_empty() {
                        continue;
                    }
                    let mut mean = vec![0.0; 2];
                    for &id in &assigned {
                        for (m, &v) in mean.iter_mut().zip(ds.sample(id)) {
                            *m += v;
                        }
                    }
                    for m in mean.iter_mut() {
                        *m /= assigned.len() as f64;
                    }
                    cents[j] = mean;
                }
            }
            expected.extend(cents);
        }
        for (i, want) in expected.iter().enumerate() {
            let (_, got) = set.record(i);
            for (g, w) in got.iter().zip(want) {
                assert!((*g as f64 - w).abs() < 1e-6, "record {i}");
            }
        }
    }

    #[test]
    fn class_smaller_than_prototype_count_errors() {
        let ds = make_blobs(2, 3, 2, 4.0, 1.0, 0).unwrap();
        assert!(matches!(
            kmeans_surrogate(&ds, 5, 3, 0),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = make_blobs(3, 25, 2, 5.0, 1.0, 6).unwrap();
        let a = kmeans_surrogate(&ds, 4, 6, 42).unwrap();
        let b = kmeans_surrogate(&ds, 4, 6, 42).unwrap();
        assert_eq!(a, b);
    }
}
