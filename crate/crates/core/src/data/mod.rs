//! Dataset ingestion, toy-data generation, and per-class indexing.
//!
//! A [`LabeledDataset`] holds N samples that are either image tensors
//! (`[channels, height, width]`, values in `[0, 1]`) or plain feature
//! vectors (`[dim]`), plus one integer label per sample. Sample ids are the
//! positions `0..N-1`; every selection operation in this crate indexes into
//! this universe. Datasets are immutable after construction.

mod cifar;
mod idx;
mod packed;

pub use cifar::{load_cifar10, Cifar10};
pub use idx::load_idx;
pub use packed::{load_packed, save_packed, PackedTensorSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// N labeled samples of a common shape.
///
/// Values are held as f64 for training math, but every loader and
/// generator emits f32-representable values, so conversion to the packed
/// interchange format is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    shape: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(
        shape: Vec<usize>,
        values: Vec<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || numel == 0 {
            return Err(Error::Dataset("sample shape must be non-empty".into()));
        }
        if labels.is_empty() {
            return Err(Error::Dataset("dataset must hold at least one sample".into()));
        }
        if values.len() != labels.len() * numel {
            return Err(Error::Dataset(format!(
                "value buffer holds {} entries, expected {} ({} samples x {} values)",
                values.len(),
                labels.len() * numel,
                labels.len(),
                numel
            )));
        }
        if num_classes < 1 {
            return Err(Error::Dataset("num_classes must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Dataset(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            shape,
            values,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample shape: `[c, h, w]` for images, `[d]` for feature vectors.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Values per sample.
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> usize {
        self.labels[id]
    }

    pub fn sample(&self, id: usize) -> &[f64] {
        let numel = self.numel();
        &self.values[id * numel..(id + 1) * numel]
    }

    /// True when samples are `[c, h, w]` image tensors.
    pub fn is_image(&self) -> bool {
        self.shape.len() == 3
    }

    /// New dataset holding the given sample ids, in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        let numel = self.numel();
        let mut values = Vec::with_capacity(ids.len() * numel);
        let mut labels = Vec::with_capacity(ids.len());
        for &id in ids {
            if id >= self.len() {
                return Err(Error::Dataset(format!(
                    "sample id {id} out of range for dataset of size {}",
                    self.len()
                )));
            }
            values.extend_from_slice(self.sample(id));
            labels.push(self.labels[id]);
        }
        Self::new(self.shape.clone(), values, labels, self.num_classes)
    }

    /// Concatenate two datasets of identical shape and class count.
    pub fn concat(&self, other: &LabeledDataset) -> Result<Self> {
        if self.shape != other.shape || self.num_classes != other.num_classes {
            return Err(Error::Dataset(
                "cannot concatenate datasets of different shape or class count".into(),
            ));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(self.shape.clone(), values, labels, self.num_classes)
    }

    /// Convert to a packed record set (values narrowed to f32).
    pub fn to_packed(&self) -> Result<PackedTensorSet> {
        PackedTensorSet::new(
            self.shape.clone(),
            self.num_classes,
            self.labels.iter().map(|&l| l as u32).collect(),
            self.values.iter().map(|&v| v as f32).collect(),
        )
    }

    /// Build a dataset from a packed record set (values widened to f64).
    pub fn from_packed(set: &PackedTensorSet) -> Result<Self> {
        Self::new(
            set.shape().to_vec(),
            set.values().iter().map(|&v| v as f64).collect(),
            set.labels().iter().map(|&l| l as usize).collect(),
            set.num_classes(),
        )
    }
}

/// Per-class lists of sample ids. The lists are pairwise disjoint, each
/// sorted ascending, and their union is exactly `0..N-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndex {
    classes: Vec<Vec<usize>>,
}

impl ClassIndex {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Sample ids of one class, sorted ascending.
    pub fn class(&self, c: usize) -> &[usize] {
        &self.classes[c]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.classes.iter().map(|v| v.as_slice())
    }

    /// Total number of indexed samples.
    pub fn total(&self) -> usize {
        self.classes.iter().map(|c| c.len()).sum()
    }
}

/// Group sample ids by class label.
pub fn class_partition(dataset: &LabeledDataset) -> ClassIndex {
    let mut classes = vec![Vec::new(); dataset.num_classes()];
    for (id, &label) in dataset.labels().iter().enumerate() {
        classes[label].push(id);
    }
    ClassIndex { classes }
}

/// Deterministic Gaussian class blobs.
///
/// Class centers are pseudo-random points scaled by `center_spread`; each
/// class contributes `per_class` samples drawn around its center with
/// standard deviation `noise_std`. Samples are grouped by class, so ids
/// `c * per_class .. (c + 1) * per_class` belong to class `c`.
pub fn make_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    center_spread: f64,
    noise_std: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if num_classes == 0 || per_class == 0 || dim == 0 {
        return Err(Error::Dataset("blob counts must be positive".into()));
    }
    if noise_std < 0.0 {
        return Err(Error::Dataset("noise_std must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![0.0; num_classes * dim];
    for v in centers.iter_mut() {
        *v = center_spread * standard_normal(&mut rng);
    }
    let mut values = Vec::with_capacity(num_classes * per_class * dim);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for c in 0..num_classes {
        let center = &centers[c * dim..(c + 1) * dim];
        for _ in 0..per_class {
            for &m in center {
                // Quantize to f32 so packed export round-trips exactly.
                values.push((m + noise_std * standard_normal(&mut rng)) as f32 as f64);
            }
            labels.push(c);
        }
    }
    LabeledDataset::new(vec![dim], values, labels, num_classes)
}

/// Box-Muller standard normal draw.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_groups_by_label() {
        let ds = LabeledDataset::new(vec![1], vec![0.0, 1.0, 2.0], vec![0, 1, 0], 2).unwrap();
        let index = class_partition(&ds);
        assert_eq!(index.class(0), &[0, 2]);
        assert_eq!(index.class(1), &[1]);
    }

    #[test]
    fn partition_handles_single_class() {
        let ds = LabeledDataset::new(vec![1], vec![0.0; 4], vec![1, 1, 1, 1], 3).unwrap();
        let index = class_partition(&ds);
        assert!(index.class(0).is_empty());
        assert_eq!(index.class(1).len(), 4);
        assert!(index.class(2).is_empty());
    }

    #[test]
    fn partition_covers_random_dataset() {
        // Oracle: recount labels by an independent linear scan.
        let ds = make_blobs(7, 143, 3, 4.0, 1.0, 99).unwrap();
        let index = class_partition(&ds);
        assert_eq!(index.total(), ds.len());
        let mut seen = vec![false; ds.len()];
        for c in 0..index.num_classes() {
            let mut prev: Option<usize> = None;
            for &id in index.class(c) {
                assert_eq!(ds.label(id), c);
                assert!(!seen[id], "id {id} appears twice");
                seen[id] = true;
                if let Some(p) = prev {
                    assert!(p < id, "class list not sorted");
                }
                prev = Some(id);
            }
        }
        assert!(seen.iter().all(|&s| s));
        let mut counted = vec![0usize; ds.num_classes()];
        for &l in ds.labels() {
            counted[l] += 1;
        }
        for c in 0..ds.num_classes() {
            assert_eq!(counted[c], index.class(c).len());
        }
    }

    #[test]
    fn blobs_are_balanced_and_deterministic() {
        let a = make_blobs(10, 500, 2, 5.0, 1.0, 0).unwrap();
        assert_eq!(a.len(), 5000);
        let index = class_partition(&a);
        for c in 0..10 {
            assert_eq!(index.class(c).len(), 500);
        }
        let b = make_blobs(10, 500, 2, 5.0, 1.0, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_collapses_to_centers() {
        let ds = make_blobs(3, 5, 2, 4.0, 0.0, 7).unwrap();
        let index = class_partition(&ds);
        for c in 0..3 {
            let ids = index.class(c);
            let first = ds.sample(ids[0]).to_vec();
            for &id in ids {
                assert_eq!(ds.sample(id), &first[..]);
            }
        }
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let err = LabeledDataset::new(vec![1], vec![0.0, 0.0], vec![0, 5], 2).unwrap_err();
        assert!(matches!(err, Error::Dataset(_)));
    }

    #[test]
    fn subset_preserves_order_and_labels() {
        let ds = make_blobs(2, 3, 2, 1.0, 0.5, 1).unwrap();
        let sub = ds.subset(&[4, 0]).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.label(0), ds.label(4));
        assert_eq!(sub.sample(1), ds.sample(0));
    }
}
