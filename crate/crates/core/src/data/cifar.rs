//! CIFAR-10 binary batch reader.
//!
//! Each batch file is a sequence of 3073-byte records: one label byte
//! followed by 3072 pixel bytes in R, G, B plane order (32x32 each).
//! Pixels are scaled to `[0, 1]` by dividing by 255.

use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::{Error, Result};

const RECORD_BYTES: usize = 3073;
const PIXELS: usize = 3072;
const TRAIN_BATCHES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_BATCH: &str = "test_batch.bin";

/// The two CIFAR-10 splits.
pub struct Cifar10 {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Load the official CIFAR-10 binary batches from `directory_path`.
pub fn load_cifar10(directory_path: &Path) -> Result<Cifar10> {
    let mut train_values = Vec::new();
    let mut train_labels = Vec::new();
    for name in TRAIN_BATCHES {
        read_batch(&directory_path.join(name), &mut train_values, &mut train_labels)?;
    }
    let mut test_values = Vec::new();
    let mut test_labels = Vec::new();
    read_batch(&directory_path.join(TEST_BATCH), &mut test_values, &mut test_labels)?;

    Ok(Cifar10 {
        train: LabeledDataset::new(vec![3, 32, 32], train_values, train_labels, 10)?,
        test: LabeledDataset::new(vec![3, 32, 32], test_values, test_labels, 10)?,
    })
}

fn read_batch(path: &Path, values: &mut Vec<f64>, labels: &mut Vec<usize>) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::format(
            path,
            format!(
                "file size {} is not a positive multiple of the {RECORD_BYTES}-byte record",
                bytes.len()
            ),
        ));
    }
    for record in bytes.chunks_exact(RECORD_BYTES) {
        let label = record[0];
        if label >= 10 {
            return Err(Error::format(path, format!("label byte {label} >= 10")));
        }
        labels.push(label as usize);
        values.extend(record[1..=PIXELS].iter().map(|&b| (b as f32 / 255.0) as f64));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_records(dir: &Path, name: &str, records: &[(u8, u8)]) {
        // Each record: label byte + 3072 copies of a fill byte.
        let mut bytes = Vec::new();
        for &(label, fill) in records {
            bytes.push(label);
            bytes.extend(std::iter::repeat(fill).take(PIXELS));
        }
        fs::write(dir.join(name), bytes).unwrap();
    }

    fn fake_cifar_dir(records_per_batch: &[(u8, u8)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for name in TRAIN_BATCHES {
            write_records(dir.path(), name, records_per_batch);
        }
        write_records(dir.path(), TEST_BATCH, records_per_batch);
        dir
    }

    #[test]
    fn reads_labels_and_scales_pixels() {
        let dir = fake_cifar_dir(&[(3, 255), (7, 0)]);
        let data = load_cifar10(dir.path()).unwrap();
        assert_eq!(data.train.len(), 10); // 2 records x 5 batches
        assert_eq!(data.test.len(), 2);
        assert_eq!(data.train.label(0), 3);
        assert_eq!(data.train.label(1), 7);
        assert_eq!(data.train.sample(0)[0], 1.0); // byte 255 -> exactly 1.0
        assert_eq!(data.train.sample(1)[0], 0.0);
        assert_eq!(data.train.shape(), &[3, 32, 32]);
        assert_eq!(data.train.num_classes(), 10);
    }

    #[test]
    fn truncated_record_is_rejected() {
        let dir = fake_cifar_dir(&[(1, 10)]);
        let path = dir.path().join(TRAIN_BATCHES[0]);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(load_cifar10(dir.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn label_byte_out_of_range_is_rejected() {
        let dir = fake_cifar_dir(&[(10, 0)]);
        assert!(matches!(load_cifar10(dir.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_batch_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_cifar10(dir.path()), Err(Error::Io { .. })));
    }
}
