//! Packed tensor file: the binary interchange format for distilled sets and
//! exported coresets.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "CPTS"
//! version    u32      1
//! count      u64      number of records, must be >= 1
//! classes    u32      number of classes
//! ndim       u32      per-sample dimensions (1 for vectors, 3 for images)
//! dims       u32 * ndim
//! records    count times: label u32, then numel f32 values
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

const MAGIC: [u8; 4] = *b"CPTS";
const VERSION: u32 = 1;

/// Labeled raw tensors with a shared shape; the on-disk unit for distilled
/// sets and emitted coresets. Values are 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedTensorSet {
    shape: Vec<usize>,
    num_classes: usize,
    labels: Vec<u32>,
    values: Vec<f32>,
}

impl PackedTensorSet {
    pub fn new(
        shape: Vec<usize>,
        num_classes: usize,
        labels: Vec<u32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || numel == 0 {
            return Err(Error::Dataset("packed set shape must be non-empty".into()));
        }
        if labels.is_empty() {
            return Err(Error::Dataset("packed set must hold at least one record".into()));
        }
        if values.len() != labels.len() * numel {
            return Err(Error::Dataset(format!(
                "packed set holds {} values, expected {}",
                values.len(),
                labels.len() * numel
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::Dataset(format!(
                "packed record label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            shape,
            num_classes,
            labels,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn record(&self, i: usize) -> (u32, &[f32]) {
        let numel = self.numel();
        (self.labels[i], &self.values[i * numel..(i + 1) * numel])
    }

    /// Records of one class, preserving record order.
    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

pub fn save_packed(set: &PackedTensorSet, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + set.len() * (4 + set.numel() * 4));
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(set.num_classes as u32).to_le_bytes());
    buf.extend_from_slice(&(set.shape.len() as u32).to_le_bytes());
    for &d in &set.shape {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let numel = set.numel();
    for i in 0..set.len() {
        buf.extend_from_slice(&set.labels[i].to_le_bytes());
        for &v in &set.values[i * numel..(i + 1) * numel] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_packed(path: &Path) -> Result<PackedTensorSet> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor::new(path, &bytes);

    if cur.take(4)? != MAGIC {
        return Err(Error::format(path, "bad magic, not a packed tensor file"));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let count = cur.u64()? as usize;
    if count == 0 {
        return Err(Error::format(path, "packed set holds zero records"));
    }
    let num_classes = cur.u32()? as usize;
    let ndim = cur.u32()? as usize;
    if ndim == 0 || ndim > 4 {
        return Err(Error::format(path, format!("implausible ndim {ndim}")));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(cur.u32()? as usize);
    }
    let numel: usize = shape.iter().product();
    if numel == 0 {
        return Err(Error::format(path, "zero-sized sample shape"));
    }

    let expected = count * (4 + numel * 4);
    if cur.remaining() != expected {
        return Err(Error::format(
            path,
            format!(
                "record section holds {} bytes, expected {expected} for {count} records",
                cur.remaining()
            ),
        ));
    }

    let mut labels = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count * numel);
    for _ in 0..count {
        let label = cur.u32()?;
        if label as usize >= num_classes {
            return Err(Error::format(
                path,
                format!("record label {label} out of range for {num_classes} classes"),
            ));
        }
        labels.push(label);
        for _ in 0..numel {
            values.push(f32::from_le_bytes(cur.take(4)?.try_into().unwrap()));
        }
    }
    PackedTensorSet::new(shape, num_classes, labels, values)
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self { path, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.path, "unexpected end of file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::mem::forget(dir); // keep alive for the test process
        path
    }

    #[test]
    fn round_trip_small_set() {
        let set = PackedTensorSet::new(
            vec![2],
            3,
            vec![0, 2, 1],
            vec![0.5, -1.25, 3.0, 0.0, 1e-7, 42.0],
        )
        .unwrap();
        let path = tmp("rt.cpts");
        save_packed(&set, &path).unwrap();
        let back = load_packed(&path).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let set = PackedTensorSet::new(vec![1], 2, vec![1], vec![1.0]).unwrap();
        let path = tmp("bad.cpts");
        save_packed(&set, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = load_packed(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let set = PackedTensorSet::new(vec![2], 2, vec![0, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let path = tmp("trunc.cpts");
        save_packed(&set, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_packed(&path).is_err());
    }

    #[test]
    fn empty_set_is_invalid() {
        assert!(PackedTensorSet::new(vec![1], 2, vec![], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(
            count in 1usize..20,
            numel in 1usize..16,
            classes in 1u32..8,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<u32> = (0..count).map(|_| rng.gen_range(0..classes)).collect();
            let values: Vec<f32> = (0..count * numel)
                .map(|_| f32::from_bits(rng.gen::<u32>()))
                .map(|v| if v.is_finite() { v } else { 0.0 })
                .collect();
            let set = PackedTensorSet::new(vec![numel], classes as usize, labels, values).unwrap();
            let path = tmp("prop.cpts");
            save_packed(&set, &path).unwrap();
            let back = load_packed(&path).unwrap();
            // Bit-exact comparison, including negative zero.
            prop_assert_eq!(set.labels(), back.labels());
            prop_assert_eq!(set.values().len(), back.values().len());
            for (a, b) in set.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
