//! IDX file reader (the MNIST container format).
//!
//! Images file: magic `0x00000803`, then count/rows/cols as big-endian u32,
//! then one byte per pixel. Labels file: magic `0x00000801`, then count,
//! then one byte per label.

use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Load an IDX image/label file pair. Pixels are scaled to `[0, 1]`;
/// the class count is `max label + 1`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let magic = be_u32(images_path, &images, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            images_path,
            format!("magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(images_path, &images, 4)? as usize;
    let rows = be_u32(images_path, &images, 8)? as usize;
    let cols = be_u32(images_path, &images, 12)? as usize;
    let pixel_bytes = &images[16..];
    if pixel_bytes.len() != count * rows * cols {
        return Err(Error::format(
            images_path,
            format!(
                "pixel section holds {} bytes, expected {}",
                pixel_bytes.len(),
                count * rows * cols
            ),
        ));
    }

    let magic = be_u32(labels_path, &labels, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            labels_path,
            format!("magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let label_count = be_u32(labels_path, &labels, 4)? as usize;
    if label_count != count {
        return Err(Error::format(
            labels_path,
            format!("{label_count} labels for {count} images"),
        ));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != count {
        return Err(Error::format(labels_path, "truncated label section"));
    }

    let values: Vec<f64> = pixel_bytes.iter().map(|&b| (b as f32 / 255.0) as f64).collect();
    let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1).max(1);
    LabeledDataset::new(vec![1, rows, cols], values, labels, num_classes)
}

fn be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(path, "unexpected end of file"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_idx(dir: &Path, pixels: &[Vec<u8>], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let side = (pixels[0].len() as f64).sqrt() as usize;
        let mut img = Vec::new();
        img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&(pixels.len() as u32).to_be_bytes());
        img.extend_from_slice(&(side as u32).to_be_bytes());
        img.extend_from_slice(&(side as u32).to_be_bytes());
        for p in pixels {
            img.extend_from_slice(p);
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lab.extend_from_slice(labels);
        let ip = dir.join("img.idx");
        let lp = dir.join("lab.idx");
        fs::write(&ip, img).unwrap();
        fs::write(&lp, lab).unwrap();
        (ip, lp)
    }

    #[test]
    fn single_sample_pair_loads() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx(dir.path(), &[vec![255, 0, 128, 64]], &[2]);
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.shape(), &[1, 2, 2]);
        assert_eq!(ds.label(0), 2);
        assert_eq!(ds.num_classes(), 3);
        assert_eq!(ds.sample(0)[0], 1.0);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx(dir.path(), &[vec![0; 4], vec![0; 4]], &[1]);
        // Rewrite labels with a count that disagrees with the image file.
        let mut lab = Vec::new();
        lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        lab.extend_from_slice(&1u32.to_be_bytes());
        lab.push(1);
        fs::write(&lp, lab).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_idx(dir.path(), &[vec![0; 4]], &[0]);
        let mut bytes = fs::read(&ip).unwrap();
        bytes[3] = 0x99;
        fs::write(&ip, bytes).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));
    }
}
