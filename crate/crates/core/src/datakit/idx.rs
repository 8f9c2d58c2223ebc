//! IDX (MNIST) reader. Big-endian `u32` magic and dimensions, then raw bytes.

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::float::Float;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::TruncatedFile(path.to_path_buf()))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let got = be_u32(bytes, 0, path)?;
    if got != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            got,
        });
    }
    Ok(())
}

/// Images are flattened row-major and scaled to `[0, 1]`; labels become
/// classes `0..=max_label`.
pub fn load_idx<F: Float>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset<F>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = std::fs::read(ip)?;
    let labels = std::fs::read(lp)?;

    check_magic(&images, IMAGES_MAGIC, ip)?;
    let n = be_u32(&images, 4, ip)? as usize;
    let rows = be_u32(&images, 8, ip)? as usize;
    let cols = be_u32(&images, 12, ip)? as usize;
    let d = rows * cols;
    let pixels = images
        .get(16..16 + n * d)
        .ok_or_else(|| Error::TruncatedFile(ip.to_path_buf()))?;

    check_magic(&labels, LABELS_MAGIC, lp)?;
    let n_labels = be_u32(&labels, 4, lp)? as usize;
    let y: Vec<usize> = labels
        .get(8..8 + n_labels)
        .ok_or_else(|| Error::TruncatedFile(lp.to_path_buf()))?
        .iter()
        .map(|&b| b as usize)
        .collect();
    if n_labels != n {
        return Err(Error::Shape {
            what: "IDX label count",
            expected: n,
            got: n_labels,
        });
    }

    let scale = F::cst(1.0 / 255.0);
    let x = pixels.iter().map(|&p| F::cst(p as f64) * scale).collect();
    let c = y.iter().copied().max().map_or(0, |m| m + 1);
    LabeledDataset::new(x, d, c, y)
}
