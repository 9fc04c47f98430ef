//! Big-endian IDX reader (the MNIST distribution format).

use std::path::Path;

use minmax_core::{DenseMatrix, LabeledDataset};

use crate::{HarnessError, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

/// Pixels scaled to `[0, 1]` with their image shape.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn check_header(path: &Path, bytes: &[u8], magic: u32, header: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(HarnessError::TruncatedFile { path: path.into(), expected: header, found: bytes.len() });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(HarnessError::BadMagic { path: path.into(), expected: magic, found });
    }
    if bytes.len() < header {
        return Err(HarnessError::TruncatedFile { path: path.into(), expected: header, found: bytes.len() });
    }
    Ok(())
}

/// Parses an image file held in memory; `path` is only used in errors.
pub fn parse_images(path: &Path, bytes: &[u8], limit: usize) -> Result<IdxImages> {
    check_header(path, bytes, IMAGE_MAGIC, 16)?;
    let (n, rows, cols) = (be_u32(bytes, 4) as usize, be_u32(bytes, 8) as usize, be_u32(bytes, 12) as usize);
    let count = n.min(limit);
    let need = 16 + count * rows * cols;
    if bytes.len() < need {
        return Err(HarnessError::TruncatedFile { path: path.into(), expected: need, found: bytes.len() });
    }
    let pixels = bytes[16..need].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(IdxImages { count, rows, cols, pixels })
}

pub fn parse_labels(path: &Path, bytes: &[u8], limit: usize) -> Result<Vec<usize>> {
    check_header(path, bytes, LABEL_MAGIC, 8)?;
    let count = (be_u32(bytes, 4) as usize).min(limit);
    let need = 8 + count;
    if bytes.len() < need {
        return Err(HarnessError::TruncatedFile { path: path.into(), expected: need, found: bytes.len() });
    }
    Ok(bytes[8..need].iter().map(|&b| b as usize).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| HarnessError::Io { path: path.into(), source })
}

/// Loads an image/label pair, keeping the first `limit` examples. The image
/// shape is returned alongside for transformation tasks.
pub fn load_idx_with_shape(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: usize,
) -> Result<(LabeledDataset<f64>, (usize, usize))> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = parse_images(ip, &read(ip)?, limit)?;
    let labels = parse_labels(lp, &read(lp)?, limit)?;
    if images.count != labels.len() {
        return Err(HarnessError::CountMismatch { images: images.count, labels: labels.len() });
    }
    if images.count == 0 {
        return Err(HarnessError::Config("IDX load produced an empty dataset".into()));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1).max(10);
    let inputs = DenseMatrix::new(images.count, images.rows * images.cols, images.pixels)?;
    Ok((LabeledDataset::new(inputs, labels, classes)?, (images.rows, images.cols)))
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: usize,
) -> Result<LabeledDataset<f64>> {
    Ok(load_idx_with_shape(images_path, labels_path, limit)?.0)
}
