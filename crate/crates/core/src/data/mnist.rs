//! MNIST in IDX format (big-endian). Files ending in `.gz` are inflated first.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array2;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
const CLASSES: usize = 10;

pub(crate) fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(Error::Truncated {
            what,
            needed: at + 4,
            available: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, what: &'static str) -> Result<()> {
    let found = be_u32(bytes, 0, what)?;
    if found != expected {
        return Err(Error::BadMagic {
            what,
            expected: expected.to_be_bytes().to_vec(),
            found: found.to_be_bytes().to_vec(),
        });
    }
    Ok(())
}

/// Parses an IDX image file into `(count, rows * cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    const WHAT: &str = "IDX images";
    check_magic(bytes, IMAGES_MAGIC, WHAT)?;
    let count = be_u32(bytes, 4, WHAT)? as usize;
    let rows = be_u32(bytes, 8, WHAT)? as usize;
    let cols = be_u32(bytes, 12, WHAT)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Malformed {
            what: WHAT,
            reason: format!("image dimensions {rows}x{cols}"),
        });
    }
    let needed = 16 + count * rows * cols;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: WHAT,
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Malformed {
            what: WHAT,
            reason: format!("{} trailing bytes", bytes.len() - needed),
        });
    }
    Ok((count, rows * cols, bytes[16..].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    const WHAT: &str = "IDX labels";
    check_magic(bytes, LABELS_MAGIC, WHAT)?;
    let count = be_u32(bytes, 4, WHAT)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: WHAT,
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Malformed {
            what: WHAT,
            reason: format!("{} trailing bytes", bytes.len() - needed),
        });
    }
    let labels: Vec<usize> = bytes[8..].iter().map(|&b| b as usize).collect();
    if let Some(&bad) = labels.iter().find(|&&y| y >= CLASSES) {
        return Err(Error::Malformed {
            what: WHAT,
            reason: format!("label {bad} out of range"),
        });
    }
    Ok(labels)
}

/// Assembles a dataset from in-memory IDX files.
pub fn mnist_from_bytes(name: &str, images: &[u8], labels: &[u8]) -> Result<LabeledDataset> {
    let (count, dim, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != count {
        return Err(Error::Malformed {
            what: "MNIST",
            reason: format!("{count} images but {} labels", labels.len()),
        });
    }
    let features = Array2::from_shape_vec(
        (count, dim),
        pixels.into_iter().map(|p| p as f64 / 255.0).collect(),
    )
    .expect("length checked");
    LabeledDataset::new(name, features, labels, CLASSES)
}

pub fn load_mnist(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let images = read_maybe_gz(images_path)?;
    let labels = read_maybe_gz(labels_path.as_ref())?;
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mnist".into());
    mnist_from_bytes(&name, &images, &labels)
}

/// Serializes images and labels back into IDX byte streams.
pub fn encode_idx(
    pixels: &[u8],
    count: usize,
    rows: usize,
    cols: usize,
    labels: &[u8],
) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    for v in [LABELS_MAGIC, labels.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    (img, lab)
}
