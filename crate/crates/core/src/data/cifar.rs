//! CIFAR-10 binary batches: 3073-byte records, label byte first.

use std::path::Path;

use ndarray::Array2;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const RECORD_LEN: usize = 1 + PIXELS;
pub const PIXELS: usize = 3 * 32 * 32;
const CLASSES: usize = 10;

/// Appends the records of one batch to `pixels` / `labels`.
fn parse_batch(bytes: &[u8], pixels: &mut Vec<f64>, labels: &mut Vec<usize>) -> Result<()> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::Malformed {
            what: "CIFAR-10 batch",
            reason: format!(
                "length {} is not a positive multiple of {RECORD_LEN}",
                bytes.len()
            ),
        });
    }
    for (r, record) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let label = record[0] as usize;
        if label >= CLASSES {
            return Err(Error::Malformed {
                what: "CIFAR-10 batch",
                reason: format!("record {r} has label byte {label}"),
            });
        }
        labels.push(label);
        pixels.extend(record[1..].iter().map(|&p| p as f64 / 255.0));
    }
    Ok(())
}

pub fn cifar10_from_bytes(name: &str, batches: &[&[u8]]) -> Result<LabeledDataset> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for b in batches {
        parse_batch(b, &mut pixels, &mut labels)?;
    }
    let features = Array2::from_shape_vec((labels.len(), PIXELS), pixels).expect("record layout");
    LabeledDataset::new(name, features, labels, CLASSES)
}

/// Concatenates the batches in the given order.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<LabeledDataset> {
    let mut blobs = Vec::with_capacity(batch_paths.len());
    for p in batch_paths {
        let p = p.as_ref();
        blobs.push(std::fs::read(p).map_err(|e| Error::io(p, e))?);
    }
    if blobs.is_empty() {
        return Err(Error::Domain("no CIFAR-10 batch files given".into()));
    }
    let views: Vec<&[u8]> = blobs.iter().map(Vec::as_slice).collect();
    cifar10_from_bytes("cifar10", &views)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, fill: u8) -> Vec<u8> {
        let mut r = vec![fill; RECORD_LEN];
        r[0] = label;
        r
    }

    #[test]
    fn concatenates_batches_in_order() {
        let a = [record(3, 255), record(1, 0)].concat();
        let b = record(7, 51);
        let d = cifar10_from_bytes("c", &[&a, &b]).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 3072);
        assert_eq!(d.labels(), &[3, 1, 7]);
        assert_eq!(d.features()[[0, 0]], 1.0);
        assert_eq!(d.features()[[2, 3071]], 0.2);
    }

    #[test]
    fn short_file_is_length_error() {
        let bytes = vec![0u8; 3072];
        let err = cifar10_from_bytes("c", &[&bytes]).unwrap_err();
        assert!(err.to_string().contains("3073"), "{err}");
    }

    #[test]
    fn label_byte_out_of_range() {
        let bytes = record(11, 0);
        let err = cifar10_from_bytes("c", &[&bytes]).unwrap_err();
        assert!(err.to_string().contains("label byte 11"), "{err}");
    }
}
