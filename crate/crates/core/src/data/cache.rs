//! Dataset cache file.
//!
//! One line of JSON (terminated by `\n`) followed by three little-endian
//! blocks: `n * d` f64 features (row-major), `n` u16 current labels and `n`
//! u16 recovered labels. The header carries the corruption mask as the
//! sorted list of corrupted indices.

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const FORMAT: &str = "layerlens-dataset";
pub const VERSION: u32 = 1;
const WHAT: &str = "dataset cache";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format: String,
    pub v: u32,
    pub name: String,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub noise_ratio: Option<f64>,
    pub seed: Option<u64>,
    pub corrupted_indices: Vec<usize>,
}

/// Corruption provenance stored alongside a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CacheMeta {
    pub noise_ratio: Option<f64>,
    pub seed: Option<u64>,
}

pub fn encode_dataset(dataset: &LabeledDataset, meta: CacheMeta) -> Result<Vec<u8>> {
    if dataset.class_count() > u16::MAX as usize + 1 {
        return Err(Error::Domain(format!(
            "{} classes do not fit 16-bit labels",
            dataset.class_count()
        )));
    }
    let header = CacheHeader {
        format: FORMAT.into(),
        v: VERSION,
        name: dataset.name().into(),
        n: dataset.len(),
        d: dataset.dim(),
        k: dataset.class_count(),
        noise_ratio: meta.noise_ratio,
        seed: meta.seed,
        corrupted_indices: (0..dataset.len())
            .filter(|&i| dataset.corrupted_mask()[i])
            .collect(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    let n = dataset.len();
    let start = out.len();
    out.resize(start + 8 * n * dataset.dim() + 4 * n, 0);
    let mut at = start;
    for &v in dataset.features().iter() {
        LittleEndian::write_f64(&mut out[at..at + 8], v);
        at += 8;
    }
    for labels in [dataset.labels(), dataset.recovered_labels()] {
        for &y in labels {
            LittleEndian::write_u16(&mut out[at..at + 2], y as u16);
            at += 2;
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<(LabeledDataset, CacheMeta)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(Error::Malformed {
            what: WHAT,
            reason: "missing header line".into(),
        })?;
    let header: CacheHeader =
        serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::Malformed {
            what: WHAT,
            reason: format!("header: {e}"),
        })?;
    if header.format != FORMAT {
        return Err(Error::BadMagic {
            what: WHAT,
            expected: FORMAT.as_bytes().to_vec(),
            found: header.format.into_bytes(),
        });
    }
    if header.v != VERSION {
        return Err(Error::UnsupportedVersion {
            what: WHAT,
            expected: VERSION,
            found: header.v,
        });
    }
    let body = &bytes[newline + 1..];
    let (n, d) = (header.n, header.d);
    let needed = 8 * n * d + 4 * n;
    if body.len() < needed {
        return Err(Error::Truncated {
            what: WHAT,
            needed: newline + 1 + needed,
            available: bytes.len(),
        });
    }
    if body.len() > needed {
        return Err(Error::Malformed {
            what: WHAT,
            reason: format!("{} trailing bytes", body.len() - needed),
        });
    }
    let mut feats = vec![0.0; n * d];
    LittleEndian::read_f64_into(&body[..8 * n * d], &mut feats);
    let label_block = |off: usize| -> Vec<usize> {
        body[off..off + 2 * n]
            .chunks_exact(2)
            .map(|c| LittleEndian::read_u16(c) as usize)
            .collect()
    };
    let labels = label_block(8 * n * d);
    let recovered = label_block(8 * n * d + 2 * n);
    let mut mask = vec![false; n];
    for &i in &header.corrupted_indices {
        *mask.get_mut(i).ok_or(Error::Malformed {
            what: WHAT,
            reason: format!("corrupted index {i} out of range"),
        })? = true;
    }
    let features = Array2::from_shape_vec((n, d), feats).expect("length checked");
    let ds = LabeledDataset::from_parts(header.name, features, labels, recovered, mask, header.k)?;
    Ok((
        ds,
        CacheMeta {
            noise_ratio: header.noise_ratio,
            seed: header.seed,
        },
    ))
}

pub fn save_dataset(
    dataset: &LabeledDataset,
    meta: CacheMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_dataset(dataset, meta)?).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(LabeledDataset, CacheMeta)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}
