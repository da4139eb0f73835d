use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("layer index {layer} out of range 1..={depth}")]
    LayerOutOfRange { layer: usize, depth: usize },

    #[error("rollback depth {k} out of range 0..={depth}")]
    RollbackOutOfRange { k: usize, depth: usize },

    /// The file does not start with the expected magic bytes.
    #[error("bad magic in {what}: expected {expected:02x?}, found {found:02x?}")]
    BadMagic {
        what: &'static str,
        expected: Vec<u8>,
        found: Vec<u8>,
    },

    #[error("unsupported {what} version {found} (expected {expected})")]
    UnsupportedVersion {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("truncated {what}: needed {needed} bytes, got {available}")]
    Truncated {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },

    #[error("dataset is already corrupted; refusing to compound label noise")]
    AlreadyCorrupted,

    /// Aggregation found (width, noise_ratio, seed) triples without a completed record.
    #[error("incomplete grid: missing {} run(s): {}", missing.len(), format_missing(missing))]
    IncompleteGrid { missing: Vec<(usize, f64, u64)> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_missing(missing: &[(usize, f64, u64)]) -> String {
    missing
        .iter()
        .map(|(w, r, s)| format!("(width={w}, noise_ratio={r}, seed={s})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
