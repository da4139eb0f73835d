//! Run records, stored one JSON object per line.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, RunKey};
use crate::diagnostics::MetricKind;
use crate::error::{Error, Result};
use crate::rollback::RollbackSelection;

pub const RECORD_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Diagnostics measured after the fixed epoch budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Mean loss of the last training epoch (as seen during SGD).
    pub final_epoch_loss: f64,
    /// Against the labels the model was trained on.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub generalization_gap: Option<f64>,
    pub resilience: f64,
    pub utilization: Vec<f64>,
    pub contribution: BTreeMap<MetricKind, Vec<f64>>,
    pub rollback: Option<RollbackSelection>,
}

impl RunMetrics {
    pub fn scalar(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::TrainLoss => Some(self.train_loss),
            MetricKind::TrainAccuracy => Some(self.train_accuracy),
            MetricKind::Resilience => Some(self.resilience),
            MetricKind::TestLoss => self.test_loss,
            MetricKind::TestAccuracy => self.test_accuracy,
            MetricKind::GeneralizationGap => self.generalization_gap,
        }
    }

    pub fn is_finite(&self) -> bool {
        let scalars = MetricKind::ALL.iter().filter_map(|&m| self.scalar(m));
        let layers = self
            .utilization
            .iter()
            .chain(self.contribution.values().flatten())
            .copied();
        let rollback = self
            .rollback
            .iter()
            .flat_map(|r| r.holdout_losses.iter().copied());
        std::iter::once(self.final_epoch_loss)
            .chain(scalars)
            .chain(layers)
            .chain(rollback)
            .all(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed { metrics: RunMetrics },
    Diverged { epoch: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub v: u32,
    pub config: RunConfig,
    pub outcome: RunOutcome,
    pub effective_noise: f64,
    pub wall_time_s: f64,
    pub toolkit_version: String,
}

impl RunRecord {
    pub fn key(&self) -> RunKey {
        self.config.key()
    }

    pub fn metrics(&self) -> Option<&RunMetrics> {
        match &self.outcome {
            RunOutcome::Completed { metrics } => Some(metrics),
            RunOutcome::Diverged { .. } => None,
        }
    }

    /// The record with its wall time zeroed, for reproducibility comparisons.
    pub fn without_wall_time(&self) -> RunRecord {
        RunRecord {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_line(line: &str) -> Result<RunRecord> {
        let rec: RunRecord = serde_json::from_str(line)?;
        if rec.v != RECORD_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "run record",
                expected: RECORD_VERSION,
                found: rec.v,
            });
        }
        Ok(rec)
    }
}

pub fn sort_canonical(records: &mut [RunRecord]) {
    records.sort_by(|a, b| a.key().cmp_canonical(&b.key()));
}

pub fn write_records(records: &[RunRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        let line = r.to_json_line()?;
        writeln!(out, "{line}").map_err(|e| Error::io("<records>", e))?;
    }
    Ok(())
}

pub fn save_records(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    // write-then-rename so readers never see a half-written file
    let tmp = path.with_extension("jsonl.tmp");
    std::fs::write(&tmp, buf).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Reads every record; blank lines are skipped.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (no, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            RunRecord::from_json_line(&line).map_err(|e| Error::Malformed {
                what: "records file",
                reason: format!("{}:{}: {e}", path.display(), no + 1),
            })?,
        );
    }
    Ok(out)
}
