//! Post-training regularization: restore a trailing suffix of layers to
//! their initial values.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{average_loss, InitSnapshot, ModelState};

/// Copy of `model` with its last `k` layers (weights and biases) reset to the snapshot.
pub fn rollback_last_k(
    model: &ModelState,
    snapshot: &InitSnapshot,
    k: usize,
) -> Result<ModelState> {
    snapshot.check_compatible(model)?;
    let depth = model.depth();
    if k > depth {
        return Err(Error::RollbackOutOfRange { k, depth });
    }
    let mut out = model.clone();
    for l in depth - k + 1..=depth {
        out.set_layer(l, snapshot.layer(l)?.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollbackSelection {
    /// Smallest `k` attaining the minimum holdout loss.
    pub k: usize,
    /// Holdout loss for `k = 0..=depth`.
    pub holdout_losses: Vec<f64>,
}

impl RollbackSelection {
    pub fn from_losses(holdout_losses: Vec<f64>) -> Result<Self> {
        if holdout_losses.is_empty() {
            return Err(Error::Domain("empty rollback curve".into()));
        }
        if holdout_losses.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "rollback curve contains non-finite losses".into(),
            ));
        }
        let k =
            crate::diagnostics::row_argmax(&holdout_losses.iter().map(|v| -v).collect::<Vec<_>>())?;
        Ok(RollbackSelection { k, holdout_losses })
    }

    pub fn best_loss(&self) -> f64 {
        self.holdout_losses[self.k]
    }
}

/// Evaluates every rollback depth on `holdout` and keeps the best one.
pub fn select_rollback(
    model: &ModelState,
    snapshot: &InitSnapshot,
    holdout: &LabeledDataset,
) -> Result<RollbackSelection> {
    if holdout.is_empty() {
        return Err(Error::Domain("holdout set is empty".into()));
    }
    let losses = (0..=model.depth())
        .map(|k| {
            let rolled = rollback_last_k(model, snapshot, k)?;
            Ok(average_loss(&rolled, holdout.features(), holdout.labels())?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    RollbackSelection::from_losses(losses)
}
