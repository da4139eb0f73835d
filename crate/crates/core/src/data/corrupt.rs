//! Label shuffling with exact bookkeeping of what was changed.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Which samples had their labels shuffled and what they received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub noise_ratio: f64,
    pub seed: u64,
    /// Strictly increasing.
    pub corrupted_indices: Vec<usize>,
    /// Label now carried by each index in `corrupted_indices`.
    pub applied_labels: Vec<usize>,
    /// Fraction of the whole dataset whose label actually changed.
    pub effective_noise: f64,
}

/// `round(noise_ratio * n)` with halves rounded up.
pub fn corruption_count(noise_ratio: f64, n: usize) -> usize {
    (noise_ratio * n as f64 + 0.5).floor() as usize
}

/// Picks `round(noise_ratio * n)` samples uniformly without replacement and
/// permutes their labels among themselves. A label may land back on itself,
/// so the effective noise can fall below the nominal ratio. The overall label
/// multiset is unchanged.
pub fn corrupt_labels(
    dataset: &LabeledDataset,
    noise_ratio: f64,
    seed: u64,
) -> Result<(LabeledDataset, CorruptionPlan)> {
    if !(0.0..=1.0).contains(&noise_ratio) {
        return Err(Error::Domain(format!(
            "noise_ratio must be in [0, 1], got {noise_ratio}"
        )));
    }
    if dataset.is_corrupted() {
        return Err(Error::AlreadyCorrupted);
    }
    let n = dataset.len();
    let m = corruption_count(noise_ratio, n).min(n);
    let mut rng = seed::rng(seed::mix(&[seed, n as u64]));

    let mut chosen = index::sample(&mut rng, n, m).into_vec();
    chosen.sort_unstable();
    let mut shuffled: Vec<usize> = chosen.iter().map(|&i| dataset.labels[i]).collect();
    shuffled.shuffle(&mut rng);

    let mut out = dataset.clone();
    for (&i, &y) in chosen.iter().zip(&shuffled) {
        out.labels[i] = y;
        out.corrupted_mask[i] = true;
    }
    let changed = chosen
        .iter()
        .filter(|&&i| out.labels[i] != out.recovered_labels[i])
        .count();
    let plan = CorruptionPlan {
        noise_ratio,
        seed,
        corrupted_indices: chosen,
        applied_labels: shuffled,
        effective_noise: if n == 0 {
            0.0
        } else {
            changed as f64 / n as f64
        },
    };
    Ok((out, plan))
}

/// Replays a plan onto an uncorrupted dataset.
pub fn apply_plan(dataset: &LabeledDataset, plan: &CorruptionPlan) -> Result<LabeledDataset> {
    if dataset.is_corrupted() {
        return Err(Error::AlreadyCorrupted);
    }
    if plan.corrupted_indices.len() != plan.applied_labels.len() {
        return Err(Error::Shape(
            "plan indices and labels differ in length".into(),
        ));
    }
    let mut out = dataset.clone();
    for (&i, &y) in plan.corrupted_indices.iter().zip(&plan.applied_labels) {
        if i >= out.len() || y >= out.class_count {
            return Err(Error::Domain(format!("plan entry ({i}, {y}) out of range")));
        }
        out.labels[i] = y;
        out.corrupted_mask[i] = true;
    }
    Ok(out)
}
