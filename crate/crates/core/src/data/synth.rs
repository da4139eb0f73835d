//! Seeded Gaussian blobs for fast experiments.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Standard deviations of headroom kept on each side before clamping to `[0, 1]`.
const MARGIN: f64 = 4.0;

/// `k` unit-variance Gaussian clusters in `d` dimensions.
///
/// Class `c` is centred at `(separation / sqrt 2) * e_c`, so every pair of
/// means is exactly `separation` apart. Raw coordinates are mapped into
/// `[0, 1]` by a fixed affine transform (independent of the sample) and then
/// clamped, so datasets drawn with different seeds share one feature space.
/// Sample `i` belongs to class `i % k`.
pub fn synth_blobs(
    n: usize,
    d: usize,
    k: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if k == 0 || d == 0 {
        return Err(Error::Domain("d and k must be positive".into()));
    }
    if n < k {
        return Err(Error::Domain(format!(
            "need at least one sample per class: n={n} < k={k}"
        )));
    }
    if k > d {
        return Err(Error::Domain(format!(
            "k={k} classes need d >= k dimensions, got d={d}"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::Domain(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }

    let offset = separation / std::f64::consts::SQRT_2;
    let span = offset + 2.0 * MARGIN;
    let mut rng = seed::rng(seed::mix(&[seed, n as u64, d as u64, k as u64]));
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let class = i % k;
        for (j, v) in row.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            let raw = if j == class { offset } else { 0.0 } + noise;
            *v = ((raw + MARGIN) / span).clamp(0.0, 1.0);
        }
        labels.push(class);
    }
    LabeledDataset::new(
        format!("blobs-n{n}-d{d}-k{k}-s{separation}-seed{seed}"),
        features,
        labels,
        k,
    )
}
