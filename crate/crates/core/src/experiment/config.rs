use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{load_cifar10, load_dataset, load_mnist, synth_blobs, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{ArchSpec, TrainConfig};
use crate::seed;

/// Where a run's data comes from. Part of every config echo, so a record can
/// be reproduced from its config alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synth {
        n_train: usize,
        n_test: usize,
        d: usize,
        k: usize,
        separation: f64,
        seed: u64,
    },
    /// Dataset cache files written by `prepare`.
    Cache {
        train: PathBuf,
        test: Option<PathBuf>,
    },
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
        /// Keep only the first `subset` training samples.
        subset: Option<usize>,
    },
    Cifar10 {
        train_batches: Vec<PathBuf>,
        test_batches: Vec<PathBuf>,
        subset: Option<usize>,
    },
}

/// Clean training data and an optional clean test set.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: LabeledDataset,
    pub test: Option<LabeledDataset>,
}

impl DataSplit {
    pub fn new(train: LabeledDataset, test: Option<LabeledDataset>) -> Result<Self> {
        if let Some(t) = &test {
            train.check_compatible(t)?;
        }
        Ok(DataSplit { train, test })
    }
}

/// Seed offset separating the synthetic test draw from the training draw.
const SYNTH_TEST_STREAM: u64 = 0x7465_7374;

impl DatasetSpec {
    pub fn synth_test_seed(seed: u64) -> u64 {
        seed::mix(&[seed, SYNTH_TEST_STREAM])
    }

    pub fn load(&self) -> Result<DataSplit> {
        match self {
            DatasetSpec::Synth {
                n_train,
                n_test,
                d,
                k,
                separation,
                seed,
            } => {
                let train = synth_blobs(*n_train, *d, *k, *separation, *seed)?;
                let test = if *n_test > 0 {
                    Some(synth_blobs(
                        *n_test,
                        *d,
                        *k,
                        *separation,
                        Self::synth_test_seed(*seed),
                    )?)
                } else {
                    None
                };
                DataSplit::new(train, test)
            }
            DatasetSpec::Cache { train, test } => {
                let (train, _) = load_dataset(train)?;
                let test = test
                    .as_ref()
                    .map(|p| load_dataset(p).map(|(d, _)| d))
                    .transpose()?;
                DataSplit::new(train, test)
            }
            DatasetSpec::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
                subset,
            } => {
                let mut train = load_mnist(train_images, train_labels)?;
                if let Some(n) = subset {
                    train = train.head(*n)?;
                }
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => Some(load_mnist(i, l)?),
                    (None, None) => None,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "MNIST test images and labels must be given together".into(),
                        ))
                    }
                };
                DataSplit::new(train, test)
            }
            DatasetSpec::Cifar10 {
                train_batches,
                test_batches,
                subset,
            } => {
                let mut train = load_cifar10(train_batches)?;
                if let Some(n) = subset {
                    train = train.head(*n)?;
                }
                let test = if test_batches.is_empty() {
                    None
                } else {
                    Some(load_cifar10(test_batches)?)
                };
                DataSplit::new(train, test)
            }
        }
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub arch: ArchSpec,
    pub train: TrainConfig,
    pub noise_ratio: f64,
    pub corruption_seed: u64,
    /// Fraction of the clean training set held out (never trained on) for rollback selection.
    pub holdout_fraction: f64,
    pub master_seed: u64,
    pub seed_index: u64,
    pub dataset: DatasetSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            return Err(Error::InvalidConfig(format!(
                "noise_ratio must be in [0, 1], got {}",
                self.noise_ratio
            )));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::InvalidConfig(format!(
                "holdout_fraction must be in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.arch.hidden_width
    }

    pub fn key(&self) -> RunKey {
        RunKey {
            width: self.arch.hidden_width,
            noise_ratio: self.noise_ratio,
            seed: self.seed_index,
        }
    }
}

/// A grid coordinate: `(width, noise_ratio, seed index)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub width: usize,
    pub noise_ratio: f64,
    pub seed: u64,
}

impl RunKey {
    /// Canonical order: noise ratio, then width, then seed.
    pub fn cmp_canonical(&self, other: &RunKey) -> std::cmp::Ordering {
        self.noise_ratio
            .total_cmp(&other.noise_ratio)
            .then(self.width.cmp(&other.width))
            .then(self.seed.cmp(&other.seed))
    }

    pub fn same(&self, other: &RunKey) -> bool {
        self.cmp_canonical(other).is_eq()
    }

    pub fn as_tuple(&self) -> (usize, f64, u64) {
        (self.width, self.noise_ratio, self.seed)
    }
}

/// Per-run seeds derived from the grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedSeeds {
    pub init: u64,
    pub shuffle: u64,
    pub corruption: u64,
}

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const CORRUPTION_STREAM: u64 = 3;

/// Init and shuffle seeds depend on every coordinate. The corruption seed
/// skips the width, so all widths at a given `(ratio, seed)` see the same
/// noisy labels. Adding grid points never changes existing runs.
pub fn derive_seeds(
    master_seed: u64,
    width: usize,
    noise_ratio: f64,
    seed_index: u64,
) -> DerivedSeeds {
    let r = noise_ratio.to_bits();
    DerivedSeeds {
        init: seed::mix(&[master_seed, INIT_STREAM, width as u64, r, seed_index]),
        shuffle: seed::mix(&[master_seed, SHUFFLE_STREAM, width as u64, r, seed_index]),
        corruption: seed::mix(&[master_seed, CORRUPTION_STREAM, r, seed_index]),
    }
}

/// Training settings shared by every run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTemplate {
    pub depth: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub holdout_fraction: f64,
    pub master_seed: u64,
    pub dataset: DatasetSpec,
}

impl RunTemplate {
    pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.1;
}

/// Widths x noise ratios x seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub widths: Vec<usize>,
    pub noise_ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub template: RunTemplate,
}

impl SweepGrid {
    pub const DEFAULT_WIDTHS: [usize; 6] = [8, 16, 32, 64, 128, 256];
    pub const DEFAULT_RATIOS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    pub const DEFAULT_SEEDS: usize = 3;

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.noise_ratios.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig("sweep axes must be nonempty".into()));
        }
        if self.widths.windows(2).any(|w| w[0] >= w[1]) || self.widths[0] == 0 {
            return Err(Error::InvalidConfig(
                "widths must be positive and strictly ascending".into(),
            ));
        }
        if self.noise_ratios.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "noise ratios must be strictly ascending".into(),
            ));
        }
        if self.noise_ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidConfig(
                "noise ratios must lie in [0, 1]".into(),
            ));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seed indices must be unique".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.widths.len() * self.noise_ratios.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Configs for every grid point, in canonical order.
    pub fn configs(&self, input_dim: usize, classes: usize) -> Result<Vec<RunConfig>> {
        self.validate()?;
        let t = &self.template;
        let mut out = Vec::with_capacity(self.len());
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        for &ratio in &self.noise_ratios {
            for &width in &self.widths {
                for &s in &seeds {
                    let derived = derive_seeds(t.master_seed, width, ratio, s);
                    let cfg = RunConfig {
                        arch: ArchSpec::new(input_dim, width, classes, t.depth)?,
                        train: TrainConfig {
                            learning_rate: t.learning_rate,
                            epochs: t.epochs,
                            batch_size: t.batch_size,
                            init_seed: derived.init,
                            shuffle_seed: derived.shuffle,
                        },
                        noise_ratio: ratio,
                        corruption_seed: derived.corruption,
                        holdout_fraction: t.holdout_fraction,
                        master_seed: t.master_seed,
                        seed_index: s,
                        dataset: t.dataset.clone(),
                    };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}
