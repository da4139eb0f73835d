//! Per-cell statistics over seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::{RunMetrics, RunRecord};
use crate::diagnostics::{empirical_emc, MetricKind};
use crate::error::{Error, Result};

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len();
        if n == 0 {
            return Stats {
                mean: f64::NAN,
                stddev: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        Stats {
            mean,
            stddev: var.sqrt(),
            n,
        }
    }
}

/// One `(noise_ratio, width)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub noise_ratio: f64,
    pub width: usize,
    pub seeds: Vec<u64>,
    pub scalars: BTreeMap<MetricKind, Stats>,
    pub utilization: Vec<Stats>,
    pub contribution: BTreeMap<MetricKind, Vec<Stats>>,
    pub effective_noise: Stats,
}

impl CellSummary {
    pub fn scalar(&self, metric: MetricKind) -> Option<f64> {
        self.scalars.get(&metric).map(|s| s.mean)
    }
}

/// Cells for a complete grid, rows by ascending noise ratio and columns by ascending width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub noise_ratios: Vec<f64>,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub depth: usize,
    cells: Vec<CellSummary>,
}

impl Aggregate {
    pub fn cell(&self, ratio_index: usize, width_index: usize) -> &CellSummary {
        &self.cells[ratio_index * self.widths.len() + width_index]
    }

    pub fn cells(&self) -> &[CellSummary] {
        &self.cells
    }

    /// `rows[ratio][width]` of any per-cell quantity.
    pub fn grid(
        &self,
        mut value: impl FnMut(&CellSummary) -> Option<f64>,
    ) -> Result<Vec<Vec<f64>>> {
        (0..self.noise_ratios.len())
            .map(|r| {
                (0..self.widths.len())
                    .map(|w| {
                        let c = self.cell(r, w);
                        value(c).ok_or_else(|| {
                            Error::Domain(format!(
                                "value missing for width {} ratio {}",
                                c.width, c.noise_ratio
                            ))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    pub fn ratio_index(&self, ratio: f64) -> Option<usize> {
        self.noise_ratios
            .iter()
            .position(|r| r.total_cmp(&ratio).is_eq())
    }

    pub fn width_index(&self, width: usize) -> Option<usize> {
        self.widths.iter().position(|&w| w == width)
    }

    /// Empirical EMC per width from the mean final training loss.
    pub fn emc(&self, epsilon: f64) -> Result<Vec<(usize, Option<f64>)>> {
        (0..self.widths.len())
            .map(|w| {
                let points: Vec<(f64, f64)> = (0..self.noise_ratios.len())
                    .map(|r| {
                        let c = self.cell(r, w);
                        (
                            c.noise_ratio,
                            c.scalar(MetricKind::TrainLoss).unwrap_or(f64::NAN),
                        )
                    })
                    .collect();
                Ok((self.widths[w], empirical_emc(&points, epsilon)?))
            })
            .collect()
    }
}

fn sorted_unique<T: Copy>(mut v: Vec<T>, cmp: impl Fn(&T, &T) -> std::cmp::Ordering) -> Vec<T> {
    v.sort_by(&cmp);
    v.dedup_by(|a, b| cmp(a, b).is_eq());
    v
}

/// Groups completed records by cell. Every `(width, ratio, seed)` combination
/// of the axes seen in `records` must be present and completed; otherwise the
/// error lists the missing (or failed) triples.
pub fn aggregate(records: &[RunRecord]) -> Result<Aggregate> {
    if records.is_empty() {
        return Err(Error::Domain("no records to aggregate".into()));
    }
    let widths = sorted_unique(records.iter().map(|r| r.key().width).collect(), |a, b| {
        a.cmp(b)
    });
    let ratios = sorted_unique(
        records.iter().map(|r| r.key().noise_ratio).collect(),
        |a, b| a.total_cmp(b),
    );
    let seeds = sorted_unique(records.iter().map(|r| r.key().seed).collect(), |a, b| {
        a.cmp(b)
    });
    let depth = records[0].config.arch.depth;
    if records.iter().any(|r| r.config.arch.depth != depth) {
        return Err(Error::Malformed {
            what: "records",
            reason: "records mix different depths".into(),
        });
    }

    let mut by_key: BTreeMap<(usize, usize, u64), &RunMetrics> = BTreeMap::new();
    for r in records {
        let k = r.key();
        let ri = ratios
            .iter()
            .position(|x| x.total_cmp(&k.noise_ratio).is_eq())
            .unwrap();
        let Some(m) = r.metrics() else { continue };
        if by_key.insert((ri, k.width, k.seed), m).is_some() {
            return Err(Error::Malformed {
                what: "records",
                reason: format!(
                    "duplicate record for width {} ratio {} seed {}",
                    k.width, k.noise_ratio, k.seed
                ),
            });
        }
    }

    let mut missing = Vec::new();
    for (ri, &ratio) in ratios.iter().enumerate() {
        for &w in &widths {
            for &s in &seeds {
                if !by_key.contains_key(&(ri, w, s)) {
                    missing.push((w, ratio, s));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid { missing });
    }

    let effective: BTreeMap<(usize, usize, u64), f64> = records
        .iter()
        .map(|r| {
            let k = r.key();
            let ri = ratios
                .iter()
                .position(|x| x.total_cmp(&k.noise_ratio).is_eq())
                .unwrap();
            ((ri, k.width, k.seed), r.effective_noise)
        })
        .collect();

    let mut cells = Vec::with_capacity(ratios.len() * widths.len());
    for (ri, &ratio) in ratios.iter().enumerate() {
        for &w in &widths {
            let runs: Vec<&RunMetrics> = seeds.iter().map(|&s| by_key[&(ri, w, s)]).collect();
            let mut scalars = BTreeMap::new();
            for m in MetricKind::ALL {
                let vals: Option<Vec<f64>> = runs.iter().map(|r| r.scalar(m)).collect();
                if let Some(v) = vals {
                    scalars.insert(m, Stats::of(&v));
                }
            }
            let per_layer = |get: &dyn Fn(&RunMetrics) -> Option<f64>| -> Option<Stats> {
                let v: Option<Vec<f64>> = runs.iter().map(|r| get(r)).collect();
                v.map(|v| Stats::of(&v))
            };
            let utilization = (0..depth)
                .map(|l| per_layer(&|r| r.utilization.get(l).copied()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Malformed {
                    what: "records",
                    reason: format!("utilization length differs from depth {depth}"),
                })?;
            let mut contribution = BTreeMap::new();
            for m in MetricKind::ALL {
                let layers: Option<Vec<Stats>> = (0..depth)
                    .map(|l| per_layer(&|r| r.contribution.get(&m).and_then(|v| v.get(l).copied())))
                    .collect();
                if let Some(layers) = layers {
                    contribution.insert(m, layers);
                }
            }
            let eff: Vec<f64> = seeds.iter().map(|&s| effective[&(ri, w, s)]).collect();
            cells.push(CellSummary {
                noise_ratio: ratio,
                width: w,
                seeds: seeds.clone(),
                scalars,
                utilization,
                contribution,
                effective_noise: Stats::of(&eff),
            });
        }
    }
    Ok(Aggregate {
        noise_ratios: ratios,
        widths,
        seeds,
        depth,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{DatasetSpec, RunConfig, RunOutcome, RECORD_VERSION};
    use crate::nn::{ArchSpec, TrainConfig};

    fn record(width: usize, ratio: f64, seed: u64, loss: f64) -> RunRecord {
        let metrics = RunMetrics {
            final_epoch_loss: loss,
            train_loss: loss,
            train_accuracy: 1.0,
            test_loss: None,
            test_accuracy: None,
            generalization_gap: None,
            resilience: loss,
            utilization: vec![loss, 2.0 * loss],
            contribution: [(MetricKind::TrainLoss, vec![0.0, loss])]
                .into_iter()
                .collect(),
            rollback: None,
        };
        RunRecord {
            v: RECORD_VERSION,
            config: RunConfig {
                arch: ArchSpec::new(2, width, 2, 2).unwrap(),
                train: TrainConfig::default(),
                noise_ratio: ratio,
                corruption_seed: 0,
                holdout_fraction: 0.0,
                master_seed: 0,
                seed_index: seed,
                dataset: DatasetSpec::Cache {
                    train: "x".into(),
                    test: None,
                },
            },
            outcome: RunOutcome::Completed { metrics },
            effective_noise: ratio,
            wall_time_s: 0.0,
            toolkit_version: String::new(),
        }
    }

    #[test]
    fn single_seed_has_zero_spread() {
        let a = aggregate(&[record(4, 0.0, 0, 0.7)]).unwrap();
        let s = a.cell(0, 0).scalars[&MetricKind::TrainLoss];
        assert_eq!((s.mean, s.stddev, s.n), (0.7, 0.0, 1));
        assert!(!a.cell(0, 0).scalars.contains_key(&MetricKind::TestLoss));
    }

    #[test]
    fn two_seeds_average() {
        let a = aggregate(&[record(4, 0.0, 0, 0.1), record(4, 0.0, 1, 0.3)]).unwrap();
        let c = a.cell(0, 0);
        assert!((c.scalar(MetricKind::TrainLoss).unwrap() - 0.2).abs() < 1e-15);
        assert!((c.utilization[1].mean - 0.4).abs() < 1e-15);
        assert!((c.scalars[&MetricKind::TrainLoss].stddev - 0.1).abs() < 1e-15);
    }

    #[test]
    fn missing_seed_is_named() {
        let recs = [
            record(4, 0.0, 0, 0.1),
            record(4, 0.0, 1, 0.1),
            record(8, 0.0, 0, 0.1),
        ];
        match aggregate(&recs) {
            Err(Error::IncompleteGrid { missing }) => assert_eq!(missing, vec![(8, 0.0, 1)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failed_run_counts_as_missing() {
        let mut bad = record(4, 0.2, 0, 0.1);
        bad.outcome = RunOutcome::Diverged {
            epoch: 3,
            reason: "x".into(),
        };
        let recs = [record(4, 0.0, 0, 0.1), bad];
        assert!(
            matches!(aggregate(&recs), Err(Error::IncompleteGrid { missing }) if missing == vec![(4, 0.2, 0)])
        );
    }

    #[test]
    fn grid_rows_are_ratios() {
        let recs = [
            record(8, 0.5, 0, 4.0),
            record(4, 0.0, 0, 1.0),
            record(8, 0.0, 0, 2.0),
            record(4, 0.5, 0, 3.0),
        ];
        let a = aggregate(&recs).unwrap();
        let g = a.grid(|c| c.scalar(MetricKind::TrainLoss)).unwrap();
        assert_eq!(g, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(a.emc(2.5).unwrap(), vec![(4, Some(0.0)), (8, Some(0.0))]);
    }
}
