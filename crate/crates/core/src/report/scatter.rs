use serde::{Deserialize, Serialize};

use super::heatmap::Trace;
use crate::diagnostics::{MetricKind, Regime};
use crate::error::{Error, Result};
use crate::experiment::RunRecord;

/// One model's layer utilization against a scalar metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub noise_ratio: f64,
    pub width: usize,
    pub seed: u64,
    pub layer: usize,
    pub x: f64,
    pub y: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    pub x_metric: MetricKind,
    pub depth: usize,
    pub points: Vec<ScatterPoint>,
}

impl Scatter {
    pub fn select(&self, layer: usize, regime: Regime) -> impl Iterator<Item = &ScatterPoint> {
        self.points
            .iter()
            .filter(move |p| p.layer == layer && p.regime == regime)
    }

    /// `(xs, ys)` for one layer and regime.
    pub fn series(&self, layer: usize, regime: Regime) -> (Vec<f64>, Vec<f64>) {
        self.select(layer, regime).map(|p| (p.x, p.y)).unzip()
    }
}

/// Per completed record and layer, `(x_metric, utilization)` tagged by which
/// side of the trace the record's width lies on at its noise ratio.
pub fn build_scatter(
    records: &[RunRecord],
    x_metric: MetricKind,
    trace: &Trace,
) -> Result<Scatter> {
    let mut points = Vec::new();
    let mut depth = 0;
    for r in records {
        let key = r.key();
        let Some(m) = r.metrics() else { continue };
        let ri = trace
            .noise_ratios
            .iter()
            .position(|x| x.total_cmp(&key.noise_ratio).is_eq());
        let wi = trace.widths.iter().position(|&w| w == key.width);
        let (Some(ri), Some(wi)) = (ri, wi) else {
            return Err(Error::Domain(format!(
                "record width {} ratio {} is off the threshold grid",
                key.width, key.noise_ratio
            )));
        };
        let regime = Regime::classify(wi, trace.columns[ri]);
        let x = m
            .scalar(x_metric)
            .ok_or_else(|| Error::Domain(format!("records lack {x_metric}")))?;
        depth = depth.max(m.utilization.len());
        for (l, &y) in m.utilization.iter().enumerate() {
            points.push(ScatterPoint {
                noise_ratio: key.noise_ratio,
                width: key.width,
                seed: key.seed,
                layer: l + 1,
                x,
                y,
                regime,
            });
        }
    }
    points.sort_by(|a, b| {
        a.layer
            .cmp(&b.layer)
            .then(a.noise_ratio.total_cmp(&b.noise_ratio))
            .then(a.width.cmp(&b.width))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(Scatter {
        x_metric,
        depth,
        points,
    })
}
