//! Heatmaps, regime-split scatters and their CSV/SVG renderings.

mod heatmap;
mod scatter;
mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use heatmap::{build_heatmap, Column, HeatmapGrid, Layout, Quantity, Scale, Trace};
pub use scatter::{build_scatter, Scatter, ScatterPoint};
pub use svg::{ramp, render_svg};

use crate::diagnostics::MetricKind;
use crate::error::{Error, Result};
use crate::experiment::{aggregate, Aggregate, RunRecord};

pub const HEATMAP_CSV_HEADER: [&str; 5] = ["noise_ratio", "width", "layer", "metric", "value"];
pub const SCATTER_CSV_HEADER: [&str; 8] = [
    "noise_ratio",
    "width",
    "seed",
    "layer",
    "x_metric",
    "x",
    "utilization",
    "regime",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Panel {
    Heatmap(HeatmapGrid),
    Scatter(Scatter),
}

/// Titled panels, stacked top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub name: String,
    pub panels: Vec<(String, Panel)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    /// Per-layer contribution to training loss, one block per width, symlog.
    Fig1,
    /// Per-layer utilization, one block per layer.
    Fig2,
    /// Generalization gap (row maxima trace the interpolation threshold) and resilience.
    Fig3,
    /// Utilization against gap and resilience, split by regime.
    Fig4,
    /// Per-layer contribution to test loss and to resilience.
    Fig5,
}

impl FigureKind {
    pub const ALL: [FigureKind; 5] = [
        FigureKind::Fig1,
        FigureKind::Fig2,
        FigureKind::Fig3,
        FigureKind::Fig4,
        FigureKind::Fig5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::Fig1 => "fig1",
            FigureKind::Fig2 => "fig2",
            FigureKind::Fig3 => "fig3",
            FigureKind::Fig4 => "fig4",
            FigureKind::Fig5 => "fig5",
        }
    }
}

impl std::fmt::Display for FigureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown figure {s:?} (expected fig1..fig5)")))
    }
}

fn heat(
    agg: &Aggregate,
    title: &str,
    q: Quantity,
    layout: Layout,
    scale: Scale,
) -> Result<(String, Panel)> {
    Ok((
        title.to_string(),
        Panel::Heatmap(build_heatmap(agg, q, layout, scale)?),
    ))
}

/// Builds one figure from a complete record set.
pub fn build_figure(kind: FigureKind, records: &[RunRecord]) -> Result<Figure> {
    let agg = aggregate(records)?;
    build_figure_from(kind, &agg, records)
}

/// Like [`build_figure`] with the aggregate already computed.
pub fn build_figure_from(
    kind: FigureKind,
    agg: &Aggregate,
    records: &[RunRecord],
) -> Result<Figure> {
    use MetricKind::*;
    let panels = match kind {
        FigureKind::Fig1 => vec![heat(
            agg,
            "contribution to training loss",
            Quantity::Contribution(TrainLoss),
            Layout::BlockPerWidth,
            Scale::symlog(),
        )?],
        FigureKind::Fig2 => vec![heat(
            agg,
            "layer utilization",
            Quantity::Utilization,
            Layout::BlockPerLayer,
            Scale::Linear,
        )?],
        FigureKind::Fig3 => vec![
            heat(
                agg,
                "generalization gap",
                Quantity::Scalar(GeneralizationGap),
                Layout::Flat,
                Scale::Linear,
            )?,
            heat(
                agg,
                "resilience loss",
                Quantity::Scalar(Resilience),
                Layout::Flat,
                Scale::Linear,
            )?,
        ],
        FigureKind::Fig4 => {
            let trace = Trace::from_aggregate(agg)?;
            vec![
                (
                    "utilization vs generalization gap".to_string(),
                    Panel::Scatter(build_scatter(records, GeneralizationGap, &trace)?),
                ),
                (
                    "utilization vs resilience loss".to_string(),
                    Panel::Scatter(build_scatter(records, Resilience, &trace)?),
                ),
            ]
        }
        FigureKind::Fig5 => vec![
            heat(
                agg,
                "contribution to test loss",
                Quantity::Contribution(TestLoss),
                Layout::BlockPerWidth,
                Scale::symlog(),
            )?,
            heat(
                agg,
                "contribution to resilience loss",
                Quantity::Contribution(Resilience),
                Layout::BlockPerWidth,
                Scale::symlog(),
            )?,
        ],
    };
    Ok(Figure {
        name: kind.name().to_string(),
        panels,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Malformed {
        what: "csv",
        reason: e.to_string(),
    }
}

/// CSV of the raw values behind a figure. Heatmap figures use
/// `noise_ratio,width,layer,metric,value`; scatter figures list points.
pub fn figure_csv(figure: &Figure) -> Result<String> {
    let scatter = figure
        .panels
        .iter()
        .any(|(_, p)| matches!(p, Panel::Scatter(_)));
    let heatmap = figure
        .panels
        .iter()
        .any(|(_, p)| matches!(p, Panel::Heatmap(_)));
    if scatter && heatmap {
        return Err(Error::InvalidConfig(
            "figure mixes heatmap and scatter panels".into(),
        ));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if scatter {
        w.write_record(SCATTER_CSV_HEADER).map_err(csv_err)?;
    } else {
        w.write_record(HEATMAP_CSV_HEADER).map_err(csv_err)?;
    }
    for (_, panel) in &figure.panels {
        match panel {
            Panel::Heatmap(g) => {
                let metric = g.quantity.label();
                for (r, row) in g.values.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        let col = g.columns[c];
                        let layer = col.layer.map(|l| l.to_string()).unwrap_or_default();
                        w.write_record([
                            g.noise_ratios[r].to_string(),
                            col.width.to_string(),
                            layer,
                            metric.clone(),
                            v.to_string(),
                        ])
                        .map_err(csv_err)?;
                    }
                }
            }
            Panel::Scatter(s) => {
                for p in &s.points {
                    w.write_record([
                        p.noise_ratio.to_string(),
                        p.width.to_string(),
                        p.seed.to_string(),
                        p.layer.to_string(),
                        s.x_metric.name().to_string(),
                        p.x.to_string(),
                        p.y.to_string(),
                        p.regime.name().to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed {
        what: "csv",
        reason: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

/// Writes `<name>.csv` and `<name>.svg` into `dir`.
pub fn write_figure(figure: &Figure, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{}.csv", figure.name));
    let svg_path = dir.join(format!("{}.svg", figure.name));
    std::fs::write(&csv_path, figure_csv(figure)?).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&svg_path, render_svg(figure)).map_err(|e| Error::io(&svg_path, e))?;
    Ok((csv_path, svg_path))
}
