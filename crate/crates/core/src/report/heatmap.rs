use serde::{Deserialize, Serialize};

use crate::diagnostics::{row_argmax, threshold_trace, MetricKind};
use crate::error::{Error, Result};
use crate::experiment::Aggregate;

/// Display transform. Cells always keep their raw values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scale {
    Linear,
    /// `sign(v) * log10(1 + |v| / threshold)`; linear near zero, logarithmic beyond.
    Symlog {
        threshold: f64,
    },
}

impl Scale {
    pub const SYMLOG_THRESHOLD: f64 = 1e-4;

    pub fn symlog() -> Scale {
        Scale::Symlog {
            threshold: Self::SYMLOG_THRESHOLD,
        }
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Symlog { threshold } => {
                v.signum() * (v.abs() / threshold).ln_1p() / std::f64::consts::LN_10
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Linear => "linear",
            Scale::Symlog { .. } => "symlog",
        }
    }
}

/// What a heatmap shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "metric", rename_all = "snake_case")]
pub enum Quantity {
    Scalar(MetricKind),
    Utilization,
    Contribution(MetricKind),
}

impl Quantity {
    pub fn is_per_layer(self) -> bool {
        !matches!(self, Quantity::Scalar(_))
    }

    /// Name used in CSV and figure labels.
    pub fn label(self) -> String {
        match self {
            Quantity::Scalar(m) => m.name().to_string(),
            Quantity::Utilization => "utilization".into(),
            Quantity::Contribution(m) => format!("contribution:{}", m.name()),
        }
    }
}

/// Column arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One column per width; scalar quantities only.
    Flat,
    /// One block per layer, widths ascending inside each block.
    BlockPerLayer,
    /// One block per width, layers ascending inside each block.
    BlockPerWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub width: usize,
    /// 1-based; `None` for scalar quantities.
    pub layer: Option<usize>,
    pub block: usize,
}

/// Rows are noise ratios (ascending, top to bottom).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub quantity: Quantity,
    pub layout: Layout,
    pub scale: Scale,
    pub noise_ratios: Vec<f64>,
    pub columns: Vec<Column>,
    /// `values[row][column]`, raw aggregated means.
    pub values: Vec<Vec<f64>>,
    /// Per row, the column of the maximum inside each block.
    pub markers: Vec<Vec<usize>>,
}

impl HeatmapGrid {
    pub fn block_count(&self) -> usize {
        self.columns.last().map_or(0, |c| c.block + 1)
    }

    /// Column range of block `b`.
    pub fn block(&self, b: usize) -> std::ops::Range<usize> {
        let start = self.columns.iter().position(|c| c.block == b).unwrap_or(0);
        let end = self
            .columns
            .iter()
            .rposition(|c| c.block == b)
            .map_or(start, |e| e + 1);
        start..end
    }

    /// Build from raw rows, computing block-wise row maxima.
    pub fn new(
        quantity: Quantity,
        layout: Layout,
        scale: Scale,
        noise_ratios: Vec<f64>,
        columns: Vec<Column>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != noise_ratios.len() || values.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::Shape("heatmap values are not rectangular".into()));
        }
        if columns.is_empty() || noise_ratios.is_empty() {
            return Err(Error::Shape(
                "heatmap needs at least one row and column".into(),
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("heatmap cells must be finite".into()));
        }
        if columns
            .windows(2)
            .any(|w| w[1].block < w[0].block || w[1].block > w[0].block + 1)
            || columns[0].block != 0
        {
            return Err(Error::Shape(
                "heatmap blocks must be contiguous and numbered from 0".into(),
            ));
        }
        let mut grid = HeatmapGrid {
            quantity,
            layout,
            scale,
            noise_ratios,
            columns,
            values,
            markers: Vec::new(),
        };
        let blocks: Vec<_> = (0..grid.block_count()).map(|b| grid.block(b)).collect();
        grid.markers = grid
            .values
            .iter()
            .map(|row| {
                blocks
                    .iter()
                    .map(|r| row_argmax(&row[r.clone()]).map(|i| r.start + i))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(grid)
    }
}

/// Arranges aggregated cell means into a heatmap.
pub fn build_heatmap(
    agg: &Aggregate,
    quantity: Quantity,
    layout: Layout,
    scale: Scale,
) -> Result<HeatmapGrid> {
    if quantity.is_per_layer() == (layout == Layout::Flat) {
        return Err(Error::InvalidConfig(format!(
            "{} cannot use the {layout:?} layout",
            quantity.label()
        )));
    }
    let depth = agg.depth;
    let columns: Vec<Column> = match layout {
        Layout::Flat => agg
            .widths
            .iter()
            .map(|&width| Column {
                width,
                layer: None,
                block: 0,
            })
            .collect(),
        Layout::BlockPerLayer => (1..=depth)
            .flat_map(|l| {
                agg.widths.iter().map(move |&width| Column {
                    width,
                    layer: Some(l),
                    block: l - 1,
                })
            })
            .collect(),
        Layout::BlockPerWidth => agg
            .widths
            .iter()
            .enumerate()
            .flat_map(|(b, &width)| {
                (1..=depth).map(move |l| Column {
                    width,
                    layer: Some(l),
                    block: b,
                })
            })
            .collect(),
    };
    let values = (0..agg.noise_ratios.len())
        .map(|r| {
            columns
                .iter()
                .map(|c| {
                    let w = agg.width_index(c.width).expect("column from aggregate");
                    let cell = agg.cell(r, w);
                    let v = match (quantity, c.layer) {
                        (Quantity::Scalar(m), _) => cell.scalar(m),
                        (Quantity::Utilization, Some(l)) => {
                            cell.utilization.get(l - 1).map(|s| s.mean)
                        }
                        (Quantity::Contribution(m), Some(l)) => cell
                            .contribution
                            .get(&m)
                            .and_then(|v| v.get(l - 1))
                            .map(|s| s.mean),
                        _ => None,
                    };
                    v.ok_or_else(|| {
                        Error::Domain(format!(
                            "{} is not available (a test set may be missing)",
                            quantity.label()
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    HeatmapGrid::new(
        quantity,
        layout,
        scale,
        agg.noise_ratios.clone(),
        columns,
        values,
    )
}

/// Interpolation threshold per noise ratio as width indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub noise_ratios: Vec<f64>,
    pub widths: Vec<usize>,
    pub columns: Vec<usize>,
}

impl Trace {
    pub fn from_aggregate(agg: &Aggregate) -> Result<Trace> {
        let grid = build_heatmap(
            agg,
            Quantity::Scalar(MetricKind::GeneralizationGap),
            Layout::Flat,
            Scale::Linear,
        )?;
        Trace::from_gap_grid(&grid)
    }

    pub fn from_gap_grid(grid: &HeatmapGrid) -> Result<Trace> {
        if grid.layout != Layout::Flat {
            return Err(Error::InvalidConfig(
                "threshold trace needs a flat grid".into(),
            ));
        }
        Ok(Trace {
            noise_ratios: grid.noise_ratios.clone(),
            widths: grid.columns.iter().map(|c| c.width).collect(),
            columns: threshold_trace(&grid.values)?,
        })
    }

    pub fn width_at(&self, ratio_index: usize) -> usize {
        self.widths[self.columns[ratio_index]]
    }
}
