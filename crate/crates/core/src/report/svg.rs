//! Self-contained SVG rendering. Output depends only on the input values, so
//! identical inputs give byte-identical documents.

use std::fmt::Write;

use super::heatmap::{HeatmapGrid, Layout, Scale};
use super::scatter::Scatter;
use super::{Figure, Panel};
use crate::diagnostics::Regime;
use crate::experiment::TOOLKIT_VERSION;

const CELL: i64 = 18;
const BLOCK_GAP: i64 = 6;
const LEFT: i64 = 64;
const TOP: i64 = 52;
const BOTTOM: i64 = 44;
const RIGHT: i64 = 24;
const PANEL_GAP: i64 = 24;
const PLOT_W: i64 = 220;
const PLOT_H: i64 = 180;
const MARKER: &str = "#00b300";
const FONT: &str = "font-family=\"sans-serif\"";

/// Anchors of the color ramp, light to dark. Every channel is non-increasing,
/// so brightness falls monotonically along the ramp.
const ANCHORS: [(i64, i64, i64); 5] = [
    (247, 251, 255),
    (198, 219, 239),
    (107, 174, 214),
    (33, 113, 181),
    (8, 48, 107),
];

/// Step `i` of the 256-step ramp, as `#rrggbb`. Integer arithmetic only.
pub fn ramp(i: u8) -> String {
    let pos = i as i64 * (ANCHORS.len() as i64 - 1);
    let seg = (pos / 255).min(ANCHORS.len() as i64 - 2);
    let frac = pos - seg * 255;
    let (a, b) = (ANCHORS[seg as usize], ANCHORS[seg as usize + 1]);
    let lerp = |x: i64, y: i64| x + (y - x) * frac / 255;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(a.0, b.0),
        lerp(a.1, b.1),
        lerp(a.2, b.2)
    )
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn heatmap_size(g: &HeatmapGrid) -> (i64, i64) {
    let cols = g.columns.len() as i64;
    let gaps = g.block_count().saturating_sub(1) as i64;
    (
        LEFT + cols * CELL + gaps * BLOCK_GAP + RIGHT,
        TOP + g.noise_ratios.len() as i64 * CELL + BOTTOM,
    )
}

fn scatter_size(s: &Scatter) -> (i64, i64) {
    let panels = s.depth.max(1) as i64;
    (
        LEFT + panels * (PLOT_W + PANEL_GAP) + RIGHT,
        TOP + PLOT_H + BOTTOM,
    )
}

fn panel_size(p: &Panel) -> (i64, i64) {
    match p {
        Panel::Heatmap(g) => heatmap_size(g),
        Panel::Scatter(s) => scatter_size(s),
    }
}

fn column_x(g: &HeatmapGrid, c: usize) -> i64 {
    LEFT + c as i64 * CELL + g.columns[c].block as i64 * BLOCK_GAP
}

/// Color index per cell, normalized within each block on the displayed scale.
fn color_indices(g: &HeatmapGrid) -> Vec<Vec<u8>> {
    let shown: Vec<Vec<f64>> = g
        .values
        .iter()
        .map(|r| r.iter().map(|&v| g.scale.apply(v)).collect())
        .collect();
    let mut out = vec![vec![0u8; g.columns.len()]; g.noise_ratios.len()];
    for b in 0..g.block_count() {
        let cols = g.block(b);
        let vals = shown.iter().flat_map(|r| r[cols.clone()].iter().copied());
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        for (r, row) in shown.iter().enumerate() {
            for c in cols.clone() {
                out[r][c] = if hi > lo {
                    ((row[c] - lo) / (hi - lo) * 255.0).round() as u8
                } else {
                    0
                };
            }
        }
    }
    out
}

fn write_heatmap(out: &mut String, g: &HeatmapGrid, title: &str) {
    let (w, _) = heatmap_size(g);
    let rows = g.noise_ratios.len() as i64;
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" {FONT} font-size=\"12\">{}</text>",
        w / 2,
        escape(title)
    );
    let unit = match g.layout {
        Layout::Flat => None,
        Layout::BlockPerLayer => Some("layer"),
        Layout::BlockPerWidth => Some("width"),
    };
    if let Some(unit) = unit {
        for b in 0..g.block_count() {
            let cols = g.block(b);
            let x0 = column_x(g, cols.start);
            let x1 = column_x(g, cols.end - 1) + CELL;
            let c = g.columns[cols.start];
            let label = match g.layout {
                Layout::BlockPerLayer => c.layer.unwrap_or(0).to_string(),
                _ => c.width.to_string(),
            };
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT} font-size=\"10\">{unit} {}</text>",
                (x0 + x1) / 2,
                TOP - 8,
                escape(&label)
            );
        }
    }
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"{}\" text-anchor=\"middle\" {FONT} font-size=\"10\" transform=\"rotate(-90 12 {})\">noise ratio</text>",
        TOP + rows * CELL / 2,
        TOP + rows * CELL / 2
    );
    for (r, ratio) in g.noise_ratios.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT} font-size=\"10\">{}</text>",
            LEFT - 4,
            TOP + r as i64 * CELL + CELL / 2 + 3,
            ratio
        );
    }
    let colors = color_indices(g);
    for (r, row) in g.values.iter().enumerate() {
        let y = TOP + r as i64 * CELL;
        for (c, v) in row.iter().enumerate() {
            let col = g.columns[c];
            let layer = col.layer.map(|l| format!(" layer {l}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\"><title>ratio {} width {}{layer}: {v}</title></rect>",
                column_x(g, c),
                ramp(colors[r][c]),
                g.noise_ratios[r],
                col.width,
            );
        }
        for &c in &g.markers[r] {
            let _ = writeln!(
                out,
                "<rect class=\"row-max\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{MARKER}\" stroke-width=\"2\"/>",
                column_x(g, c) + 2,
                y + 2,
                CELL - 4,
                CELL - 4
            );
        }
    }
    let y_labels = TOP + rows * CELL + 12;
    for (c, col) in g.columns.iter().enumerate() {
        let label = match g.layout {
            Layout::BlockPerWidth => col.layer.unwrap_or(0).to_string(),
            _ => col.width.to_string(),
        };
        let x = column_x(g, c) + CELL / 2;
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{y_labels}\" text-anchor=\"middle\" {FONT} font-size=\"8\">{}</text>",
            escape(&label)
        );
    }
    let axis = match g.layout {
        Layout::BlockPerWidth => "layer",
        _ => "width",
    };
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT} font-size=\"10\">{axis} ({} scale)</text>",
        w / 2,
        y_labels + 16,
        g.scale.name()
    );
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn write_scatter(out: &mut String, s: &Scatter, title: &str) {
    let (w, _) = scatter_size(s);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" {FONT} font-size=\"12\">{}</text>",
        w / 2,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<text x=\"{LEFT}\" y=\"32\" {FONT} font-size=\"10\"><tspan fill=\"#1f77b4\">&#9679; under-parameterized</tspan> <tspan fill=\"#d62728\">&#9679; over-parameterized</tspan></text>"
    );
    for layer in 1..=s.depth {
        let x0 = LEFT + (layer as i64 - 1) * (PLOT_W + PANEL_GAP);
        let pts: Vec<_> = s.points.iter().filter(|p| p.layer == layer).collect();
        let (xl, xh) = range(pts.iter().map(|p| p.x));
        let (yl, yh) = range(pts.iter().map(|p| p.y));
        let _ = writeln!(
            out,
            "<rect x=\"{x0}\" y=\"{TOP}\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"none\" stroke=\"#444\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT} font-size=\"10\">layer {layer}</text>",
            x0 + PLOT_W / 2,
            TOP - 6
        );
        for p in &pts {
            let px = x0 as f64 + 4.0 + (p.x - xl) / (xh - xl) * (PLOT_W as f64 - 8.0);
            let py = (TOP + PLOT_H) as f64 - 4.0 - (p.y - yl) / (yh - yl) * (PLOT_H as f64 - 8.0);
            let fill = match p.regime {
                Regime::UnderParameterized => "#1f77b4",
                Regime::OverParameterized => "#d62728",
            };
            let _ = writeln!(
                out,
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"{fill}\" fill-opacity=\"0.8\"><title>ratio {} width {} seed {}: ({}, {})</title></circle>",
                p.noise_ratio, p.width, p.seed, p.x, p.y
            );
        }
        let yb = TOP + PLOT_H + 12;
        let _ = writeln!(
            out,
            "<text x=\"{x0}\" y=\"{yb}\" {FONT} font-size=\"8\">{xl:.3}</text>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{yb}\" text-anchor=\"end\" {FONT} font-size=\"8\">{xh:.3}</text>",
            x0 + PLOT_W
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT} font-size=\"10\">{}</text>",
            x0 + PLOT_W / 2,
            yb + 14,
            s.x_metric
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT} font-size=\"8\">{yh:.3}</text>",
            x0 - 2,
            TOP + 8
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT} font-size=\"8\">{yl:.3}</text>",
            x0 - 2,
            TOP + PLOT_H
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"{}\" text-anchor=\"middle\" {FONT} font-size=\"10\" transform=\"rotate(-90 12 {})\">utilization</text>",
        TOP + PLOT_H / 2,
        TOP + PLOT_H / 2
    );
}

pub fn render_svg(figure: &Figure) -> String {
    let sizes: Vec<(i64, i64)> = figure.panels.iter().map(|(_, p)| panel_size(p)).collect();
    let width = sizes.iter().map(|s| s.0).max().unwrap_or(LEFT + RIGHT);
    let height = sizes.iter().map(|s| s.1).sum::<i64>().max(TOP + BOTTOM);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&figure.name));
    out.push_str("<metadata>\n");
    let _ = writeln!(
        out,
        "<ll:figure xmlns:ll=\"urn:layerlens:figure\" name=\"{}\" toolkit_version=\"{}\" symlog_threshold=\"{}\">",
        escape(&figure.name),
        TOOLKIT_VERSION,
        Scale::SYMLOG_THRESHOLD
    );
    for (title, p) in &figure.panels {
        let (kind, scale) = match p {
            Panel::Heatmap(g) => ("heatmap", g.scale),
            Panel::Scatter(_) => ("scatter", Scale::Linear),
        };
        let threshold = match scale {
            Scale::Symlog { threshold } => format!(" threshold=\"{threshold}\""),
            Scale::Linear => String::new(),
        };
        let _ = writeln!(
            out,
            "<ll:panel kind=\"{kind}\" title=\"{}\" scale=\"{}\"{threshold}/>",
            escape(title),
            scale.name()
        );
    }
    out.push_str("</ll:figure>\n</metadata>\n");
    let _ = writeln!(
        out,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>"
    );
    let mut y = 0;
    for ((title, p), (_, h)) in figure.panels.iter().zip(&sizes) {
        let _ = writeln!(out, "<g transform=\"translate(0 {y})\">");
        match p {
            Panel::Heatmap(g) => write_heatmap(&mut out, g, title),
            Panel::Scatter(s) => write_scatter(&mut out, s, title),
        }
        out.push_str("</g>\n");
        y += h;
    }
    out.push_str("</svg>\n");
    out
}
