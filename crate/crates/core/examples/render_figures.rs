//! Runs a tiny sweep and writes all five figures (CSV + SVG) to a directory.

use layerlens::experiment::{run_sweep, DatasetSpec, RunTemplate, SweepGrid, SweepOptions};
use layerlens::report::{build_figure, write_figure, FigureKind};

fn main() -> layerlens::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "figures".into());
    let grid = SweepGrid {
        widths: vec![4, 8, 16],
        noise_ratios: vec![0.0, 0.2, 0.4],
        seeds: vec![0, 1],
        template: RunTemplate {
            depth: 4,
            learning_rate: 0.05,
            epochs: 60,
            batch_size: 32,
            holdout_fraction: 0.0,
            master_seed: 0,
            dataset: DatasetSpec::Synth {
                n_train: 400,
                n_test: 400,
                d: 10,
                k: 4,
                separation: 3.0,
                seed: 1,
            },
        },
    };
    let split = grid.template.dataset.load()?;
    let options = SweepOptions {
        jobs: 2,
        out: None,
        resume: false,
        checkpoint_dir: None,
        stop_after: None,
    };
    let records = run_sweep(&grid, &split, &options)?.records;
    for kind in FigureKind::ALL {
        let fig = build_figure(kind, &records)?;
        let (csv, svg) = write_figure(&fig, &out)?;
        println!("{kind}: {} {}", csv.display(), svg.display());
    }
    Ok(())
}
