//! Width x noise sweep on blobs; prints the mean gap grid and its per-row argmax.

use layerlens::diagnostics::MetricKind;
use layerlens::experiment::{
    aggregate, run_sweep, DatasetSpec, RunTemplate, SweepGrid, SweepOptions,
};
use layerlens::report::Trace;

fn main() -> layerlens::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .map_or(Ok(300), |s| s.parse())
        .expect("epochs");
    let grid = SweepGrid {
        widths: vec![2, 4, 8, 16, 32, 64],
        noise_ratios: vec![0.0, 0.2],
        seeds: vec![0, 1],
        template: RunTemplate {
            depth: 5,
            learning_rate: 0.05,
            epochs,
            batch_size: 64,
            holdout_fraction: 0.0,
            master_seed: 0,
            dataset: DatasetSpec::Synth {
                n_train: 1000,
                n_test: 1000,
                d: 20,
                k: 4,
                separation: 3.0,
                seed: 1,
            },
        },
    };
    let split = grid.template.dataset.load()?;
    let options = SweepOptions {
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        out: None,
        resume: false,
        checkpoint_dir: None,
        stop_after: None,
    };
    let result = run_sweep(&grid, &split, &options)?;
    let agg = aggregate(&result.records)?;
    let gap = agg.grid(|c| c.scalar(MetricKind::GeneralizationGap))?;
    let trace = Trace::from_aggregate(&agg)?;

    print!("ratio \\ width");
    for w in &agg.widths {
        print!("{w:>8}");
    }
    println!("   peak");
    for (r, row) in gap.iter().enumerate() {
        print!("{:>13}", agg.noise_ratios[r]);
        for v in row {
            print!("{v:>8.4}");
        }
        println!("   {}", trace.width_at(r));
    }
    Ok(())
}
