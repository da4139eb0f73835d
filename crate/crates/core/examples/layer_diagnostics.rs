//! Per-layer utilization and reinit contribution for a model trained on noisy labels.

use layerlens::data::{corrupt_labels, synth_blobs};
use layerlens::diagnostics::{layer_diagnostics, EvalData, MetricKind};
use layerlens::nn::{init_model, train, ArchSpec, TrainConfig};

fn main() -> layerlens::Result<()> {
    let clean = synth_blobs(1000, 20, 4, 3.0, 1)?;
    let test = synth_blobs(1000, 20, 4, 3.0, 2)?;
    let (noisy, _) = corrupt_labels(&clean, 0.3, 9)?;
    let (mut model, snapshot) = init_model(ArchSpec::new(20, 64, 4, 5)?, 5)?;
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs: 200,
        batch_size: 64,
        init_seed: 5,
        shuffle_seed: 6,
    };
    train(&mut model, noisy.features(), noisy.labels(), &cfg)?;

    let diag = layer_diagnostics(&model, &snapshot, EvalData::new(&noisy, Some(&test))?)?;
    let shown = [
        MetricKind::TrainLoss,
        MetricKind::TestLoss,
        MetricKind::Resilience,
    ];
    print!("layer  utilization");
    for m in shown {
        print!("  {:>12}", format!("d {m}"));
    }
    println!();
    for (l, u) in diag.utilization.iter().enumerate() {
        print!("{:>5}  {u:>11.4}", l + 1);
        for m in shown {
            print!("  {:>12.4}", diag.contribution[&m][l]);
        }
        println!();
    }
    Ok(())
}
