//! Trains a deep ReLU net on Gaussian blobs and reports train/test loss.

use layerlens::data::synth_blobs;
use layerlens::diagnostics::{evaluate, EvalData};
use layerlens::nn::{init_model, train, ArchSpec, TrainConfig};

fn main() -> layerlens::Result<()> {
    let train_set = synth_blobs(1000, 20, 4, 3.0, 1)?;
    let test_set = synth_blobs(1000, 20, 4, 3.0, 2)?;
    let (mut model, _) = init_model(ArchSpec::new(20, 32, 4, 4)?, 3)?;
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs: 100,
        batch_size: 64,
        init_seed: 3,
        shuffle_seed: 4,
    };
    let history = train(&mut model, train_set.features(), train_set.labels(), &cfg)?;
    for (epoch, loss) in history.iter().enumerate().step_by(10) {
        println!("epoch {epoch:>3}  mean batch loss {loss:.4}");
    }
    let eval = evaluate(&model, EvalData::new(&train_set, Some(&test_set))?)?;
    println!(
        "train loss {:.4} acc {:.3} | test loss {:.4} acc {:.3}",
        eval.train_loss,
        eval.train_accuracy,
        eval.test_loss.unwrap(),
        eval.test_accuracy.unwrap()
    );
    Ok(())
}
