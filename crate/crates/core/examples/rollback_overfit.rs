//! Fits heavily corrupted labels, then picks how many trailing layers to reset on a clean holdout.

use layerlens::data::{corrupt_labels, synth_blobs};
use layerlens::nn::{average_loss, init_model, train, ArchSpec, TrainConfig};
use layerlens::rollback::{rollback_last_k, select_rollback};

fn main() -> layerlens::Result<()> {
    let clean = synth_blobs(1200, 20, 4, 3.0, 1)?;
    let holdout = clean.select(&(1000..1200).collect::<Vec<_>>(), "holdout")?;
    let fit = clean.head(1000)?;
    let (noisy, _) = corrupt_labels(&fit, 0.5, 3)?;
    let test = synth_blobs(1000, 20, 4, 3.0, 2)?;

    let epochs: usize = std::env::args()
        .nth(1)
        .map_or(Ok(400), |s| s.parse())
        .expect("epochs");
    let (mut model, snapshot) = init_model(ArchSpec::new(20, 64, 4, 5)?, 8)?;
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs,
        batch_size: 64,
        init_seed: 8,
        shuffle_seed: 9,
    };
    train(&mut model, noisy.features(), noisy.labels(), &cfg)?;

    let sel = select_rollback(&model, &snapshot, &holdout)?;
    for (k, loss) in sel.holdout_losses.iter().enumerate() {
        let marker = if k == sel.k { "  <- k*" } else { "" };
        println!("k={k}  holdout loss {loss:.4}{marker}");
    }
    let rolled = rollback_last_k(&model, &snapshot, sel.k)?;
    let before = average_loss(&model, test.features(), test.labels())?;
    let after = average_loss(&rolled, test.features(), test.labels())?;
    println!(
        "test loss {:.4} -> {:.4}, accuracy {:.3} -> {:.3}",
        before.0, after.0, before.1, after.1
    );
    Ok(())
}
