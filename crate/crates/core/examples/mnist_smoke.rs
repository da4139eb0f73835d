//! Trains a width-50 net on an MNIST IDX pair.
//!
//! `cargo run --release --example mnist_smoke -- <images> <labels> [epochs]`

use layerlens::data::load_mnist;
use layerlens::diagnostics::{layer_diagnostics, EvalData};
use layerlens::nn::{average_loss, init_model, train, ArchSpec, TrainConfig};

fn main() -> layerlens::Result<()> {
    let mut args = std::env::args().skip(1);
    let images = args
        .next()
        .unwrap_or_else(|| "data/mnist-5k/train-images-idx3-ubyte.gz".into());
    let labels = args
        .next()
        .unwrap_or_else(|| "data/mnist-5k/train-labels-idx1-ubyte.gz".into());
    let epochs: usize = args.next().map_or(Ok(50), |s| s.parse()).expect("epochs");

    let data = load_mnist(&images, &labels)?;
    println!(
        "{} samples, {} features, {} classes",
        data.len(),
        data.dim(),
        data.class_count()
    );
    let (mut model, snapshot) =
        init_model(ArchSpec::new(data.dim(), 50, data.class_count(), 3)?, 1)?;
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs,
        batch_size: 64,
        init_seed: 1,
        shuffle_seed: 2,
    };
    let history = train(&mut model, data.features(), data.labels(), &cfg)?;
    let (loss, acc) = average_loss(&model, data.features(), data.labels())?;
    println!(
        "last epoch loss {:.4}; train loss {loss:.4}, accuracy {acc:.4}",
        history.last().unwrap()
    );
    let diag = layer_diagnostics(&model, &snapshot, EvalData::new(&data, None)?)?;
    println!("utilization {:?}", diag.utilization);
    Ok(())
}
