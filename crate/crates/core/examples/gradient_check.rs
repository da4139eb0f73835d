//! Compares backprop against fourth-order central differences on two small nets.

use layerlens::nn::{gradient_check, init_model, relu_margin, train, ArchSpec, TrainConfig};
use ndarray::Array2;
use rand::Rng;

fn main() -> layerlens::Result<()> {
    for (d, width, k, depth) in [(2, 3, 2, 2), (4, 8, 3, 3)] {
        let arch = ArchSpec::new(d, width, k, depth)?;
        let eps = 1e-3;
        // Draw batches until no pre-activation lies within 10 steps of a ReLU kink.
        let (model, x, y, seed) = (0u64..)
            .map(|seed| -> layerlens::Result<_> {
                let (mut model, _) = init_model(arch, seed)?;
                let mut rng = layerlens::seed::rng(seed ^ 0xba7c);
                let x = Array2::from_shape_fn((8, d), |_| rng.random_range(-1.0..1.0));
                let y: Vec<usize> = (0..8).map(|_| rng.random_range(0..k)).collect();
                // one step moves the biases off zero, away from exactly dead units
                let cfg = TrainConfig {
                    learning_rate: 0.1,
                    epochs: 1,
                    batch_size: 8,
                    init_seed: seed,
                    shuffle_seed: seed,
                };
                train(&mut model, x.view(), &y, &cfg)?;
                Ok((model, x, y, seed))
            })
            .find(|r| match r {
                Ok((m, x, _, _)) => relu_margin(m, x.view()).is_ok_and(|g| g > 10.0 * eps),
                Err(_) => true,
            })
            .expect("unbounded search")?;

        let err = gradient_check(&model, x.view(), &y, eps)?;
        let layers: Vec<String> = std::iter::once(d)
            .chain(std::iter::repeat_n(width, depth - 1))
            .chain(std::iter::once(k))
            .map(|n| n.to_string())
            .collect();
        println!(
            "{:<10} params={:<4} seed={seed:<3} max relative error {err:.3e}",
            layers.join("-"),
            arch.parameter_count()
        );
    }
    Ok(())
}
