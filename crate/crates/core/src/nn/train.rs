use ndarray::{ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::ModelState;
use super::ops::loss_and_gradients;
use crate::error::{Error, Result};
use crate::seed;

/// Plain mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 10_000,
            batch_size: 64,
            init_seed: 0,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be a nonnegative finite number, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sample order used in epoch `epoch`. Each epoch's order depends only on
/// `(shuffle_seed, epoch)`, so any epoch can be replayed in isolation.
pub fn epoch_order(n: usize, shuffle_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed::mix(&[shuffle_seed, epoch as u64]));
    order.shuffle(&mut rng);
    order
}

/// Applies `w -= lr * g` to every parameter.
pub fn apply_step(model: &mut ModelState, grads: &super::ops::Gradients, lr: f64) {
    for (layer, g) in model.layers_mut().iter_mut().zip(&grads.layers) {
        Zip::from(&mut layer.weights)
            .and(&g.weights)
            .for_each(|w, &d| *w -= lr * d);
        Zip::from(&mut layer.bias)
            .and(&g.bias)
            .for_each(|b, &d| *b -= lr * d);
    }
}

/// One pass over a seeded shuffle of the data. Returns the epoch's mean
/// per-sample loss, accumulated before each batch's update.
pub fn sgd_epoch(
    model: &mut ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    config: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    config.validate()?;
    let n = features.nrows();
    if n == 0 {
        return Err(Error::Domain("cannot train on an empty dataset".into()));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }

    let order = epoch_order(n, config.shuffle_seed, epoch);
    let mut total = 0.0;
    for batch in order.chunks(config.batch_size) {
        let xb = features.select(Axis(0), batch);
        let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
        let (loss, grads) = loss_and_gradients(model, xb.view(), &yb)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("batch loss is {loss}"),
            });
        }
        if !grads.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: "non-finite gradient".into(),
            });
        }
        if config.learning_rate != 0.0 {
            apply_step(model, &grads, config.learning_rate);
        }
        total += loss * batch.len() as f64;
    }
    Ok(total / n as f64)
}

/// Runs exactly `config.epochs` epochs and returns the per-epoch mean loss.
pub fn train(
    model: &mut ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        history.push(sgd_epoch(model, features, labels, config, epoch)?);
        if epoch % 500 == 499 {
            log::debug!("epoch {} loss {:.6}", epoch + 1, history[epoch]);
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{init_model, ArchSpec, Dense};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn toy() -> (Array2<f64>, Vec<usize>) {
        (
            array![[0.1, 0.9], [0.8, 0.2], [0.2, 0.7], [0.9, 0.1], [0.5, 0.5]],
            vec![0, 1, 0, 1, 0],
        )
    }

    fn config(lr: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            epochs,
            batch_size: 2,
            init_seed: 1,
            shuffle_seed: 2,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_model() {
        let (x, y) = toy();
        let (mut m, s) = init_model(ArchSpec::new(2, 4, 2, 3).unwrap(), 1).unwrap();
        sgd_epoch(&mut m, x.view(), &y, &config(0.0, 1), 0).unwrap();
        assert_eq!(m, s.to_model());
    }

    #[test]
    fn single_logistic_step_matches_hand_gradient() {
        // Two-class softmax with logits (w x + b, 0) is a logistic unit on w.
        // Second layer fixed to pass h through: logit0 = h, logit1 = 0.
        let arch = ArchSpec::new(1, 1, 2, 2).unwrap();
        let w0 = 0.5;
        let mut m = ModelState::from_layers(
            arch,
            vec![
                Dense {
                    weights: array![[w0]],
                    bias: array![0.0],
                },
                Dense {
                    weights: array![[1.0], [0.0]],
                    bias: array![0.0, 0.0],
                },
            ],
        )
        .unwrap();
        let x = 2.0;
        let lr = 0.1;
        let cfg = TrainConfig {
            learning_rate: lr,
            epochs: 1,
            batch_size: 1,
            init_seed: 0,
            shuffle_seed: 0,
        };
        sgd_epoch(&mut m, array![[x]].view(), &[0], &cfg, 0).unwrap();
        // dL/dh = sigmoid(h) - 1 with h = w0 x = 1 > 0 (ReLU active); dL/dw = (sigmoid(1) - 1) x
        let sig = 1.0 / (1.0 + (-1.0f64).exp());
        let expected = w0 - lr * (sig - 1.0) * x;
        assert_abs_diff_eq!(m.layers()[0].weights[[0, 0]], expected, epsilon = 1e-14);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (x, y) = toy();
        let arch = ArchSpec::new(2, 4, 2, 3).unwrap();
        let run = || {
            let (mut m, _) = init_model(arch, 9).unwrap();
            let h = train(&mut m, x.view(), &y, &config(0.1, 20)).unwrap();
            (m, h)
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a, b);
        assert_eq!(
            ha.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            hb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn history_length_equals_epochs() {
        let (x, y) = toy();
        let (mut m, _) = init_model(ArchSpec::new(2, 4, 2, 3).unwrap(), 1).unwrap();
        let h = train(&mut m, x.view(), &y, &config(0.05, 13)).unwrap();
        assert_eq!(h.len(), 13);
        assert!(h.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_epochs_rejected() {
        assert!(config(0.1, 0).validate().is_err());
        let mut c = config(0.1, 1);
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn huge_learning_rate_diverges_with_epoch() {
        let (x, y) = toy();
        let (mut m, _) = init_model(ArchSpec::new(2, 8, 2, 4).unwrap(), 1).unwrap();
        let err = train(&mut m, (&x * 1e305).view(), &y, &config(0.1, 5)).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0, .. }), "{err}");
    }

    #[test]
    fn epoch_order_is_a_permutation() {
        let mut o = epoch_order(50, 3, 4);
        assert_ne!(o, (0..50).collect::<Vec<_>>());
        o.sort_unstable();
        assert_eq!(o, (0..50).collect::<Vec<_>>());
    }
}
