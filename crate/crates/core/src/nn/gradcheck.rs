//! Central finite-difference check of the backpropagated gradient.

use ndarray::ArrayView2;

use super::model::ModelState;
use super::ops::{average_loss, loss_and_gradients, Gradients};
use crate::error::{Error, Result};

/// Below this magnitude on both sides the comparison switches to absolute error.
pub const ABSOLUTE_FALLBACK: f64 = 1e-6;

/// Max relative error between backprop and central differences over every parameter.
pub fn gradient_check(
    model: &ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    epsilon: f64,
) -> Result<f64> {
    let (_, analytic) = loss_and_gradients(model, features, labels)?;
    gradient_check_against(model, features, labels, epsilon, &analytic)
}

/// Same check, against a caller-supplied gradient.
pub fn gradient_check_against(
    model: &ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    epsilon: f64,
    analytic: &Gradients,
) -> Result<f64> {
    let numeric = numeric_gradient(model, features, labels, epsilon)?;
    let mut worst = 0.0f64;
    for (a, n) in analytic.values().zip(numeric) {
        worst = worst.max(relative_error(a, n));
    }
    Ok(worst)
}

/// Smallest `|pre-activation|` entering any ReLU on this batch. Finite
/// differences with a step near or above this value straddle a kink.
pub fn relu_margin(model: &ModelState, features: ArrayView2<'_, f64>) -> Result<f64> {
    if features.ncols() != model.arch().input_dim {
        return Err(Error::Shape(format!(
            "feature width {} does not match input_dim {}",
            features.ncols(),
            model.arch().input_dim
        )));
    }
    let mut act = features.to_owned();
    let mut margin = f64::INFINITY;
    for layer in &model.layers()[..model.depth() - 1] {
        act = act.dot(&layer.weights.t()) + &layer.bias;
        margin = act.iter().fold(margin, |m, v| m.min(v.abs()));
        act.mapv_inplace(|v| v.max(0.0));
    }
    Ok(margin)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < ABSOLUTE_FALLBACK {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Fourth-order central differences, in checkpoint parameter order:
/// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`.
pub fn numeric_gradient(
    model: &ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(model.parameter_count());
    for l in 0..model.depth() {
        let (rows, cols) = model.layers()[l].weights.dim();
        for r in 0..rows {
            for c in 0..cols {
                out.push(central(&mut probe, features, labels, epsilon, |m| {
                    &mut m.layers_mut()[l].weights[[r, c]]
                })?);
            }
        }
        for r in 0..rows {
            out.push(central(&mut probe, features, labels, epsilon, |m| {
                &mut m.layers_mut()[l].bias[r]
            })?);
        }
    }
    Ok(out)
}

fn central(
    probe: &mut ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    epsilon: f64,
    slot: impl Fn(&mut ModelState) -> &mut f64,
) -> Result<f64> {
    let orig = *slot(probe);
    let mut at = |offset: f64| -> Result<f64> {
        *slot(probe) = orig + offset;
        Ok(average_loss(probe, features, labels)?.0)
    };
    let (p2, p1, m1, m2) = (
        at(2.0 * epsilon)?,
        at(epsilon)?,
        at(-epsilon)?,
        at(-2.0 * epsilon)?,
    );
    *slot(probe) = orig;
    Ok((m2 - p2 + 8.0 * (p1 - m1)) / (12.0 * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{init_model, ArchSpec};
    use ndarray::array;

    #[test]
    fn small_net_passes() {
        let (m, _) = init_model(ArchSpec::new(2, 3, 2, 2).unwrap(), 4).unwrap();
        let x = array![[0.3, 0.8], [0.9, 0.1], [0.5, 0.6]];
        let err = gradient_check(&m, x.view(), &[0, 1, 1], 1e-5).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn saturated_fit_uses_absolute_fallback() {
        // Huge correct margin: every gradient entry underflows toward zero.
        let (mut m, _) = init_model(ArchSpec::new(1, 2, 2, 2).unwrap(), 1).unwrap();
        let out = &mut m.layers_mut()[1];
        out.weights.fill(0.0);
        out.bias[0] = 60.0;
        out.bias[1] = -60.0;
        let x = array![[0.4], [0.7]];
        let err = gradient_check(&m, x.view(), &[0, 0], 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn sign_flipped_gradient_is_caught() {
        let (m, _) = init_model(ArchSpec::new(2, 3, 2, 2).unwrap(), 4).unwrap();
        let x = array![[0.3, 0.8], [0.9, 0.1]];
        let y = [0, 1];
        let (_, mut g) = loss_and_gradients(&m, x.view(), &y).unwrap();
        for layer in &mut g.layers {
            layer.weights.mapv_inplace(|v| -v);
            layer.bias.mapv_inplace(|v| -v);
        }
        let err = gradient_check_against(&m, x.view(), &y, 1e-5, &g).unwrap();
        assert!((err - 2.0).abs() < 1e-3, "{err}");
    }
}
