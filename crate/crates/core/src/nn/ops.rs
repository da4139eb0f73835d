//! Forward pass, softmax cross-entropy and exact backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::model::{Dense, ModelState};
use crate::error::{Error, Result};

/// Logits `[n, K]` for a batch of feature rows. ReLU follows every layer but the last.
pub fn forward(model: &ModelState, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_features(model, features)?;
    let mut act = affine(&model.layers()[0], features);
    for layer in &model.layers()[1..] {
        relu_inplace(&mut act);
        act = affine(layer, act.view());
    }
    Ok(act)
}

fn affine(layer: &Dense, input: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut z = input.dot(&layer.weights.t());
    z += &layer.bias;
    z
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
}

fn check_features(model: &ModelState, features: ArrayView2<'_, f64>) -> Result<()> {
    let want = model.arch().input_dim;
    if features.ncols() != want {
        return Err(Error::Shape(format!(
            "feature width {} does not match input_dim {want}",
            features.ncols()
        )));
    }
    Ok(())
}

fn check_labels(n: usize, labels: &[usize], classes: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("cannot evaluate on an empty dataset".into()));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Domain(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// `-log softmax(row)[label]`, computed with a shifted log-sum-exp.
pub fn cross_entropy_row(row: ndarray::ArrayView1<'_, f64>, label: usize) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    lse - row[label]
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax_row(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy and argmax accuracy of precomputed logits.
pub fn loss_from_logits(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, f64)> {
    check_labels(logits.nrows(), labels, logits.ncols())?;
    let n = logits.nrows();
    let mut total = 0.0;
    let mut correct = 0usize;
    for (row, &y) in logits.axis_iter(Axis(0)).zip(labels) {
        total += cross_entropy_row(row, y);
        if argmax_row(row) == y {
            correct += 1;
        }
    }
    Ok((total / n as f64, correct as f64 / n as f64))
}

/// Average softmax cross-entropy over the samples and the fraction classified correctly.
pub fn average_loss(
    model: &ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<(f64, f64)> {
    check_labels(features.nrows(), labels, model.arch().output_dim)?;
    let logits = forward(model, features)?;
    loss_from_logits(logits.view(), labels)
}

/// Per-layer gradient of the batch-mean loss, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|d| d.weights.iter().chain(d.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|d| d.weights.iter().chain(d.bias.iter()).copied())
    }
}

/// Mean cross-entropy of the batch and its exact gradient.
pub fn loss_and_gradients(
    model: &ModelState,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    check_features(model, features)?;
    check_labels(features.nrows(), labels, model.arch().output_dim)?;
    let n = features.nrows();
    let layers = model.layers();

    // pre_acts[l] is the pre-activation of layer l (0-based); inputs[l] is what fed it.
    let mut pre_acts: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(layers.len() - 1);
    let mut z = affine(&layers[0], features);
    for layer in &layers[1..] {
        let mut a = z.clone();
        relu_inplace(&mut a);
        pre_acts.push(z);
        z = affine(layer, a.view());
        hidden.push(a);
    }

    // softmax - onehot, scaled by 1/n
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    let mut delta = z;
    for (mut row, &y) in delta.axis_iter_mut(Axis(0)).zip(labels) {
        loss += cross_entropy_row(row.view(), y);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum * inv_n);
        row[y] -= inv_n;
    }
    loss *= inv_n;

    let mut grads: Vec<Dense> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let input = if l == 0 {
            features
        } else {
            hidden[l - 1].view()
        };
        let weights = delta.t().dot(&input);
        let bias: Array1<f64> = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&layers[l].weights);
            Zip::from(&mut upstream)
                .and(&pre_acts[l - 1])
                .for_each(|g, &pre| {
                    if pre <= 0.0 {
                        *g = 0.0;
                    }
                });
            delta = upstream;
        }
        grads.push(Dense { weights, bias });
    }
    grads.reverse();
    Ok((loss, Gradients { layers: grads }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{init_model, ArchSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn hand_net() -> ModelState {
        // 1-2-2: input 1, hidden 2, output 2
        let arch = ArchSpec::new(1, 2, 2, 2).unwrap();
        ModelState::from_layers(
            arch,
            vec![
                Dense {
                    weights: array![[2.0], [-1.0]],
                    bias: array![0.5, 0.25],
                },
                Dense {
                    weights: array![[1.0, 3.0], [-2.0, 0.5]],
                    bias: array![0.1, -0.2],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = ModelState::zeros(ArchSpec::new(4, 3, 5, 3).unwrap()).unwrap();
        let x = Array2::from_elem((7, 4), 0.3);
        let out = forward(&m, x.view()).unwrap();
        assert_eq!(out.dim(), (7, 5));
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_executed_forward() {
        // x = 1.5: h = relu([3.5, -1.25]) = [3.5, 0]
        // logits = [3.5 + 0.1, -7 - 0.2] = [3.6, -7.2]
        let out = forward(&hand_net(), array![[1.5]].view()).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], 3.6, epsilon = 1e-12);
        assert_abs_diff_eq!(out[[0, 1]], -7.2, epsilon = 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = hand_net();
        assert!(matches!(
            forward(&m, array![[1.0, 2.0]].view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn positive_homogeneity_without_biases() {
        let (mut m, _) = init_model(ArchSpec::new(3, 6, 4, 4).unwrap(), 3).unwrap();
        m.layers_mut().iter_mut().for_each(|l| l.bias.fill(0.0));
        let x = array![[0.2, 0.9, 0.4], [1.0, 0.0, 0.3]];
        let base = forward(&m, x.view()).unwrap();
        let scaled = forward(&m, (&x * 2.5).view()).unwrap();
        for (a, b) in base.iter().zip(scaled.iter()) {
            assert_abs_diff_eq!(a * 2.5, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_predictor_loss_is_ln_k() {
        let m = ModelState::zeros(ArchSpec::new(2, 3, 10, 3).unwrap()).unwrap();
        let x = array![[0.1, 0.2], [0.3, 0.4], [0.9, 0.0]];
        let (loss, _) = average_loss(&m, x.view(), &[0, 4, 9]).unwrap();
        assert_abs_diff_eq!(loss, 10f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn confident_correct_logits() {
        let logits = array![[10.0, 0.0]];
        let (loss, acc) = loss_from_logits(logits.view(), &[0]).unwrap();
        let expected = (1.0 + (-10f64).exp()).ln();
        assert_abs_diff_eq!(loss, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(loss, 4.54e-5, epsilon = 1e-7);
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn duplication_leaves_mean_loss_unchanged() {
        let (m, _) = init_model(ArchSpec::new(2, 4, 3, 3).unwrap(), 11).unwrap();
        let x = array![[0.1, 0.2], [0.7, 0.4]];
        let y = [0, 2];
        let x2 = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let (a, _) = average_loss(&m, x.view(), &y).unwrap();
        let (b, _) = average_loss(&m, x2.view(), &[0, 2, 0, 2]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }

    #[test]
    fn empty_dataset_is_a_domain_error() {
        let m = hand_net();
        let x = Array2::<f64>::zeros((0, 1));
        assert!(matches!(
            average_loss(&m, x.view(), &[]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let m = hand_net();
        assert!(average_loss(&m, array![[1.0]].view(), &[2]).is_err());
    }

    #[test]
    fn loss_and_gradients_agrees_with_average_loss() {
        let (m, _) = init_model(ArchSpec::new(3, 5, 4, 4).unwrap(), 5).unwrap();
        let x = array![[0.1, 0.5, 0.9], [0.3, 0.3, 0.2], [1.0, 0.0, 0.4]];
        let y = [3, 0, 1];
        let (a, _) = average_loss(&m, x.view(), &y).unwrap();
        let (b, g) = loss_and_gradients(&m, x.view(), &y).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        assert_eq!(g.layers.len(), 4);
        for (gl, ml) in g.layers.iter().zip(m.layers()) {
            assert_eq!(gl.weights.dim(), ml.weights.dim());
        }
    }
}
