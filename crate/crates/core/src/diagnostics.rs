//! Layer-wise diagnostics of a trained model against its initialization.
//!
//! Layers are numbered from 1 (closest to the input) to `depth` (the output layer).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{forward, loss_from_logits, InitSnapshot, ModelState};

/// A scalar measurement of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    TrainLoss,
    TestLoss,
    GeneralizationGap,
    Resilience,
    TrainAccuracy,
    TestAccuracy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::TrainLoss,
        MetricKind::TestLoss,
        MetricKind::GeneralizationGap,
        MetricKind::Resilience,
        MetricKind::TrainAccuracy,
        MetricKind::TestAccuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::TrainLoss => "train_loss",
            MetricKind::TestLoss => "test_loss",
            MetricKind::GeneralizationGap => "generalization_gap",
            MetricKind::Resilience => "resilience",
            MetricKind::TrainAccuracy => "train_accuracy",
            MetricKind::TestAccuracy => "test_accuracy",
        }
    }

    pub fn needs_test(self) -> bool {
        matches!(
            self,
            MetricKind::TestLoss | MetricKind::TestAccuracy | MetricKind::GeneralizationGap
        )
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown metric {s:?}")))
    }
}

/// Data a metric is evaluated on. `train` is the (possibly corrupted)
/// training set; its recovered labels drive resilience.
#[derive(Debug, Clone, Copy)]
pub struct EvalData<'a> {
    pub train: &'a LabeledDataset,
    pub test: Option<&'a LabeledDataset>,
}

impl<'a> EvalData<'a> {
    pub fn new(train: &'a LabeledDataset, test: Option<&'a LabeledDataset>) -> Result<Self> {
        if let Some(t) = test {
            train.check_compatible(t)?;
        }
        Ok(EvalData { train, test })
    }

    pub fn metrics(&self) -> Vec<MetricKind> {
        MetricKind::ALL
            .into_iter()
            .filter(|m| self.test.is_some() || !m.needs_test())
            .collect()
    }
}

/// Every metric computable from one forward pass per dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub resilience: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

impl Evaluation {
    pub fn get(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::TrainLoss => Some(self.train_loss),
            MetricKind::TrainAccuracy => Some(self.train_accuracy),
            MetricKind::Resilience => Some(self.resilience),
            MetricKind::TestLoss => self.test_loss,
            MetricKind::TestAccuracy => self.test_accuracy,
            MetricKind::GeneralizationGap => self.test_loss.map(|t| (self.train_loss - t).abs()),
        }
    }
}

pub fn evaluate(model: &ModelState, data: EvalData<'_>) -> Result<Evaluation> {
    let logits = forward(model, data.train.features())?;
    let (train_loss, train_accuracy) = loss_from_logits(logits.view(), data.train.labels())?;
    let resilience = if data.train.is_corrupted() {
        loss_from_logits(logits.view(), data.train.recovered_labels())?.0
    } else {
        train_loss
    };
    let (test_loss, test_accuracy) = match data.test {
        Some(t) => {
            let (l, a) = loss_from_logits(forward(model, t.features())?.view(), t.labels())?;
            (Some(l), Some(a))
        }
        None => (None, None),
    };
    Ok(Evaluation {
        train_loss,
        train_accuracy,
        resilience,
        test_loss,
        test_accuracy,
    })
}

pub fn evaluate_metric(model: &ModelState, metric: MetricKind, data: EvalData<'_>) -> Result<f64> {
    evaluate(model, data)?
        .get(metric)
        .ok_or_else(|| Error::Domain(format!("metric {metric} needs a test set")))
}

/// Euclidean (Frobenius) distance of layer `l`'s weights from their initial
/// values. Biases are not included.
pub fn layer_utilization(model: &ModelState, snapshot: &InitSnapshot, l: usize) -> Result<f64> {
    snapshot.check_compatible(model)?;
    let trained = &model.layer(l)?.weights;
    let initial = &snapshot.layer(l)?.weights;
    Ok(trained
        .iter()
        .zip(initial.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

pub fn utilizations(model: &ModelState, snapshot: &InitSnapshot) -> Result<Vec<f64>> {
    (1..=model.depth())
        .map(|l| layer_utilization(model, snapshot, l))
        .collect()
}

/// Copy of `model` with layer `l`'s weights and bias restored from the snapshot.
pub fn reinit_layer(model: &ModelState, snapshot: &InitSnapshot, l: usize) -> Result<ModelState> {
    snapshot.check_compatible(model)?;
    let mut out = model.clone();
    out.set_layer(l, snapshot.layer(l)?.clone());
    Ok(out)
}

/// `M(reinitialized) - M(trained)`: positive on a loss metric means training
/// layer `l` lowered that loss.
pub fn layer_contribution(
    model: &ModelState,
    snapshot: &InitSnapshot,
    l: usize,
    metric: MetricKind,
    data: EvalData<'_>,
) -> Result<f64> {
    contribution_with(model, snapshot, l, |m| evaluate_metric(m, metric, data))
}

/// Contribution of layer `l` under an arbitrary metric.
pub fn contribution_with(
    model: &ModelState,
    snapshot: &InitSnapshot,
    l: usize,
    mut metric: impl FnMut(&ModelState) -> Result<f64>,
) -> Result<f64> {
    let reinit = reinit_layer(model, snapshot, l)?;
    Ok(metric(&reinit)? - metric(model)?)
}

/// Per-layer utilization and contribution to every metric `data` supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDiagnostics {
    pub utilization: Vec<f64>,
    pub contribution: BTreeMap<MetricKind, Vec<f64>>,
}

pub fn layer_diagnostics(
    model: &ModelState,
    snapshot: &InitSnapshot,
    data: EvalData<'_>,
) -> Result<LayerDiagnostics> {
    let utilization = utilizations(model, snapshot)?;
    let base = evaluate(model, data)?;
    let metrics = data.metrics();
    let mut contribution: BTreeMap<MetricKind, Vec<f64>> = metrics
        .iter()
        .map(|&m| (m, Vec::with_capacity(model.depth())))
        .collect();
    for l in 1..=model.depth() {
        let reinit = evaluate(&reinit_layer(model, snapshot, l)?, data)?;
        for &m in &metrics {
            let delta =
                reinit.get(m).expect("metric available") - base.get(m).expect("metric available");
            contribution.get_mut(&m).unwrap().push(delta);
        }
    }
    Ok(LayerDiagnostics {
        utilization,
        contribution,
    })
}

/// `|J(train) - J(test)|` with mean cross-entropy.
pub fn generalization_gap(
    model: &ModelState,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<f64> {
    let data = EvalData::new(train, Some(test))?;
    evaluate_metric(model, MetricKind::GeneralizationGap, data)
}

/// Mean cross-entropy against the recovered (pre-corruption) training labels.
pub fn resilience(model: &ModelState, corrupted_train: &LabeledDataset) -> Result<f64> {
    let (x, y) = corrupted_train.recovered_view();
    Ok(crate::nn::average_loss(model, x, y)?.0)
}

/// Largest noise ratio whose mean final training loss is at most `epsilon`.
/// `points` are `(noise_ratio, mean_train_loss)` for one architecture and training setup.
pub fn empirical_emc(points: &[(f64, f64)], epsilon: f64) -> Result<Option<f64>> {
    if points.is_empty() {
        return Err(Error::Domain(
            "no records to estimate effective complexity from".into(),
        ));
    }
    Ok(points
        .iter()
        .filter(|(_, loss)| *loss <= epsilon)
        .map(|&(ratio, _)| ratio)
        .reduce(f64::max))
}

/// Index of the largest value; the first one wins ties.
pub fn row_argmax(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Domain("argmax of an empty row".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("argmax over non-finite values".into()));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Column of the per-row maximum of a generalization-gap grid (rows are noise
/// ratios, columns capacities): the interpolation threshold at each ratio.
pub fn threshold_trace(rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    rows.iter().map(|r| row_argmax(r)).collect()
}

/// Side of the interpolation threshold a model sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    UnderParameterized,
    OverParameterized,
}

impl Regime {
    /// Columns left of the trace are under-parameterized; the trace column itself
    /// and everything right of it are over-parameterized.
    pub fn classify(column: usize, trace: usize) -> Regime {
        if column < trace {
            Regime::UnderParameterized
        } else {
            Regime::OverParameterized
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::UnderParameterized => "under",
            Regime::OverParameterized => "over",
        }
    }
}

/// Average ranks, 1-based; ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} xs but {} ys", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Domain(format!(
            "need at least 3 pairs, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Domain("spearman over non-finite values".into()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain(
            "rank correlation undefined for constant input".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{corrupt_labels, synth_blobs};
    use crate::nn::{init_model, train, ArchSpec, Dense, TrainConfig};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array2};

    fn trained() -> (ModelState, InitSnapshot, LabeledDataset, LabeledDataset) {
        let clean = synth_blobs(120, 4, 3, 3.0, 1).unwrap();
        let (train_ds, _) = corrupt_labels(&clean, 0.3, 2).unwrap();
        let test = synth_blobs(60, 4, 3, 3.0, 9).unwrap();
        let (mut m, s) = init_model(ArchSpec::new(4, 8, 3, 3).unwrap(), 3).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 16,
            init_seed: 3,
            shuffle_seed: 4,
        };
        train(&mut m, train_ds.features(), train_ds.labels(), &cfg).unwrap();
        (m, s, train_ds, test)
    }

    #[test]
    fn untrained_utilization_is_zero() {
        let (m, s) = init_model(ArchSpec::new(4, 8, 3, 4).unwrap(), 1).unwrap();
        assert_eq!(utilizations(&m, &s).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn utilization_hand_norm() {
        let arch = ArchSpec::new(2, 2, 2, 2).unwrap();
        let zero = ModelState::zeros(arch).unwrap();
        let snap = InitSnapshot::capture(&zero);
        let mut m = zero.clone();
        m.layers_mut()[0].weights = array![[3.0, 0.0], [0.0, 4.0]];
        m.layers_mut()[0].bias = array![100.0, 100.0];
        assert_eq!(layer_utilization(&m, &snap, 1).unwrap(), 5.0);
        assert_eq!(layer_utilization(&m, &snap, 2).unwrap(), 0.0);
    }

    #[test]
    fn utilization_scales_with_difference() {
        let (m, s, ..) = trained();
        let u = layer_utilization(&m, &s, 2).unwrap();
        let mut scaled = m.clone();
        let w0 = &s.layers()[1].weights;
        scaled.layers_mut()[1].weights = w0 + &((&m.layers()[1].weights - w0) * -2.5);
        assert_abs_diff_eq!(
            layer_utilization(&scaled, &s, 2).unwrap(),
            2.5 * u,
            epsilon = 1e-12
        );
    }

    #[test]
    fn reinit_restores_only_that_layer() {
        let (m, s, ..) = trained();
        let before = utilizations(&m, &s).unwrap();
        let r = reinit_layer(&m, &s, 2).unwrap();
        let after = utilizations(&r, &s).unwrap();
        assert_eq!(after[1], 0.0);
        assert_eq!(r.layers()[1].bias, s.layers()[1].bias);
        for l in [0, 2] {
            assert_eq!(after[l], before[l]);
        }
        assert_eq!(reinit_layer(&r, &s, 2).unwrap(), r);
        assert!(matches!(
            reinit_layer(&m, &s, 4),
            Err(Error::LayerOutOfRange { .. })
        ));
    }

    #[test]
    fn reinit_on_untrained_is_identity() {
        let (m, s) = init_model(ArchSpec::new(4, 8, 3, 3).unwrap(), 1).unwrap();
        assert_eq!(reinit_layer(&m, &s, 1).unwrap(), m);
    }

    #[test]
    fn contribution_zero_cases() {
        let (m, s) = init_model(ArchSpec::new(4, 8, 3, 3).unwrap(), 1).unwrap();
        let d = synth_blobs(30, 4, 3, 1.0, 1).unwrap();
        let data = EvalData::new(&d, Some(&d)).unwrap();
        for metric in MetricKind::ALL {
            assert_eq!(layer_contribution(&m, &s, 2, metric, data).unwrap(), 0.0);
        }
        let (t, ts, ..) = trained();
        assert_eq!(contribution_with(&t, &ts, 1, |_| Ok(4.2)).unwrap(), 0.0);
    }

    #[test]
    fn contribution_matches_two_forward_passes() {
        // 1-1-2 network; the output layer was "trained" away from its init.
        let arch = ArchSpec::new(1, 1, 2, 2).unwrap();
        let hidden = Dense {
            weights: array![[1.0]],
            bias: array![0.0],
        };
        let init_out = Dense {
            weights: array![[0.0], [0.0]],
            bias: array![0.0, 0.0],
        };
        let trained_out = Dense {
            weights: array![[2.0], [-1.0]],
            bias: array![0.5, 0.0],
        };
        let snap = InitSnapshot::capture(
            &ModelState::from_layers(arch, vec![hidden.clone(), init_out]).unwrap(),
        );
        let model = ModelState::from_layers(arch, vec![hidden, trained_out]).unwrap();
        let ds = LabeledDataset::new("t", array![[0.5], [1.0]], vec![0, 1], 2).unwrap();
        // trained logits: x=0.5 -> (1.5, -0.5); x=1 -> (2.5, -1)
        let ce = |a: f64, b: f64, y: usize| {
            let lse = (a.exp() + b.exp()).ln();
            lse - if y == 0 { a } else { b }
        };
        let trained_loss = (ce(1.5, -0.5, 0) + ce(2.5, -1.0, 1)) / 2.0;
        let reinit_loss = 2f64.ln();
        let data = EvalData::new(&ds, None).unwrap();
        let c = layer_contribution(&model, &snap, 2, MetricKind::TrainLoss, data).unwrap();
        assert_abs_diff_eq!(c, reinit_loss - trained_loss, epsilon = 1e-12);
    }

    #[test]
    fn gap_cases() {
        let (m, _, tr, te) = trained();
        assert_eq!(generalization_gap(&m, &tr, &tr).unwrap(), 0.0);
        assert_eq!(
            generalization_gap(&m, &tr, &te).unwrap(),
            generalization_gap(&m, &te, &tr).unwrap()
        );
        let wrong = synth_blobs(10, 5, 3, 1.0, 1).unwrap();
        assert!(generalization_gap(&m, &tr, &wrong).is_err());
    }

    #[test]
    fn test_metrics_need_test_set() {
        let (m, _, tr, _) = trained();
        let data = EvalData::new(&tr, None).unwrap();
        assert!(evaluate_metric(&m, MetricKind::TestLoss, data).is_err());
        assert_eq!(data.metrics().len(), 3);
    }

    #[test]
    fn resilience_equals_train_loss_when_clean() {
        let clean = synth_blobs(90, 4, 3, 2.0, 5).unwrap();
        let (m, ..) = trained();
        let (tl, _) = crate::nn::average_loss(&m, clean.features(), clean.labels()).unwrap();
        assert_eq!(resilience(&m, &clean).unwrap(), tl);
        let data = EvalData::new(&clean, None).unwrap();
        let e = evaluate(&m, data).unwrap();
        assert_eq!(e.resilience, e.train_loss);
    }

    #[test]
    fn resilience_of_uniform_predictor() {
        let m = ModelState::zeros(ArchSpec::new(4, 3, 10, 3).unwrap()).unwrap();
        let d = LabeledDataset::new("t", Array2::from_elem((5, 4), 0.5), vec![0, 3, 9, 2, 2], 10)
            .unwrap();
        let (c, _) = corrupt_labels(&d, 0.6, 1).unwrap();
        assert_abs_diff_eq!(resilience(&m, &c).unwrap(), 10f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn resilience_of_lookup_table_matches_closed_form() {
        // One-hot features, identity hidden layer and an output layer that
        // puts probability p on each sample's (corrupted) training label.
        let n = 12;
        let k = 4;
        let p: f64 = 0.7;
        let base =
            LabeledDataset::new("lut", Array2::eye(n), (0..n).map(|i| i % k).collect(), k).unwrap();
        let (ds, _) = corrupt_labels(&base, 0.5, 3).unwrap();
        let hi = p.ln();
        let lo = ((1.0 - p) / (k - 1) as f64).ln();
        let mut out = Array2::from_elem((k, n), lo);
        for (i, &y) in ds.labels().iter().enumerate() {
            out[[y, i]] = hi;
        }
        let arch = ArchSpec::new(n, n, k, 2).unwrap();
        let model = ModelState::from_layers(
            arch,
            vec![
                Dense {
                    weights: Array2::eye(n),
                    bias: Array1::zeros(n),
                },
                Dense {
                    weights: out,
                    bias: Array1::zeros(k),
                },
            ],
        )
        .unwrap();
        let (same, moved): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| ds.labels()[i] == ds.recovered_labels()[i]);
        assert!(!moved.is_empty());
        let expected = (same.len() as f64 * -p.ln()
            + moved.len() as f64 * -((1.0 - p) / (k - 1) as f64).ln())
            / n as f64;
        assert_abs_diff_eq!(resilience(&model, &ds).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn emc_examples() {
        let pts = [(0.0, 0.001), (0.2, 0.002), (0.4, 0.15)];
        assert_eq!(empirical_emc(&pts, 0.01).unwrap(), Some(0.2));
        assert_eq!(empirical_emc(&pts, 0.0001).unwrap(), None);
        assert_eq!(empirical_emc(&pts, 1.0).unwrap(), Some(0.4));
        assert!(empirical_emc(&[], 1.0).is_err());
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(row_argmax(&[1.0, 3.0, 2.0]).unwrap(), 1);
        assert_eq!(row_argmax(&[5.0, 5.0]).unwrap(), 0);
        assert_eq!(row_argmax(&[-7.0]).unwrap(), 0);
        assert!(row_argmax(&[]).is_err());
    }

    #[test]
    fn trace_examples() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![0.0, 0.5, 0.9]];
        assert_eq!(threshold_trace(&rows).unwrap(), vec![2, 2]);
        let rows = vec![vec![1.0, 4.0, 3.0, 0.0], vec![0.0, 0.5, 0.9, 0.1]];
        assert_eq!(threshold_trace(&rows).unwrap(), vec![1, 2]);
        assert_eq!(Regime::classify(1, 2), Regime::UnderParameterized);
        assert_eq!(Regime::classify(2, 2), Regime::OverParameterized);
    }

    #[test]
    fn spearman_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(spearman(&xs, &[2.0, 4.0, 8.0, 9.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(spearman(&xs, &[9.0, 4.0, 1.0, 0.0]).unwrap(), -1.0);
        assert_abs_diff_eq!(
            spearman(&xs, &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8,
            epsilon = 1e-12
        );
        assert!(spearman(&xs, &[1.0, 2.0]).is_err());
        assert!(spearman(&xs, &[1.0; 4]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 5.0]),
            vec![2.5, 4.0, 2.5, 1.0]
        );
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
    }
}
