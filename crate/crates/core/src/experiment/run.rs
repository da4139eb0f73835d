use std::path::Path;
use std::time::Instant;

use rand::seq::index;

use super::config::{DataSplit, RunConfig};
use super::record::{RunMetrics, RunOutcome, RunRecord, RECORD_VERSION, TOOLKIT_VERSION};
use crate::data::{corrupt_labels, CorruptionPlan, LabeledDataset};
use crate::diagnostics::{evaluate, layer_diagnostics, EvalData};
use crate::error::{Error, Result};
use crate::nn::{init_model, save_checkpoint, train, InitSnapshot, ModelState};
use crate::rollback::select_rollback;
use crate::seed;

const HOLDOUT_STREAM: u64 = 0x686f_6c64;

/// A trained model together with everything needed to diagnose it.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: ModelState,
    pub snapshot: InitSnapshot,
    /// The corrupted training set the model was fit on.
    pub train: LabeledDataset,
    pub plan: CorruptionPlan,
    /// Clean samples carved out of the training data before corruption.
    pub holdout: Option<LabeledDataset>,
    pub history: Vec<f64>,
}

/// Splits `round(fraction * n)` clean samples off the training set. The
/// choice depends only on the corruption seed, so every width at a grid
/// point sees the same split.
pub fn split_holdout(
    clean: &LabeledDataset,
    fraction: f64,
    corruption_seed: u64,
) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    let n = clean.len();
    let m = crate::data::corruption_count(fraction, n);
    if m == 0 {
        return Ok((clean.clone(), None));
    }
    if m >= n {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction {fraction} leaves no training samples out of {n}"
        )));
    }
    let mut rng = seed::rng(seed::mix(&[corruption_seed, HOLDOUT_STREAM, n as u64]));
    let mut held = index::sample(&mut rng, n, m).into_vec();
    held.sort_unstable();
    let mut mask = vec![false; n];
    for &i in &held {
        mask[i] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    let train = clean.select(&kept, clean.name())?;
    let holdout = clean.select(&held, format!("{}-holdout", clean.name()))?;
    Ok((train, Some(holdout)))
}

fn check_data(config: &RunConfig, split: &DataSplit) -> Result<()> {
    config.validate()?;
    let train = &split.train;
    if train.dim() != config.arch.input_dim {
        return Err(Error::Shape(format!(
            "dataset has {} features, model expects {}",
            train.dim(),
            config.arch.input_dim
        )));
    }
    if train.class_count() != config.arch.output_dim {
        return Err(Error::Shape(format!(
            "dataset has {} classes, model expects {}",
            train.class_count(),
            config.arch.output_dim
        )));
    }
    if train.is_corrupted() || split.test.as_ref().is_some_and(|t| t.is_corrupted()) {
        return Err(Error::AlreadyCorrupted);
    }
    Ok(())
}

/// Holds out, corrupts and trains. Divergence surfaces as `Error::Diverged`.
pub fn train_run(config: &RunConfig, split: &DataSplit) -> Result<TrainedRun> {
    check_data(config, split)?;
    let (clean, holdout) = split_holdout(
        &split.train,
        config.holdout_fraction,
        config.corruption_seed,
    )?;
    let (train_set, plan) = corrupt_labels(&clean, config.noise_ratio, config.corruption_seed)?;
    let (mut model, snapshot) = init_model(config.arch, config.train.init_seed)?;
    let history = train(
        &mut model,
        train_set.features(),
        train_set.labels(),
        &config.train,
    )?;
    Ok(TrainedRun {
        model,
        snapshot,
        train: train_set,
        plan,
        holdout,
        history,
    })
}

/// Every diagnostic of a finished run, measured against the clean test set
/// and the recovered training labels.
pub fn measure(run: &TrainedRun, test: Option<&LabeledDataset>) -> Result<RunMetrics> {
    let data = EvalData::new(&run.train, test)?;
    let eval = evaluate(&run.model, data)?;
    let layers = layer_diagnostics(&run.model, &run.snapshot, data)?;
    let rollback = run
        .holdout
        .as_ref()
        .map(|h| select_rollback(&run.model, &run.snapshot, h))
        .transpose()?;
    Ok(RunMetrics {
        final_epoch_loss: run.history.last().copied().unwrap_or(f64::NAN),
        train_loss: eval.train_loss,
        train_accuracy: eval.train_accuracy,
        test_loss: eval.test_loss,
        test_accuracy: eval.test_accuracy,
        generalization_gap: eval.get(crate::diagnostics::MetricKind::GeneralizationGap),
        resilience: eval.resilience,
        utilization: layers.utilization,
        contribution: layers.contribution,
        rollback,
    })
}

/// One complete run. Divergence becomes a failed record; bad inputs are errors.
pub fn run_single(config: &RunConfig, split: &DataSplit) -> Result<RunRecord> {
    run_single_with_checkpoint(config, split, None)
}

/// Like [`run_single`], additionally saving the trained model and its
/// snapshot to `checkpoint` when training completes.
pub fn run_single_with_checkpoint(
    config: &RunConfig,
    split: &DataSplit,
    checkpoint: Option<&Path>,
) -> Result<RunRecord> {
    let start = Instant::now();
    check_data(config, split)?;
    // the plan is cheap to recompute and gives effective_noise even when training fails
    let (clean, _) = split_holdout(
        &split.train,
        config.holdout_fraction,
        config.corruption_seed,
    )?;
    let (_, plan) = corrupt_labels(&clean, config.noise_ratio, config.corruption_seed)?;
    let outcome = match train_run(config, split) {
        Ok(run) => {
            if let Some(path) = checkpoint {
                save_checkpoint(&run.model, &run.snapshot, path)?;
            }
            let metrics = measure(&run, split.test.as_ref())?;
            if metrics.is_finite() {
                RunOutcome::Completed { metrics }
            } else {
                RunOutcome::Diverged {
                    epoch: config.train.epochs,
                    reason: "non-finite diagnostics".into(),
                }
            }
        }
        Err(Error::Diverged { epoch, reason }) => {
            log::warn!(
                "run width={} ratio={} seed={} diverged at epoch {epoch}: {reason}",
                config.width(),
                config.noise_ratio,
                config.seed_index
            );
            RunOutcome::Diverged { epoch, reason }
        }
        Err(e) => return Err(e),
    };
    Ok(RunRecord {
        v: RECORD_VERSION,
        config: config.clone(),
        outcome,
        effective_noise: plan.effective_noise,
        wall_time_s: start.elapsed().as_secs_f64(),
        toolkit_version: TOOLKIT_VERSION.into(),
    })
}

/// Re-runs a record's config from scratch, loading its dataset from the echo.
pub fn rerun(config: &RunConfig) -> Result<RunRecord> {
    run_single(config, &config.dataset.load()?)
}
