//! Command-line front end. `main.rs` only sets up logging and calls [`run`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{corrupt_labels, load_dataset, save_dataset, CacheMeta};
use crate::diagnostics::{evaluate, layer_diagnostics, EvalData, MetricKind};
use crate::error::{Error, Result};
use crate::experiment::{run_sweep, DataSplit, DatasetSpec, RunTemplate, SweepGrid, SweepOptions};
use crate::nn::{average_loss, load_checkpoint, save_checkpoint};
use crate::report::{build_figure_from, write_figure, FigureKind};
use crate::rollback::{rollback_last_k, select_rollback};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "layerlens",
    version,
    about = "Layer-wise diagnostics for classifiers trained under label noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load or generate a dataset and write it as a cache file.
    Prepare(PrepareArgs),
    /// Train every (width, noise ratio, seed) grid point and write run records.
    Sweep(SweepArgs),
    /// Measure utilization, contribution and losses of a saved checkpoint.
    Diagnose(DiagnoseArgs),
    /// Restore the last k layers of a checkpoint to their initial values.
    Rollback(RollbackArgs),
    /// Render figure CSV and SVG files from a records file.
    Report(ReportArgs),
}

/// Where data comes from. Exactly one source may be given.
#[derive(Debug, Clone, Args, Default)]
pub struct DataArgs {
    /// Generate Gaussian blobs.
    #[arg(long)]
    pub synth: bool,
    /// Training samples for --synth.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Test samples for --synth (0 for none).
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    /// Feature dimension for --synth.
    #[arg(long, default_value_t = 20)]
    pub d: usize,
    /// Classes for --synth.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Distance between blob centres for --synth.
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    /// Data seed for --synth.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// MNIST IDX training images and labels (.gz accepted).
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"])]
    pub mnist: Option<Vec<PathBuf>>,
    /// MNIST IDX test images and labels.
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"])]
    pub mnist_test: Option<Vec<PathBuf>>,
    /// CIFAR-10 binary training batches.
    #[arg(long, num_args = 1..)]
    pub cifar: Option<Vec<PathBuf>>,
    /// CIFAR-10 binary test batches.
    #[arg(long, num_args = 1..)]
    pub cifar_test: Option<Vec<PathBuf>>,
    /// Training dataset cache written by `prepare`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Test dataset cache.
    #[arg(long)]
    pub test_cache: Option<PathBuf>,
    /// Keep only the first N training samples of MNIST or CIFAR-10.
    #[arg(long)]
    pub subset: Option<usize>,
}

impl DataArgs {
    pub fn is_given(&self) -> bool {
        self.synth || self.mnist.is_some() || self.cifar.is_some() || self.cache.is_some()
    }

    pub fn spec(&self) -> Result<DatasetSpec> {
        let sources = [
            self.synth,
            self.mnist.is_some(),
            self.cifar.is_some(),
            self.cache.is_some(),
        ];
        match sources.iter().filter(|&&s| s).count() {
            0 => {
                return Err(Error::InvalidConfig(
                    "no dataset given (use --synth, --mnist, --cifar or --cache)".into(),
                ))
            }
            1 => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "give only one of --synth, --mnist, --cifar, --cache".into(),
                ))
            }
        }
        if self.synth {
            return Ok(DatasetSpec::Synth {
                n_train: self.n,
                n_test: self.n_test,
                d: self.d,
                k: self.k,
                separation: self.separation,
                seed: self.seed,
            });
        }
        if let Some(m) = &self.mnist {
            let (ti, tl) = match &self.mnist_test {
                Some(t) => (Some(t[0].clone()), Some(t[1].clone())),
                None => (None, None),
            };
            return Ok(DatasetSpec::Mnist {
                train_images: m[0].clone(),
                train_labels: m[1].clone(),
                test_images: ti,
                test_labels: tl,
                subset: self.subset,
            });
        }
        if let Some(c) = &self.cifar {
            return Ok(DatasetSpec::Cifar10 {
                train_batches: c.clone(),
                test_batches: self.cifar_test.clone().unwrap_or_default(),
                subset: self.subset,
            });
        }
        Ok(DatasetSpec::Cache {
            train: self.cache.clone().expect("one source given"),
            test: self.test_cache.clone(),
        })
    }
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Shuffle this fraction of training labels before writing.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub corruption_seed: u64,
    /// Training cache to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Test cache to write, when the source has a test split.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON grid file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated hidden widths.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Comma-separated noise ratios.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// Number of seeds per grid point (indices 0..N).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fraction of clean training data held out for rollback selection (default 0.1, 0 disables).
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    #[arg(long, env = "LAYERLENS_SEED")]
    pub master_seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Continue an interrupted sweep from its journal.
    #[arg(long)]
    pub resume: bool,
    /// Save every trained model here.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop after this many new runs (for testing interruption).
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub checkpoint: PathBuf,
    /// The training data (possibly a corrupted cache) and optional test data.
    #[command(flatten)]
    pub data: DataArgs,
    /// Shuffle this fraction of training labels before measuring.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub corruption_seed: u64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RollbackArgs {
    pub checkpoint: PathBuf,
    /// Layers to restore, or `auto` to pick the best on the holdout set.
    #[arg(long, default_value = "auto")]
    pub k: String,
    /// Dataset cache of clean holdout samples (write one with `prepare`).
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub records: PathBuf,
    /// fig1..fig5, or all.
    #[arg(long, default_value = "all")]
    pub figure: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::IncompleteGrid { .. } => EXIT_INCOMPLETE,
        Error::Diverged { .. } => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

/// Parses arguments and runs a command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::IncompleteGrid { missing } = &e {
                for (w, r, s) in missing {
                    eprintln!("  missing width={w} ratio={r} seed={s}");
                }
            }
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Prepare(a) => prepare(a),
        Command::Sweep(a) => sweep(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Rollback(a) => rollback(a),
        Command::Report(a) => report(a),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn prepare(a: PrepareArgs) -> Result<i32> {
    let split = a.data.spec()?.load()?;
    let (train, meta) = match a.noise {
        Some(p) => {
            let (c, _) = corrupt_labels(&split.train, p, a.corruption_seed)?;
            (
                c,
                CacheMeta {
                    noise_ratio: Some(p),
                    seed: Some(a.corruption_seed),
                },
            )
        }
        None => (split.train, CacheMeta::default()),
    };
    save_dataset(&train, meta, &a.out)?;
    log::info!("wrote {} samples to {}", train.len(), a.out.display());
    match (&split.test, &a.test_out) {
        (Some(t), Some(p)) => {
            save_dataset(t, CacheMeta::default(), p)?;
            log::info!("wrote {} test samples to {}", t.len(), p.display());
        }
        (Some(_), None) => log::warn!("source has a test split; pass --test-out to save it"),
        (None, Some(_)) => {
            return Err(Error::InvalidConfig(
                "--test-out given but the source has no test split".into(),
            ))
        }
        (None, None) => {}
    }
    Ok(EXIT_OK)
}

/// Defaults, then the config file, then flags.
pub fn merge_grid(a: &SweepArgs) -> Result<SweepGrid> {
    let mut grid = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SweepGrid>(&text)?
        }
        None => {
            let t = crate::nn::TrainConfig::default();
            SweepGrid {
                widths: SweepGrid::DEFAULT_WIDTHS.to_vec(),
                noise_ratios: SweepGrid::DEFAULT_RATIOS.to_vec(),
                seeds: (0..SweepGrid::DEFAULT_SEEDS as u64).collect(),
                template: RunTemplate {
                    depth: 5,
                    learning_rate: t.learning_rate,
                    epochs: t.epochs,
                    batch_size: t.batch_size,
                    holdout_fraction: RunTemplate::DEFAULT_HOLDOUT_FRACTION,
                    master_seed: 0,
                    dataset: DatasetSpec::Cache {
                        train: PathBuf::new(),
                        test: None,
                    },
                },
            }
        }
    };
    if a.data.is_given() {
        grid.template.dataset = a.data.spec()?;
    } else if a.config.is_none() {
        a.data.spec()?;
    }
    if let Some(w) = &a.widths {
        grid.widths = w.clone();
    }
    if let Some(r) = &a.ratios {
        grid.noise_ratios = r.clone();
    }
    if let Some(s) = a.seeds {
        grid.seeds = (0..s).collect();
    }
    let t = &mut grid.template;
    if let Some(v) = a.depth {
        t.depth = v;
    }
    if let Some(v) = a.lr {
        t.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.holdout_fraction {
        t.holdout_fraction = v;
    }
    if let Some(v) = a.master_seed {
        t.master_seed = v;
    }
    grid.validate()?;
    Ok(grid)
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let grid = merge_grid(&a)?;
    let split = grid.template.dataset.load()?;
    let grid_path = {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".grid.json");
        PathBuf::from(s)
    };
    std::fs::write(&grid_path, serde_json::to_string_pretty(&grid)? + "\n")
        .map_err(|e| Error::io(&grid_path, e))?;
    log::info!(
        "sweep of {} runs ({} widths x {} ratios x {} seeds), {} jobs",
        grid.len(),
        grid.widths.len(),
        grid.noise_ratios.len(),
        grid.seeds.len(),
        a.jobs
    );
    let res = run_sweep(
        &grid,
        &split,
        &SweepOptions {
            jobs: a.jobs,
            out: Some(a.out.clone()),
            resume: a.resume,
            checkpoint_dir: a.checkpoint_dir.clone(),
            stop_after: a.stop_after,
        },
    )?;
    if !res.is_complete() {
        eprintln!(
            "sweep stopped with {} runs pending; rerun with --resume",
            res.pending.len()
        );
        return Ok(EXIT_INCOMPLETE);
    }
    let failed = res.records.iter().filter(|r| r.metrics().is_none()).count();
    if failed > 0 {
        log::warn!("{failed} runs diverged; see their records");
    }
    log::info!("wrote {} records to {}", res.records.len(), a.out.display());
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    checkpoint: PathBuf,
    dataset: String,
    depth: usize,
    train_loss: f64,
    train_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    resilience: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generalization_gap: Option<f64>,
    utilization: Vec<f64>,
    contribution: BTreeMap<MetricKind, Vec<f64>>,
}

fn load_split(data: &DataArgs) -> Result<DataSplit> {
    data.spec()?.load()
}

fn diagnose(a: DiagnoseArgs) -> Result<i32> {
    let (model, snapshot) = load_checkpoint(&a.checkpoint)?;
    let split = load_split(&a.data)?;
    let train = match a.noise {
        Some(p) => corrupt_labels(&split.train, p, a.corruption_seed)?.0,
        None => split.train,
    };
    let data = EvalData::new(&train, split.test.as_ref())?;
    let eval = evaluate(&model, data)?;
    let mut layers = layer_diagnostics(&model, &snapshot, data)?;
    let corrupted = train.is_corrupted();
    if !corrupted {
        log::warn!(
            "training data is not corrupted; resilience omitted (use a corrupted cache or --noise)"
        );
        layers.contribution.remove(&MetricKind::Resilience);
    }
    let report = DiagnoseReport {
        checkpoint: a.checkpoint.clone(),
        dataset: train.name().to_string(),
        depth: model.depth(),
        train_loss: eval.train_loss,
        train_accuracy: eval.train_accuracy,
        resilience: corrupted.then_some(eval.resilience),
        test_loss: eval.test_loss,
        test_accuracy: eval.test_accuracy,
        generalization_gap: eval.get(MetricKind::GeneralizationGap),
        utilization: layers.utilization,
        contribution: layers.contribution,
    };
    write_out(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct RollbackReport {
    k: usize,
    depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_losses: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_loss: Option<f64>,
    out: PathBuf,
}

fn rollback(a: RollbackArgs) -> Result<i32> {
    let (model, snapshot) = load_checkpoint(&a.checkpoint)?;
    let holdout = a
        .holdout
        .as_ref()
        .map(|p| load_dataset(p).map(|(d, _)| d))
        .transpose()?;
    let report = if a.k == "auto" {
        let h = holdout.ok_or_else(|| Error::InvalidConfig("--k auto needs --holdout".into()))?;
        let sel = select_rollback(&model, &snapshot, &h)?;
        RollbackReport {
            k: sel.k,
            depth: model.depth(),
            holdout_loss: Some(sel.best_loss()),
            holdout_losses: Some(sel.holdout_losses),
            out: a.out.clone(),
        }
    } else {
        let k: usize = a.k.parse().map_err(|_| {
            Error::InvalidConfig(format!(
                "--k must be `auto` or a layer count, got {:?}",
                a.k
            ))
        })?;
        let rolled = rollback_last_k(&model, &snapshot, k)?;
        let holdout_loss = holdout
            .map(|h| average_loss(&rolled, h.features(), h.labels()).map(|(l, _)| l))
            .transpose()?;
        RollbackReport {
            k,
            depth: model.depth(),
            holdout_losses: None,
            holdout_loss,
            out: a.out.clone(),
        }
    };
    let rolled = rollback_last_k(&model, &snapshot, report.k)?;
    save_checkpoint(&rolled, &snapshot, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(EXIT_OK)
}

fn report(a: ReportArgs) -> Result<i32> {
    let records = crate::experiment::load_records(&a.records)?;
    let kinds: Vec<FigureKind> = if a.figure == "all" {
        FigureKind::ALL.to_vec()
    } else {
        vec![a.figure.parse()?]
    };
    let agg = crate::experiment::aggregate(&records)?;
    for kind in kinds {
        let fig = build_figure_from(kind, &agg, &records)?;
        let (csv, svg) = write_figure(&fig, &a.out)?;
        log::info!("wrote {} and {}", csv.display(), svg.display());
    }
    Ok(EXIT_OK)
}
