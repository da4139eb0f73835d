//! Sweeps over width x noise ratio x seed, and the records they produce.

mod aggregate;
mod config;
mod record;
mod run;
mod sweep;

pub use aggregate::{aggregate, Aggregate, CellSummary, Stats};
pub use config::{
    derive_seeds, DataSplit, DatasetSpec, DerivedSeeds, RunConfig, RunKey, RunTemplate, SweepGrid,
};
pub use record::{
    load_records, save_records, sort_canonical, write_records, RunMetrics, RunOutcome, RunRecord,
    RECORD_VERSION, TOOLKIT_VERSION,
};
pub use run::{
    measure, rerun, run_single, run_single_with_checkpoint, split_holdout, train_run, TrainedRun,
};
pub use sweep::{
    checkpoint_name, journal_path, load_resumable, partial_path, run_sweep, SweepOptions,
    SweepResult,
};
