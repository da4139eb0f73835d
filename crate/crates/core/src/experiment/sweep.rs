//! Grid execution with a bounded worker pool and a crash-resumable journal.
//!
//! Workers only compute; a single writer (the calling thread) appends each
//! finished record to `<out>.partial` and then its key to `<out>.journal`.
//! A key counts as done only when it appears in both, so a crash between
//! the two writes simply reruns that point.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use super::config::{DataSplit, RunConfig, RunKey, SweepGrid};
use super::record::{save_records, sort_canonical, RunRecord};
use super::run::run_single_with_checkpoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 is treated as 1.
    pub jobs: usize,
    /// Final sorted records file. Without it the sweep runs purely in memory.
    pub out: Option<PathBuf>,
    /// Keep results journaled by a previous, interrupted invocation.
    pub resume: bool,
    /// Save a checkpoint per completed run into this directory.
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop handing out work after this many new records (simulates an interrupt).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Canonically sorted.
    pub records: Vec<RunRecord>,
    /// Grid points not yet run.
    pub pending: Vec<RunKey>,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.pending.is_empty()
    }
}

pub fn partial_path(out: &Path) -> PathBuf {
    sibling(out, "partial")
}

pub fn journal_path(out: &Path) -> PathBuf {
    sibling(out, "journal")
}

fn sibling(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn checkpoint_name(key: &RunKey) -> String {
    format!("w{}_r{}_s{}.llns", key.width, key.noise_ratio, key.seed)
}

/// Parses a JSONL file, dropping a torn final line (one without its
/// newline). Any other unparsable line is an error.
fn read_jsonl<T>(path: &Path, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut out = Vec::new();
    for (no, line) in complete.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(line).map_err(|e| Error::Malformed {
            what: "sweep journal",
            reason: format!("{}:{}: {e}", path.display(), no + 1),
        })?);
    }
    Ok(out)
}

/// Records from an interrupted sweep that are safe to keep.
pub fn load_resumable(out: &Path) -> Result<Vec<RunRecord>> {
    let journaled: Vec<RunKey> = read_jsonl(&journal_path(out), |l| Ok(serde_json::from_str(l)?))?;
    let records = read_jsonl(&partial_path(out), RunRecord::from_json_line)?;
    let mut kept: Vec<RunRecord> = Vec::new();
    for r in records {
        let k = r.key();
        if journaled.iter().any(|j| j.same(&k)) && !kept.iter().any(|x| x.key().same(&k)) {
            kept.push(r);
        }
    }
    Ok(kept)
}

struct Writer {
    partial: File,
    journal: File,
    partial_path: PathBuf,
    journal_path: PathBuf,
}

impl Writer {
    /// Rewrites both files to hold exactly `kept`, dropping any torn tail.
    fn open(out: &Path, kept: &[RunRecord]) -> Result<Self> {
        let (pp, jp) = (partial_path(out), journal_path(out));
        let mut partial = File::create(&pp).map_err(|e| Error::io(&pp, e))?;
        let mut journal = File::create(&jp).map_err(|e| Error::io(&jp, e))?;
        for r in kept {
            writeln!(partial, "{}", r.to_json_line()?).map_err(|e| Error::io(&pp, e))?;
            writeln!(journal, "{}", serde_json::to_string(&r.key())?)
                .map_err(|e| Error::io(&jp, e))?;
        }
        partial.sync_data().map_err(|e| Error::io(&pp, e))?;
        journal.sync_data().map_err(|e| Error::io(&jp, e))?;
        let partial = OpenOptions::new()
            .append(true)
            .open(&pp)
            .map_err(|e| Error::io(&pp, e))?;
        let journal = OpenOptions::new()
            .append(true)
            .open(&jp)
            .map_err(|e| Error::io(&jp, e))?;
        Ok(Writer {
            partial,
            journal,
            partial_path: pp,
            journal_path: jp,
        })
    }

    fn append(&mut self, record: &RunRecord) -> Result<()> {
        let (pp, jp) = (&self.partial_path, &self.journal_path);
        writeln!(self.partial, "{}", record.to_json_line()?).map_err(|e| Error::io(pp, e))?;
        self.partial.sync_data().map_err(|e| Error::io(pp, e))?;
        writeln!(self.journal, "{}", serde_json::to_string(&record.key())?)
            .map_err(|e| Error::io(jp, e))?;
        self.journal.sync_data().map_err(|e| Error::io(jp, e))
    }
}

/// Runs every grid point not already done. The returned records (and the
/// final file) do not depend on `jobs` or on completion order.
pub fn run_sweep(
    grid: &SweepGrid,
    split: &DataSplit,
    options: &SweepOptions,
) -> Result<SweepResult> {
    let configs = grid.configs(split.train.dim(), split.train.class_count())?;
    let mut done: Vec<RunRecord> = Vec::new();
    if options.resume {
        let out = options
            .out
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("resume needs an output path".into()))?;
        done = load_resumable(out)?;
        // records from a different grid or template cannot be reused
        done.retain(|r| configs.iter().any(|c| c == &r.config));
        log::info!(
            "resuming: {} of {} runs already journaled",
            done.len(),
            configs.len()
        );
    }
    let done_keys: Vec<RunKey> = done.iter().map(RunRecord::key).collect();
    let todo: Vec<&RunConfig> = configs
        .iter()
        .filter(|c| !done_keys.iter().any(|k| k.same(&c.key())))
        .collect();

    let mut writer = match &options.out {
        Some(out) => Some(Writer::open(out, &done)?),
        None => None,
    };
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let jobs = options.jobs.max(1).min(todo.len().max(1));
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let mut finished: HashSet<usize> = HashSet::new();
    let mut first_error: Option<Error> = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<RunRecord>)>();
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, stop, todo) = (&next, &stop, &todo);
            let ckpt = options.checkpoint_dir.as_deref();
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = todo.get(i) else { break };
                let path = ckpt.map(|d| d.join(checkpoint_name(&cfg.key())));
                let res = run_single_with_checkpoint(cfg, split, path.as_deref());
                if tx.send((i, res)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, res) in rx {
            match res {
                Ok(rec) => {
                    // once stopped, late results are discarded as if the process had exited
                    if first_error.is_some() || stop.load(Ordering::SeqCst) {
                        continue;
                    }
                    let k = rec.key();
                    log::info!(
                        "finished width={} ratio={} seed={} in {:.1}s ({}/{})",
                        k.width,
                        k.noise_ratio,
                        k.seed,
                        rec.wall_time_s,
                        done.len() + 1,
                        configs.len()
                    );
                    if let Some(w) = writer.as_mut() {
                        if let Err(e) = w.append(&rec) {
                            first_error = Some(e);
                            stop.store(true, Ordering::SeqCst);
                            continue;
                        }
                    }
                    finished.insert(i);
                    done.push(rec);
                    if options.stop_after.is_some_and(|n| finished.len() >= n) {
                        stop.store(true, Ordering::SeqCst);
                    }
                }
                Err(e) => {
                    stop.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }

    sort_canonical(&mut done);
    let pending: Vec<RunKey> = todo
        .iter()
        .enumerate()
        .filter(|(i, _)| !finished.contains(i))
        .map(|(_, c)| c.key())
        .collect();
    if pending.is_empty() {
        if let Some(out) = &options.out {
            save_records(&done, out)?;
            drop(writer);
            for p in [partial_path(out), journal_path(out)] {
                std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    Ok(SweepResult {
        records: done,
        pending,
    })
}
