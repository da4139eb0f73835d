use std::path::Path;

use layerlens::experiment::{
    aggregate, journal_path, load_records, partial_path, run_sweep, DatasetSpec, RunRecord,
    RunTemplate, SweepGrid, SweepOptions, TOOLKIT_VERSION,
};
use layerlens::Error;

fn grid() -> SweepGrid {
    SweepGrid {
        widths: vec![2, 4, 8],
        noise_ratios: vec![0.0, 0.25],
        seeds: vec![0, 1],
        template: RunTemplate {
            depth: 3,
            learning_rate: 0.1,
            epochs: 4,
            batch_size: 16,
            holdout_fraction: 0.1,
            master_seed: 11,
            dataset: DatasetSpec::Synth {
                n_train: 80,
                n_test: 40,
                d: 4,
                k: 3,
                separation: 2.0,
                seed: 3,
            },
        },
    }
}

fn opts(jobs: usize, out: Option<&Path>) -> SweepOptions {
    SweepOptions {
        jobs,
        out: out.map(Path::to_path_buf),
        resume: false,
        checkpoint_dir: None,
        stop_after: None,
    }
}

fn strip(records: &[RunRecord]) -> Vec<RunRecord> {
    records.iter().map(RunRecord::without_wall_time).collect()
}

#[test]
fn sweep_produces_one_record_per_grid_point() {
    let g = grid();
    let split = g.template.dataset.load().unwrap();
    let res = run_sweep(&g, &split, &opts(2, None)).unwrap();
    assert!(res.is_complete());
    assert_eq!(res.records.len(), 12);
    let keys: Vec<_> = res.records.iter().map(|r| r.key().as_tuple()).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2)));
    assert_eq!(keys, sorted);
    for r in &res.records {
        assert_eq!(r.toolkit_version, TOOLKIT_VERSION);
        let m = r.metrics().expect("completed");
        assert_eq!(m.utilization.len(), 3);
        assert!(m.rollback.is_some());
        assert!(m.test_loss.is_some());
    }
    let agg = aggregate(&res.records).unwrap();
    assert_eq!(agg.widths, vec![2, 4, 8]);
    assert_eq!(agg.noise_ratios, vec![0.0, 0.25]);
    assert_eq!(agg.cell(1, 2).seeds, vec![0, 1]);
}

#[test]
fn records_do_not_depend_on_job_count() {
    let g = grid();
    let split = g.template.dataset.load().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let one = run_sweep(&g, &split, &opts(1, Some(&a))).unwrap();
    let eight = run_sweep(&g, &split, &opts(8, Some(&b))).unwrap();
    assert_eq!(strip(&one.records), strip(&eight.records));
    assert_eq!(
        strip(&load_records(&a).unwrap()),
        strip(&load_records(&b).unwrap())
    );
    assert!(!partial_path(&a).exists());
    assert!(!journal_path(&a).exists());
}

#[test]
fn interrupted_sweep_resumes_to_the_same_result() {
    let g = grid();
    let split = g.template.dataset.load().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let reference = run_sweep(&g, &split, &opts(3, None)).unwrap();

    let out = dir.path().join("r.jsonl");
    let first = run_sweep(
        &g,
        &split,
        &SweepOptions {
            stop_after: Some(5),
            ..opts(2, Some(&out))
        },
    )
    .unwrap();
    assert!(!first.is_complete());
    assert!(!out.exists());
    assert!(load_records(&out).is_err());
    let journaled = std::fs::read_to_string(journal_path(&out))
        .unwrap()
        .lines()
        .count();
    assert!(journaled >= 5, "{journaled}");
    assert_eq!(first.records.len() + first.pending.len(), 12);

    // A crash mid-write leaves a torn record line behind.
    let pp = partial_path(&out);
    let mut text = std::fs::read_to_string(&pp).unwrap();
    text.push_str("{\"v\":1,\"config\":{\"arch\"");
    std::fs::write(&pp, text).unwrap();

    let resumed = run_sweep(
        &g,
        &split,
        &SweepOptions {
            resume: true,
            ..opts(4, Some(&out))
        },
    )
    .unwrap();
    assert!(resumed.is_complete());
    assert_eq!(strip(&resumed.records), strip(&reference.records));
    assert_eq!(
        strip(&load_records(&out).unwrap()),
        strip(&reference.records)
    );
}

#[test]
fn journal_without_record_reruns_that_point() {
    let g = grid();
    let split = g.template.dataset.load().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("j.jsonl");
    run_sweep(
        &g,
        &split,
        &SweepOptions {
            stop_after: Some(3),
            ..opts(1, Some(&out))
        },
    )
    .unwrap();
    // keep the journal but lose the last record
    let pp = partial_path(&out);
    let text = std::fs::read_to_string(&pp).unwrap();
    let kept: Vec<&str> = text.lines().take(2).collect();
    std::fs::write(&pp, kept.join("\n") + "\n").unwrap();
    let resumed = run_sweep(
        &g,
        &split,
        &SweepOptions {
            resume: true,
            ..opts(2, Some(&out))
        },
    )
    .unwrap();
    assert_eq!(resumed.records.len(), 12);
}

#[test]
fn resume_ignores_records_from_another_grid() {
    let g = grid();
    let split = g.template.dataset.load().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let mut other = g.clone();
    other.template.learning_rate = 0.05;
    run_sweep(
        &other,
        &split,
        &SweepOptions {
            stop_after: Some(4),
            ..opts(1, Some(&out))
        },
    )
    .unwrap();
    let resumed = run_sweep(
        &g,
        &split,
        &SweepOptions {
            resume: true,
            ..opts(2, Some(&out))
        },
    )
    .unwrap();
    let reference = run_sweep(&g, &split, &opts(2, None)).unwrap();
    assert_eq!(strip(&resumed.records), strip(&reference.records));
}

#[test]
fn missing_grid_points_are_reported() {
    let g = grid();
    let split = g.template.dataset.load().unwrap();
    let res = run_sweep(&g, &split, &opts(2, None)).unwrap();
    let partial: Vec<RunRecord> = res
        .records
        .into_iter()
        .filter(|r| r.key().as_tuple() != (4, 0.25, 1))
        .collect();
    match aggregate(&partial) {
        Err(Error::IncompleteGrid { missing }) => assert_eq!(missing, vec![(4, 0.25, 1)]),
        other => panic!("expected an incomplete grid, got {other:?}"),
    }
}

#[test]
fn record_lines_round_trip() {
    let g = grid();
    let split = g.template.dataset.load().unwrap();
    let res = run_sweep(&g, &split, &opts(2, None)).unwrap();
    for r in &res.records {
        let line = r.to_json_line().unwrap();
        assert!(!line.contains('\n'));
        assert_eq!(&RunRecord::from_json_line(&line).unwrap(), r);
    }
    let bumped = res.records[0]
        .to_json_line()
        .unwrap()
        .replacen("\"v\":1", "\"v\":2", 1);
    assert!(RunRecord::from_json_line(&bumped).is_err());
}
