use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use layerlens::experiment::{journal_path, load_records, RunRecord};
use layerlens::nn::load_checkpoint;

const SYNTH: [&str; 11] = [
    "--synth",
    "--n",
    "120",
    "--n-test",
    "60",
    "--d",
    "4",
    "--k",
    "3",
    "--separation",
    "2.0",
];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_layerlens"));
    c.env("RUST_LOG", "warn").env_remove("LAYERLENS_SEED");
    c
}

fn run<S: AsRef<std::ffi::OsStr> + std::fmt::Debug>(args: &[S]) -> Output {
    bin().args(args).output().expect("spawn layerlens")
}

fn ok<S: AsRef<std::ffi::OsStr> + std::fmt::Debug>(args: &[S]) -> Output {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Sweep invocation over a 3x2x2 grid; `overrides` replace default flag values
/// and `extra` flags are appended.
fn sweep_args(out: &str, overrides: &[(&str, &str)], extra: &[&str]) -> Vec<String> {
    let mut flags: Vec<(&str, &str)> = vec![
        ("--n", "120"),
        ("--n-test", "60"),
        ("--d", "4"),
        ("--k", "3"),
        ("--separation", "2.0"),
        ("--widths", "2,4,8"),
        ("--ratios", "0,0.2"),
        ("--seeds", "2"),
        ("--depth", "3"),
        ("--epochs", "5"),
        ("--lr", "0.1"),
        ("--batch-size", "16"),
        ("--out", out),
    ];
    for &(k, v) in overrides {
        match flags.iter_mut().find(|(f, _)| *f == k) {
            Some(slot) => slot.1 = v,
            None => flags.push((k, v)),
        }
    }
    let mut v = vec!["sweep".to_string(), "--synth".to_string()];
    for (k, val) in flags {
        v.push(k.to_string());
        v.push(val.to_string());
    }
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn stripped(path: &Path) -> Vec<RunRecord> {
    load_records(path)
        .unwrap()
        .iter()
        .map(RunRecord::without_wall_time)
        .collect()
}

#[test]
fn prepare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.llds"), dir.path().join("b.llds"));
    let at = dir.path().join("a-test.llds");
    for out in [&a, &b] {
        let mut args = vec!["prepare"];
        args.extend(SYNTH);
        args.extend([
            "--noise",
            "0.3",
            "--corruption-seed",
            "4",
            "--out",
            p(out),
            "--test-out",
            p(&at),
        ]);
        ok(&args);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (train, meta) = layerlens::data::load_dataset(&a).unwrap();
    assert_eq!(train.len(), 120);
    assert!(train.is_corrupted());
    assert_eq!(meta.noise_ratio, Some(0.3));
    let (test, _) = layerlens::data::load_dataset(&at).unwrap();
    assert_eq!(test.len(), 60);
    assert!(!test.is_corrupted());
}

#[test]
fn missing_input_file_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.llds");
    let r = run(&[
        "prepare",
        "--mnist",
        "/no/such/images",
        "/no/such/labels",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("/no/such/images"));
    assert_eq!(run(&["sweep", "--bogus"]).status.code(), Some(2));
}

#[test]
fn sweep_is_reproducible_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    ok(&sweep_args(p(&a), &[("--jobs", "3")], &[]));
    ok(&sweep_args(p(&b), &[("--jobs", "1")], &[]));
    assert_eq!(stripped(&a), stripped(&b));
    assert_eq!(stripped(&a).len(), 12);

    let figs = dir.path().join("figs");
    ok(&["report", p(&a), "--out", p(&figs)]);
    for n in 1..=5 {
        for ext in ["csv", "svg"] {
            let f = figs.join(format!("fig{n}.{ext}"));
            assert!(f.metadata().unwrap().len() > 0, "{}", f.display());
        }
    }
    assert_eq!(
        run(&["report", p(&a), "--figure", "fig9", "--out", p(&figs)])
            .status
            .code(),
        Some(2)
    );

    // drop one record: the grid is incomplete
    let text = std::fs::read_to_string(&a).unwrap();
    let short = dir.path().join("short.jsonl");
    std::fs::write(
        &short,
        text.lines()
            .skip(1)
            .map(|l| format!("{l}\n"))
            .collect::<String>(),
    )
    .unwrap();
    let r = run(&["report", p(&short), "--out", p(&figs)]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn master_seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a.jsonl"),
        dir.path().join("b.jsonl"),
        dir.path().join("c.jsonl"),
    );
    let small = [("--widths", "2"), ("--ratios", "0"), ("--seeds", "1")];
    let status = |out: &Path, env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(sweep_args(p(out), &small, &[]));
        if let Some(v) = env {
            cmd.env("LAYERLENS_SEED", v);
        }
        cmd.output().unwrap().status.code()
    };
    assert_eq!(status(&a, Some("9")), Some(0));
    let mut cmd = bin();
    cmd.args(sweep_args(
        p(&b),
        &[small.as_slice(), &[("--master-seed", "9")]].concat(),
        &[],
    ));
    assert_eq!(cmd.output().unwrap().status.code(), Some(0));
    assert_eq!(status(&c, None), Some(0));
    assert_eq!(stripped(&a), stripped(&b));
    assert_ne!(stripped(&a), stripped(&c));
}

#[test]
fn killed_sweep_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.jsonl");
    let heavy = [
        ("--epochs", "150"),
        ("--n", "400"),
        ("--widths", "4,8,16"),
        ("--ratios", "0,0.2,0.4"),
    ];
    let mut child = bin()
        .args(sweep_args(p(&out), &heavy, &["--jobs", "1"]))
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let journal = journal_path(&out);
    let deadline = Instant::now() + Duration::from_secs(120);
    while std::fs::read_to_string(&journal).map_or(0, |t| t.lines().count()) < 2 {
        assert!(Instant::now() < deadline, "sweep made no progress");
        assert!(
            child.try_wait().unwrap().is_none(),
            "sweep finished before it could be killed"
        );
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(!out.exists());

    let resumed = bin()
        .args(sweep_args(p(&out), &heavy, &["--jobs", "2", "--resume"]))
        .output()
        .unwrap();
    assert_eq!(
        resumed.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&resumed.stderr)
    );
    let clean = dir.path().join("clean.jsonl");
    ok(&sweep_args(p(&clean), &heavy, &["--jobs", "4"]));
    assert_eq!(stripped(&out), stripped(&clean));
    assert_eq!(stripped(&out).len(), 18);
}

#[test]
fn stopped_sweep_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    let r = run(&sweep_args(p(&out), &[], &["--stop-after", "2"]));
    assert_eq!(r.status.code(), Some(3));
    ok(&sweep_args(p(&out), &[], &["--resume"]));
    assert_eq!(stripped(&out).len(), 12);
}

fn checkpoints(dir: &Path, lr: &str) -> PathBuf {
    let out = dir.join(format!("lr{lr}.jsonl"));
    let ck = dir.join(format!("ck{lr}"));
    ok(&sweep_args(
        p(&out),
        &[("--lr", lr), ("--widths", "4"), ("--seeds", "1")],
        &["--checkpoint-dir", p(&ck)],
    ));
    ck.join("w4_r0.2_s0.llns")
}

#[test]
fn diagnose_untrained_checkpoint_reports_zero_utilization() {
    let dir = tempfile::tempdir().unwrap();
    let ck = checkpoints(dir.path(), "0");
    let mut args = vec!["diagnose", p(&ck)];
    args.extend(SYNTH);
    args.extend(["--noise", "0.2"]);
    let out = ok(&args);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let util = v["utilization"].as_array().unwrap();
    assert_eq!(util.len(), 3);
    assert!(util.iter().all(|u| u.as_f64() == Some(0.0)));
    for series in v["contribution"].as_object().unwrap().values() {
        assert!(series
            .as_array()
            .unwrap()
            .iter()
            .all(|c| c.as_f64() == Some(0.0)));
    }
    assert!(v["resilience"].is_number());

    // clean data: resilience is not reported
    let mut clean = vec!["diagnose", p(&ck)];
    clean.extend(SYNTH);
    let v: serde_json::Value = serde_json::from_slice(&ok(&clean).stdout).unwrap();
    assert!(v.get("resilience").is_none_or(|r| r.is_null()));
    assert!(v["contribution"].get("resilience").is_none());
}

#[test]
fn rollback_boundaries_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let ck = checkpoints(dir.path(), "0.1");
    let (model, snap) = load_checkpoint(&ck).unwrap();

    let k0 = dir.path().join("k0.llns");
    ok(&["rollback", p(&ck), "--k", "0", "--out", p(&k0)]);
    assert_eq!(std::fs::read(&k0).unwrap(), std::fs::read(&ck).unwrap());

    let kd = dir.path().join("kd.llns");
    ok(&["rollback", p(&ck), "--k", "3", "--out", p(&kd)]);
    let (rolled, snap2) = load_checkpoint(&kd).unwrap();
    assert_eq!(rolled, snap.to_model());
    assert_eq!(snap2, snap);
    assert_ne!(rolled, model);

    assert_eq!(
        run(&["rollback", p(&ck), "--k", "4", "--out", p(&kd)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["rollback", p(&ck), "--out", p(&kd)]).status.code(),
        Some(2)
    );

    let holdout = dir.path().join("h.llds");
    let mut prep = vec!["prepare"];
    prep.extend(SYNTH);
    prep.extend(["--seed", "77", "--out", p(&holdout)]);
    ok(&prep);
    let auto = dir.path().join("auto.llns");
    let out = ok(&[
        "rollback",
        p(&ck),
        "--holdout",
        p(&holdout),
        "--out",
        p(&auto),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let losses: Vec<f64> = v["holdout_losses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(losses.len(), 4);
    let k = v["k"].as_u64().unwrap() as usize;
    assert!(losses.iter().all(|&l| l >= losses[k]));
}
