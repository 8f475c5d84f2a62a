use std::path::Path;
use std::process::{Command, Output};

fn painmeter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_painmeter")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = painmeter(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = painmeter(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn runtime_failure_exits_one_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = painmeter(&["eval", "--data", s(&dir.path().join("missing")), "--checkpoint", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).lines().any(|l| l.starts_with("error: ")));
}

#[test]
fn synth_train_eval_consensus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d1");
    ok(&["synth", "--preset", "dataset1", "--out", s(&d)]);
    let csv = std::fs::read_dir(&d)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("rec"))
        .count();
    assert_eq!(csv, 4);
    assert!(d.join("manifest.txt").is_file());
    assert!(d.join("ground_truth.csv").is_file());

    let tr = dir.path().join("train");
    let out = painmeter(&[
        "train", "--data", s(&d), "--folds", "fivefold", "--fold", "1", "--seed", "3",
        "--set", "max_steps=4", "--set", "validation_every_steps=2", "--out", s(&tr),
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("config: seed=3"), "{stderr}");
    for f in ["config.txt", "files.txt", "folds.csv", "fold1/model.ckpt", "fold1/normalizer.csv", "fold1/train_report.txt"] {
        assert!(tr.join(f).is_file(), "missing {f}");
    }
    let config = std::fs::read_to_string(tr.join("config.txt")).unwrap();
    assert!(config.contains("max_steps=4"));

    let ev = dir.path().join("eval");
    let ckpt = tr.join("fold1/model.ckpt");
    let text = ok(&[
        "eval", "--data", s(&d), "--checkpoint", s(&ckpt), "--plan", s(&tr.join("folds.csv")),
        "--fold", "1", "--consensus", "10", "--out", s(&ev),
    ]);
    assert!(text.contains("consensus_accuracy"));
    assert!(text.contains("consensus_k\t10"));
    assert!(ev.join("metrics.txt").is_file());

    let cs = dir.path().join("cons");
    let curve = ok(&[
        "consensus", "--data", s(&d), "--checkpoint", s(&ckpt), "--k", "1,3,9",
        "--granularity", "recording", "--out", s(&cs),
    ]);
    let rows: Vec<&str> = curve.lines().collect();
    assert_eq!(rows[0], "k\taccuracy");
    assert_eq!(rows.len(), 4);

    let bad = painmeter(&["consensus", "--data", s(&d), "--checkpoint", s(&ckpt), "--k", "5,2", "--out", s(&cs)]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn report_with_logistic_regression() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d1");
    ok(&["synth", "--preset", "dataset1", "--out", s(&d), "--recordings", "2"]);
    let out = dir.path().join("report");
    let text = ok(&["report", "--data", s(&d), "--models", "logistic", "--fold", "0", "--out", s(&out)]);
    assert!(text.starts_with("logistic: slice accuracy"));
    let summary = std::fs::read_to_string(out.join("summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(out.join("logistic/metrics.txt").is_file());
}
