use std::path::Path;
use std::process::{Command, Output};

fn fairgram(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairgram")).arg("--out").arg(out).args(args).output().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fairgram(dir.path(), &["plan", "--bogus"]).status.code(), Some(2));
    assert_eq!(fairgram(dir.path(), &["eval", "--setting", "nope"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairgram(dir.path(), &["verify-balance"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn strict_balance_and_audit_fail_on_tampered_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(fairgram(out, &["run"]).status.success());
    assert!(fairgram(out, &["verify-balance", "--strict", "--plan"]).status.success());

    let dataset = out.join("dataset.jsonl");
    let mut rows = lines(&dataset);
    rows.remove(0);
    std::fs::write(&dataset, rows.join("\n") + "\n").unwrap();
    assert_eq!(fairgram(out, &["verify-balance", "--strict"]).status.code(), Some(1));
    assert!(fairgram(out, &["verify-balance"]).status.success());

    assert!(fairgram(out, &["bench", "audit"]).status.success());
    let bench = out.join("bench.jsonl");
    let mut rows = lines(&bench);
    rows.push(lines(&out.join("train.jsonl"))[0].clone());
    std::fs::write(&bench, rows.join("\n") + "\n").unwrap();
    let audit = fairgram(out, &["bench", "audit"]);
    assert_eq!(audit.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&audit.stdout).contains("not disjoint"));
}

#[test]
fn gold_predictions_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(fairgram(out, &["run"]).status.success());
    let bench = out.join("bench.jsonl");
    let bench = bench.to_str().unwrap();
    assert!(fairgram(out, &["predict", "--gold", bench, "--baseline", "gold"]).status.success());
    let preds = out.join("predictions.jsonl");
    let eval = fairgram(out, &["eval", "--setting", "icsf", "--gold", bench, "--predictions", preds.to_str().unwrap()]);
    assert!(eval.status.success());
    let stdout = String::from_utf8_lossy(&eval.stdout);
    let overall = stdout.lines().find(|l| l.starts_with("overall")).unwrap();
    assert_eq!(overall.split_whitespace().skip(2).collect::<Vec<_>>(), ["100.00"; 3]);
    let report = fairgram(out, &["report"]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("8-9B"));
}

#[test]
fn remote_backend_without_endpoint_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(fairgram(out, &["build"]).status.success());
    let r = fairgram(out, &["realize", "--backend", "remote"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("realize.http"));
}
