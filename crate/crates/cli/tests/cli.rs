//! End-to-end runs of the `assist` binary.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn assist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_assist"))
        .args(args)
        .output()
        .expect("spawn assist")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not a summary ({e}):\n{}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_session_directory() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = data("scenario.json");
    let out = assist(&["run", "--scenario", path(&scenario), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["success"], true);
    assert_eq!(s["sequence"], "1-2-3-4-5-6-7-8-9");
    assert_eq!(s["deliveries"], 7);
    for i in 1..=7 {
        assert!(dir.path().join(format!("det_{i:03}.txt")).exists(), "det_{i:03}.txt");
    }
    let result: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(result["success"], true);
    assert!(dir.path().join("session.jsonl").exists());
}

#[test]
fn record_then_replay_matches() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("fixture.jsonl");
    let scenario = data("scenario.json");
    let recorded = assist(&["run", "--scenario", path(&scenario), "--operator", "random:5", "--record", path(&fixture)]);
    assert_eq!(recorded.status.code(), Some(0), "{}", String::from_utf8_lossy(&recorded.stderr));
    let replayed = assist(&[
        "run", "--scenario", path(&scenario), "--operator", "random:5",
        "--detector", "replay", "--replay-fixture", path(&fixture),
    ]);
    assert_eq!(replayed.status.code(), Some(0), "{}", String::from_utf8_lossy(&replayed.stderr));
    assert_eq!(summary(&recorded), summary(&replayed));
}

#[test]
fn resume_continues_interrupted_session() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = data("scenario.json");
    let full = assist(&["run", "--scenario", path(&scenario), "--out", path(dir.path())]);
    assert_eq!(full.status.code(), Some(0));

    let log = dir.path().join("session.jsonl");
    let kept: String = std::fs::read_to_string(&log).unwrap().lines().take(4).map(|l| format!("{l}\n")).collect();
    std::fs::write(&log, kept).unwrap();

    let resumed = assist(&["run", "--scenario", path(&scenario), "--out", path(dir.path()), "--resume"]);
    assert_eq!(resumed.status.code(), Some(0), "{}", String::from_utf8_lossy(&resumed.stderr));
    assert_eq!(summary(&resumed)["sequence"], summary(&full)["sequence"]);
    assert_eq!(summary(&resumed)["deliveries"], 7);

    // A finished session cannot be resumed again.
    let again = assist(&["run", "--scenario", path(&scenario), "--out", path(dir.path()), "--resume"]);
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn scripted_deviation_and_sticky_failure() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(&script, r#"[{"step": 5, "component": 8}]"#).unwrap();
    let scenario = data("scenario.json");
    let op = format!("script:{}", path(&script));
    let out = assist(&["run", "--scenario", path(&scenario), "--operator", &op]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&out)["sequence"], "1-2-3-4-8-5-6-7-9");

    let sticky = dir.path().join("sticky.json");
    std::fs::write(
        &sticky,
        r#"{"noise": {"rng_seed": 0, "components": {"7": {"fp_rate": 1.0, "fn_rate": 0.0, "persistence": "sticky"}}}}"#,
    )
    .unwrap();
    let out = assist(&["run", "--scenario", path(&sticky)]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["success"], false);
    assert_eq!(s["termination"], "deadlock");
}

#[test]
fn usage_errors_exit_64() {
    let scenario = data("scenario.json");
    let cases: [&[&str]; 4] = [
        &["run", "--scenario", path(&scenario), "--operator", "sometimes"],
        &["run", "--scenario", path(&scenario), "--operator", "console"],
        &["run", "--scenario", path(&scenario), "--detector", "replay"],
        &["run", "--scenario", "/nonexistent/scenario.json"],
    ];
    for args in cases {
        assert_eq!(assist(args).status.code(), Some(64), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let spec = data("experiments/e3.json");
    assert_eq!(assist(&["eval", "e1", "--spec", path(&spec), "--out", path(dir.path())]).status.code(), Some(64));
}

#[test]
fn eval_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = data("experiments/e2_table.json");
    let out = assist(&["eval", "e2", "--spec", path(&spec), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let md = std::fs::read_to_string(dir.path().join("e2.md")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), md);
    for order in ["1-2-3-4-8-5-6-7-9", "1-2-3-4-6-7-8-5-9", "1-2-3-4-8-6-5-7-9"] {
        assert!(md.contains(order), "{order} missing from\n{md}");
    }
    assert!(dir.path().join("e2.csv").exists());
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("e2.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);

    let pr = data("experiments/pr.json");
    let out = assist(&["eval", "pr", "--spec", path(&pr), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("N/A"));
}

#[test]
fn run_against_remote_simulated_robot() {
    let mut server = Command::new(env!("CARGO_BIN_EXE_assist"))
        .args(["serve-robot", "--listen", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();

    let scenario = data("scenario.json");
    let out = assist(&["run", "--scenario", path(&scenario), "--robot", &addr]);
    server.kill().unwrap();
    server.wait().unwrap();
    // The remote robot keeps its own world: every job completes with 8 acks,
    // and the session sees all seven deliveries succeed.
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["deliveries"], 7);
    assert_eq!(s["sequence"], "1-2-3-4-5-6-7-8-9");
}
