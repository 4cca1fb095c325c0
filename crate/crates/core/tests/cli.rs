use std::path::Path;
use std::process::Command;

use rsbb::cli::RunResult;
use rsbb::rsbb::Termination;
use rsbb::trace::{ConvergenceTrace, CSV_HEADER};

fn rsbb_cmd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rsbb"));
    c.env("RSBB_DATA_DIR", Path::new(env!("CARGO_MANIFEST_DIR")).join("data"));
    c
}

fn tmp(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("rsbb-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn solve_toy_writes_result_and_trace() {
    let out = tmp("toy");
    let status = rsbb_cmd()
        .args(["solve", "--instance", "toy", "--set", "box", "--size", "1.0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let json = std::fs::read_to_string(out.join("toy_rsbb_box_1.json")).unwrap();
    let r: RunResult = serde_json::from_str(&json).unwrap();
    assert_eq!(r.termination, Termination::Optimal);
    assert!((r.objective.unwrap() + 0.36).abs() < 5e-3);
    let text = std::fs::read_to_string(out.join("toy_rsbb_box_1.trace.csv")).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    let trace = ConvergenceTrace::read_csv(text.as_bytes()).unwrap();
    assert!(!trace.is_empty());
    trace.check_monotone(1e-9).unwrap();
    assert_eq!(trace.to_csv_string(), text);
}

#[test]
fn exit_codes() {
    let out = tmp("codes");
    let code = |args: &[&str]| {
        rsbb_cmd().args(args).arg("--out").arg(&out).output().unwrap().status.code()
    };
    assert_eq!(code(&["solve", "--instance", "nope"]), Some(1));
    assert_eq!(code(&["solve", "--instance", "toy", "--set", "hexagon"]), Some(1));
    assert_eq!(code(&["solve", "--instance", "toy", "--size=-1"]), Some(1));
    assert_eq!(code(&["solve", "--instance", "haverly3", "--max-nodes", "2", "--set", "polyhedral", "--size", "0.25"]), Some(2));
}

#[test]
fn sweep_writes_tables() {
    let out = tmp("sweep");
    let o = rsbb_cmd()
        .args(["sweep", "--instance", "toy", "--set", "box,polyhedral", "--size", "0.5,1.0", "--jobs", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    // Two kinds, three sizes each including the baseline, plus the header.
    assert_eq!(sweep.lines().count(), 7);
    let inc = std::fs::read_to_string(out.join("objective_increase.csv")).unwrap();
    assert!(inc.starts_with("instance,box_0,box_0.5,box_1,polyhedral_0"));
    assert!(out.join("nodes.csv").is_file());
}
