use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn detcp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_detcp"));
    c.env_remove("DETCP_IMBALANCE_MS");
    c
}

fn instance(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/instances")
        .join(format!("{name}.dfzn"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_queens4_first_spd() {
    let o = detcp()
        .arg("solve")
        .arg(instance("queens4"))
        .args(["--mode", "first", "--strategy", "spd", "--workers", "4"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    assert!(line.starts_with("SAT;;q0=1,q1=3,q2=0,q3=2;"), "{line}");
}

#[test]
fn missing_file_exits_3() {
    let o = detcp().args(["solve", "nosuch.dfzn"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn unsat_line() {
    let o = detcp()
        .arg("solve")
        .arg(instance("queens3_unsat"))
        .args(["--mode", "first"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "UNSAT;;;\n");
}

#[test]
fn parse_error_exits_3_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dfzn");
    std::fs::write(&bad, "var 0..3: x;\nsolve maximize y;\n").unwrap();
    let o = detcp().arg("solve").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":2:16: semantic error: unknown variable y"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(detcp().output().unwrap().status.code(), Some(2));
    assert_eq!(detcp().args(["solve", "x.dfzn", "--mode", "fast"]).output().unwrap().status.code(), Some(2));
    let o = detcp().args(["synth", "--shape", "best", "--depth", "31"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = detcp()
        .env("DETCP_IMBALANCE_MS", "soon")
        .args(["solve", "queens4"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn all_mode_prints_every_solution() {
    let o = detcp()
        .arg("solve")
        .arg(instance("queens6"))
        .args(["--mode", "all", "--strategy", "spd", "--workers", "3"])
        .output()
        .unwrap();
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn optimize_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("stats.csv");
    let json = dir.path().join("report.json");
    let o = detcp()
        .env("DETCP_IMBALANCE_MS", "5")
        .arg("solve")
        .arg(instance("knapsack12"))
        .args(["--mode", "opt", "--workers", "2", "--threshold", "8"])
        .arg("--stats-csv")
        .arg(&csv)
        .arg("--report-json")
        .arg(&json)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("OPTIMAL;"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "worker,nodes_expanded,nodes_replayed,splits_produced,bobnodes_consumed,solutions_found,work_ns,wait_ns"
    );
    assert_eq!(lines.count(), 2);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["workers"], 2);
    assert_eq!(report["strategy"], "spd");
    assert_eq!(report["mode"], "opt");
    assert_eq!(report["worker_stats"].as_array().unwrap().len(), 2);
    assert!(report["speedup"].is_number());
}

#[test]
fn synth_best_case() {
    let o = detcp()
        .args(["synth", "--shape", "best", "--depth", "3", "--workers", "2"])
        .output()
        .unwrap();
    assert_eq!(stdout(&o), "SAT;;b0=1,b1=1,b2=1;111\n");
    let o = detcp()
        .args(["synth", "--shape", "balanced", "--depth", "3", "--solutions", "2", "--mode", "all"])
        .output()
        .unwrap();
    assert_eq!(stdout(&o), "SAT;;b0=0,b1=0,b2=0;000\nSAT;;b0=1,b1=0,b2=0;100\n");
}

#[test]
fn bench_run_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let manifest = dir.path().join("run.json");
    std::fs::write(
        &manifest,
        format!(
            r#"{{"model_path": {:?}, "strategy": "spd", "mode": "first", "workers": 3, "threshold_S0": 2, "imbalance_window_ms": 5, "stats_csv_path": {:?}}}"#,
            instance("queens8").display().to_string(),
            csv.display().to_string()
        ),
    )
    .unwrap();
    let o = detcp().arg("bench").arg("--manifest").arg(&manifest).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("SAT;;q0=0,q1=4,q2=7,q3=5,q4=2,q5=6,q6=1,q7=3;"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);
}

#[test]
fn bench_matrix_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let manifest = dir.path().join("bench.json");
    std::fs::write(
        &manifest,
        format!(
            r#"{{"models": ["queens6", "coins"], "workers": [1, 4], "strategies": ["seq", "spd"], "modes": ["first", "opt"], "reps": 2, "csv_path": {:?}}}"#,
            out.display().to_string()
        ),
    )
    .unwrap();
    let o = detcp().arg("bench").arg("--manifest").arg(&manifest).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    // header + 2 models x 2 modes x (1 seq + 2 spd)
    assert_eq!(text.lines().count(), 1 + 12);
    assert!(text.starts_with("model,mode,strategy,workers,reps,"));
}

#[test]
fn bench_bad_manifest_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.json");
    std::fs::write(&manifest, "{\"models\": 1}").unwrap();
    let o = detcp().arg("bench").arg("--manifest").arg(&manifest).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}
