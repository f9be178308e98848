use std::path::Path;
use std::process::{Command, Output};

fn bayescp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayescp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_multi_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bayescp(&[
        "simulate-multi",
        "--reps",
        "3",
        "--horizon",
        "20",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["nodes"].as_array().unwrap().len(), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("K_ρ"));
    let trace = std::fs::read_to_string(out.join("rep_00002.csv")).unwrap();
    assert_eq!(trace.lines().count(), 22);
    assert!(out.join("summary.json").exists());

    let fit = bayescp(&[
        "rate-fit",
        out.join("rep_00000.csv").to_str().unwrap(),
        "--start",
        "5",
    ]);
    assert!(
        fit.status.success(),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );
    assert!(stdout(&fit).contains("rep_00000.csv"));
}

#[test]
fn simulate_classic_reads_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "[experiment]\npreset = \"classic\"\nreps = 5\nhorizon = 30\nalpha = 0.05\n",
    )
    .unwrap();
    let o = bayescp(&[
        "simulate-classic",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["detection"]["replications"], 5);
    assert_eq!(summary["alpha"], 0.05);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = bayescp(&[
            "simulate-multi",
            "--reps",
            "2",
            "--horizon",
            "15",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n).join("rep_00001.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn lipschitz_check_reports_bounds() {
    let o = bayescp(&["lipschitz-check", "--rhos", "0.1,0.1", "--pairs", "2000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("T_ex: bound 0.990000"));
    assert!(text.contains("[pass]"));

    let o = bayescp(&["lipschitz-check", "--preset", "star4", "--pairs", "500"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("T_ap: bound 3.600000"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn errors_exit_nonzero_with_context() {
    let o = bayescp(&["simulate-multi", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    let missing = Path::new("/nonexistent/exp.toml");
    let o = bayescp(&["simulate-classic", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/exp.toml"));

    let o = bayescp(&["simulate-classic", "--preset", "star4", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
