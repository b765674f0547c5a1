//! Subcommand-level integration tests for the `rdd` binary.

use std::process::Command;

fn rdd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdd"))
}

#[test]
fn simulate_writes_deterministic_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    for out in [&a, &b] {
        let status = rdd()
            .args(["simulate", "--family", "outcome_jump", "--n", "200", "--seed", "5", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("x,d,y\n"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn mc_reports_summary_json() {
    let out = rdd()
        .args(["mc", "--family", "outcome_jump", "--reps", "20", "--analysis", "sharp", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"mean_tau\""));
    assert!(text.contains("\"coverage_95\""));
}

#[test]
fn mc_rejects_unknown_analysis_with_exit_2() {
    let out = rdd()
        .args(["mc", "--family", "outcome_jump", "--analysis", "bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("INVALID_CONFIG"));
}

#[test]
fn plot_emits_binned_data() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("d.csv");
    assert!(rdd()
        .args(["simulate", "--family", "outcome_jump", "--n", "400", "--seed", "9", "--out"])
        .arg(&csv)
        .status()
        .unwrap()
        .success());
    let out = rdd()
        .args(["plot", "--running", "x", "--outcome", "y", "--cutoff", "0", "--bins", "fixed:20", "--bandwidth", "1", "--data"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"n_bins_left\":20"));
    assert!(text.contains("\"fitted\""));
}

#[test]
fn analyze_flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("d.csv");
    assert!(rdd()
        .args(["simulate", "--family", "outcome_jump", "--n", "500", "--seed", "2", "--out"])
        .arg(&csv)
        .status()
        .unwrap()
        .success());
    // config names a bad column; the flag fixes it
    let config = tmp.path().join("c.json");
    std::fs::write(
        &config,
        format!(
            "{{\"data\":{:?},\"running\":\"nope\",\"outcome\":\"y\",\"cutoff\":0.0,\"bandwidth\":\"1\"}}",
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let without_flag = rdd().args(["analyze", "--config"]).arg(&config).output().unwrap();
    assert_eq!(without_flag.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&without_flag.stderr).contains("MISSING_COLUMN"));

    let with_flag = rdd()
        .args(["analyze", "--running", "x", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(with_flag.status.success());
}
