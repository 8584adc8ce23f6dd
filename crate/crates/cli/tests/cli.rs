//! End-to-end checks of the binary surface: subcommand output and the exit
//! code contract (0 ok, 2 config, 3 infeasible).

use std::process::Command;

fn reticulum() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reticulum"))
}

#[test]
fn params_prints_the_sizing_tables() {
    let out = reticulum().arg("params").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("11&149"));
    assert!(text.contains("21&329"));
    assert!(text.contains("952.709 KB/s"));
    assert!(text.contains("24, 47, 140"));
    assert!(!text.contains("MISMATCH"));
}

#[test]
fn fine_grid_reports_its_deviations() {
    // The finer mantissa grid picks more aggressive sizes than the decade
    // grid; the command must flag them instead of silently matching.
    let out = reticulum()
        .args(["params", "--fine-grid"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fine mantissa"));
    assert!(text.contains("MISMATCH"));
}

#[test]
fn params_point_query() {
    let out = reticulum()
        .args(["params", "--pa", "0.33", "--pf", "1e-7"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Np=15 Nc=221"));
}

#[test]
fn simulate_writes_csv_files() {
    let dir = std::env::temp_dir().join(format!("reticulum-cli-test-{}", std::process::id()));
    let config = dir.join("tiny.conf");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(
        &config,
        "n = 60\nn_p = 3\nn_c = 12\ntau = 10\nblock_bytes = 2048\nstate_bytes = 512\n\
         tx_per_block = 16\nepochs = 3\nseed = 5\n",
    )
    .unwrap();
    let out = reticulum()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,system,tx_committed"));
    assert_eq!(metrics.lines().count(), 4);
    assert!(dir.join("events.csv").exists());
    assert!(dir.join("summary.txt").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_key_exits_2() {
    let dir = std::env::temp_dir().join(format!("reticulum-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("bad.conf");
    std::fs::write(&config, "bogus_key = 1\n").unwrap();
    let out = reticulum()
        .args(["simulate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bogus_key"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn infeasible_tau_exits_3() {
    let dir = std::env::temp_dir().join(format!("reticulum-cli-inf-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("inf.conf");
    std::fs::write(&config, "n = 60\nn_p = 3\nn_c = 12\ntau = 2\n").unwrap();
    let out = reticulum()
        .args(["simulate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("tau must be >= n_p"));
    std::fs::remove_dir_all(&dir).ok();
}
