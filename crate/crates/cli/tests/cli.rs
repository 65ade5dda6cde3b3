use std::fs;
use std::process::Command;

fn mmwi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmwi"))
}

#[test]
fn blockage_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        "radius_m = 20.0\nsweep_param = \"rho\"\nsweep_values = [0.0, 0.01, 0.1]\n",
    )
    .unwrap();
    let status = mmwi()
        .args([
            "blockage",
            "--trials",
            "2000",
            "--seed",
            "7",
            "--threads",
            "2",
            "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("blockage.csv")).unwrap();
    assert!(text.starts_with("# mmwi "));
    assert!(text.contains("\n# mc_trials = 2000\n# mc_seed = 7\n"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], "rho,pb_lower,pb_upper,pb_mc,pb_mc_stderr");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "radius = 20.0\n").unwrap();
    let out = mmwi()
        .arg("blockage")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn decreasing_thresholds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eta.toml");
    fs::write(&cfg, "eta_db = [5.0, 0.0]\nmc_trials = 10\n").unwrap();
    let out = mmwi()
        .arg("outage")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}
