//! End-to-end checks of the `voljump` binary: ingestion, reports,
//! determinism and error reporting.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voljump"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning voljump");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_report(dir: &Path, name: &str) -> Value {
    let text = fs::read_to_string(dir.join(name)).expect("report file");
    serde_json::from_str(&text).expect("report JSON")
}

#[test]
fn simulate_then_ingest_reproduces_the_test_bit_exactly() {
    let dir = tempdir().unwrap();
    let obs = dir.path().join("observations.csv");
    run_ok(bin()
        .args(["simulate", "--preset", "h1-default", "--seed", "42"])
        .arg("--output")
        .arg(&obs)
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(fs::read_to_string(&obs).unwrap().lines().count(), 30_001);

    let from_file = dir.path().join("from-file");
    run_ok(bin()
        .args(["test"])
        .arg("--input")
        .arg(&obs)
        .arg("--out-dir")
        .arg(&from_file));
    let from_sim = dir.path().join("from-sim");
    run_ok(bin()
        .args(["test", "--simulate", "h1-default", "--seed", "42"])
        .arg("--out-dir")
        .arg(&from_sim));

    let a = read_report(&from_file, "test-report.json");
    let b = read_report(&from_sim, "test-report.json");
    // shortest round-trip float formatting makes the file path and the
    // in-process simulation agree bit for bit
    assert_eq!(a["noise_var_hat"], b["noise_var_hat"]);
    assert_eq!(a["results"], b["results"]);
    let stat = a["results"][0]["statistic"].as_f64().unwrap();
    assert!(stat.is_finite() && stat > 0.0);
}

#[test]
fn repeated_runs_are_deterministic() {
    let dir = tempdir().unwrap();
    let mut reports = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        run_ok(bin()
            .args([
                "bootstrap",
                "--simulate",
                "h0-default",
                "--seed",
                "7",
                "--replications",
                "20",
                "--bootstrap-seed",
                "3",
            ])
            .arg("--out-dir")
            .arg(&out));
        reports.push(fs::read_to_string(out.join("bootstrap-report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn unparsable_value_reports_its_line() {
    let dir = tempdir().unwrap();
    let obs = dir.path().join("bad.csv");
    let mut lines: Vec<String> = (0..12).map(|i| format!("{}", 4.0 + i as f64 * 0.001)).collect();
    lines[6] = "not-a-number".into();
    fs::write(&obs, lines.join("\n")).unwrap();
    let out = bin()
        .args(["test"])
        .arg("--input")
        .arg(&obs)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 7"), "stderr: {stderr}");
}

#[test]
fn off_grid_timestamps_are_rejected() {
    let dir = tempdir().unwrap();
    let obs = dir.path().join("grid.csv");
    let n = 10;
    let mut lines: Vec<String> = (0..=n)
        .map(|i| format!("{},{}", i as f64 / n as f64, 4.0 + i as f64 * 0.001))
        .collect();
    lines[4] = format!("{},{}", 0.37, 4.004); // should be 0.4
    fs::write(&obs, lines.join("\n")).unwrap();
    let out = bin()
        .args(["test"])
        .arg("--input")
        .arg(&obs)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("off the uniform grid") && stderr.contains("line 5"),
        "stderr: {stderr}"
    );
}

#[test]
fn binary_input_matches_text_input() {
    let dir = tempdir().unwrap();
    let csv = dir.path().join("observations.csv");
    run_ok(bin()
        .args(["simulate", "--preset", "h0-default", "--seed", "5"])
        .arg("--output")
        .arg(&csv)
        .arg("--out-dir")
        .arg(dir.path()));
    let values: Vec<f64> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let bin_path = dir.path().join("observations.f64");
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin_path, bytes).unwrap();

    let from_csv = dir.path().join("from-csv");
    let from_bin = dir.path().join("from-bin");
    run_ok(bin()
        .args(["estimate", "--truncate"])
        .arg("--input")
        .arg(&csv)
        .arg("--out-dir")
        .arg(&from_csv));
    run_ok(bin()
        .args(["estimate", "--truncate"])
        .arg("--input")
        .arg(&bin_path)
        .arg("--out-dir")
        .arg(&from_bin));
    let a = read_report(&from_csv, "estimate-report.json");
    let b = read_report(&from_bin, "estimate-report.json");
    assert_eq!(a["theta_hat"], b["theta_hat"]);
    assert_eq!(a["noise_var_hat"], b["noise_var_hat"]);
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("voljump.toml");
    fs::write(&cfg, "bins = 150\nblock_len = 15\nlevel = 0.05\n").unwrap();

    let from_cfg = dir.path().join("from-cfg");
    run_ok(bin()
        .args(["test", "--simulate", "h0-default", "--seed", "1"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&from_cfg));
    let a = read_report(&from_cfg, "test-report.json");
    assert_eq!(a["tuning"]["bins"], 150);
    assert_eq!(a["results"][0]["rule"]["level"], 0.05);

    let overridden = dir.path().join("overridden");
    run_ok(bin()
        .args([
            "test",
            "--simulate",
            "h0-default",
            "--seed",
            "1",
            "--bins",
            "120",
            "--level",
            "0.1",
        ])
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&overridden));
    let b = read_report(&overridden, "test-report.json");
    assert_eq!(b["tuning"]["bins"], 120);
    assert_eq!(b["results"][0]["rule"]["level"], 0.1);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("voljump.toml");
    fs::write(&cfg, "bons = 150\n").unwrap();
    let out = bin()
        .args(["test", "--simulate", "h0-default"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parsing config file"));
}

#[test]
fn missing_input_is_an_error() {
    let dir = tempdir().unwrap();
    let out = bin()
        .args(["test"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--input or --simulate"));
}

#[test]
fn estimate_writes_plot_tables() {
    let dir = tempdir().unwrap();
    run_ok(bin()
        .args(["estimate", "--truncate", "--simulate", "h1-default", "--seed", "9", "--csv"])
        .arg("--out-dir")
        .arg(dir.path()));
    let report = read_report(dir.path(), "estimate-report.json");
    let theta = report["theta_hat"].as_f64().unwrap();
    assert!(theta > 0.0 && theta < 1.0);
    let spot = fs::read_to_string(dir.path().join("spot-volatility.csv")).unwrap();
    assert_eq!(spot.lines().count(), 121); // header + one row per bin
    assert!(spot.starts_with("bin,time,spot_vol"));
    for name in ["blocks.csv", "diamond.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}
