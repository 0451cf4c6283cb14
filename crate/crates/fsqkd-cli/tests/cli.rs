//! End-to-end behavior of the command-line frontend: artifact layout,
//! exit codes, and round-trips between commands.

use std::path::Path;
use std::process::{Command, Output};

fn fsqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsqkd"))
        .args(args)
        .output()
        .expect("spawn fsqkd")
}

fn fast_scenario(dir: &Path) -> String {
    // a preset shrunk to a small block target so runs stay subsecond
    let text = include_str!("../scenarios/link500.toml")
        .replace("block_nz = 10000000", "block_nz = 1000000")
        .replace("duration_s = 60.0", "duration_s = 5.0");
    let path = dir.join("fast.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_the_artifact_set() {
    let dir = tempdir("artifacts");
    let scenario = fast_scenario(&dir);
    let out = fsqkd(&[
        "simulate",
        &scenario,
        "--out",
        dir.join("run").to_str().unwrap(),
        "--export-events",
        "500",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for artifact in [
        "run/report.json",
        "run/channel.csv",
        "run/tracking.csv",
        "run/tally_block0.json",
        "run/events.csv",
    ] {
        assert!(dir.join(artifact).exists(), "missing {artifact}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["scenario"]["name"], "link500");
    assert!(report["blocks"][0]["report"]["key_length_bits"].as_u64().unwrap() > 0);

    let events = std::fs::read_to_string(dir.join("run/events.csv")).unwrap();
    assert!(events.starts_with("slot,detector,bin,t_ns\n"));
    assert_eq!(events.lines().count(), 501);

    let tracking = std::fs::read_to_string(dir.join("run/tracking.csv")).unwrap();
    assert!(tracking.starts_with("t_s,ex_m,ey_m,ax,ay,eta\n"));
}

#[test]
fn keyrate_command_round_trips_the_exported_tally() {
    let dir = tempdir("tally");
    let scenario = fast_scenario(&dir);
    let run_dir = dir.join("run");
    let out = fsqkd(&["simulate", &scenario, "--out", run_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap())
            .unwrap();
    let expected = report["blocks"][0]["report"]["key_length_bits"].as_u64().unwrap();

    let out = fsqkd(&[
        "keyrate",
        "--tally",
        run_dir.join("tally_block0.json").to_str().unwrap(),
        "--mu1",
        "0.3",
        "--mu2",
        "0.1",
        "--block-nz",
        "1000000",
    ]);
    assert!(out.status.success());
    let key: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(key["key_length_bits"].as_u64().unwrap(), expected);
}

#[test]
fn zero_key_tally_exits_with_the_bound_failure_code() {
    let dir = tempdir("zerokey");
    let tally = serde_json::json!({
        "n_z": {"signal": 0, "decoy": 0},
        "n_x": {"signal": 0, "decoy": 0},
        "m_z": {"signal": 0, "decoy": 0},
        "m_x": {"signal": 0, "decoy": 0},
        "elapsed": 1.0,
        "diagnostics": {"multi_click_slots": 0, "basis_mismatch": 0},
    });
    let path = dir.join("empty.json");
    std::fs::write(&path, serde_json::to_string(&tally).unwrap()).unwrap();
    let out = fsqkd(&["keyrate", "--tally", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn configuration_errors_exit_with_code_one() {
    let out = fsqkd(&["simulate", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempdir("badcfg");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "name = \"broken\"\n[run]\nseed = 1\n").unwrap();
    let out = fsqkd(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let scenario = fast_scenario(&dir);
    let out = fsqkd(&["sweep", &scenario, "--axis", "bogus.path", "--values", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_code_two() {
    let dir = tempdir("baddata");
    let path = dir.join("trace.csv");
    std::fs::write(&path, "t_s,transmittance\n0.0,0.5\n0.001,broken\n").unwrap();
    let out = fsqkd(&[
        "turbulence",
        "analyze",
        path.to_str().unwrap(),
        "--wavelength-nm",
        "1310",
        "--length-m",
        "500",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn two_detector_mode_runs_but_cannot_extract_key() {
    // without the monitor port the only observed interferometer output is
    // the phase-0 destructive one, so the block reports zero key (exit 3)
    let dir = tempdir("twodet");
    let mut text = include_str!("../scenarios/link500.toml")
        .replace("name = \"link500\"", "name = \"twodet\"")
        .replace("block_nz = 10000000", "block_nz = 300000")
        .replace("duration_s = 60.0", "duration_s = 2.0");
    let start = text.find("[receiver.x2_detector]").unwrap();
    let end = text[start..].find("\n\n").unwrap() + start;
    text.replace_range(start..end, "");
    for key in [
        "\"receiver.x2_detector.efficiency\" = \"calibration\"\n",
        "\"receiver.x2_detector.dark_rate_hz\" = \"calibration\"\n",
        "\"receiver.x2_detector.dead_time_ns\" = \"calibration\"\n",
        "\"receiver.x2_detector.jitter_ps\" = \"calibration\"\n",
    ] {
        text = text.replace(key, "");
    }
    let path = dir.join("twodet.toml");
    std::fs::write(&path, text).unwrap();
    assert!(fsqkd(&["lint", path.to_str().unwrap()]).status.success());
    let out = fsqkd(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn lint_rejects_relabeled_constants() {
    let dir = tempdir("lint");
    let text = include_str!("../scenarios/link500.toml")
        .replace("\"beam.wavelength_nm\" = \"reported\"", "\"beam.wavelength_nm\" = \"calibration\"");
    let path = dir.join("mislabeled.toml");
    std::fs::write(&path, text).unwrap();
    let out = fsqkd(&["lint", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beam.wavelength_nm"));
}

#[test]
fn lint_accepts_the_shipped_presets() {
    for preset in ["link50", "link500"] {
        let out = fsqkd(&["lint", preset]);
        assert!(out.status.success(), "{preset}");
    }
}

#[test]
fn track_modes_differ_and_export_traces() {
    let dir = tempdir("track");
    let scenario = fast_scenario(&dir);
    let open = fsqkd(&["track", &scenario, "--mode", "open"]);
    let closed = fsqkd(&["track", &scenario, "--mode", "closed"]);
    assert!(open.status.success() && closed.status.success());
    let open: serde_json::Value = serde_json::from_slice(&open.stdout).unwrap();
    let closed: serde_json::Value = serde_json::from_slice(&closed.stdout).unwrap();
    assert!(
        closed["mean_error_m"].as_f64().unwrap() < open["mean_error_m"].as_f64().unwrap(),
        "closed loop should track better"
    );

    let out_dir = dir.join("trace");
    let out = fsqkd(&[
        "track",
        &scenario,
        "--mode",
        "closed",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out_dir.join("tracking.csv").exists());
}

#[test]
fn parallel_blocks_merge_deterministically() {
    // blocks execute concurrently; reports must still be byte-identical
    let dir = tempdir("parblocks");
    let scenario = fast_scenario(&dir);
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let out = fsqkd(&[
            "simulate",
            &scenario,
            "--blocks",
            "3",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn sweep_writes_the_table() {
    let dir = tempdir("sweep");
    let scenario = fast_scenario(&dir);
    let path = dir.join("sweep.csv");
    let out = fsqkd(&[
        "sweep",
        &scenario,
        "--axis",
        "budget.total_db",
        "--values",
        "16.5,25",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&path).unwrap();
    assert!(table.starts_with("value,mean_skr_bps,mean_qber_z,mean_qber_x,n_z\n"));
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn exported_channel_trace_reanalyzes_to_the_report_statistics() {
    // trace sufficiency: the exported series reproduces the in-report
    // channel statistics exactly
    let dir = tempdir("reanalyze");
    let scenario = fast_scenario(&dir);
    let run_dir = dir.join("run");
    assert!(fsqkd(&["simulate", &scenario, "--out", run_dir.to_str().unwrap()])
        .status
        .success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap())
            .unwrap();
    let out = fsqkd(&[
        "turbulence",
        "analyze",
        run_dir.join("channel.csv").to_str().unwrap(),
        "--wavelength-nm",
        "1310.10",
        "--length-m",
        "500",
    ]);
    assert!(out.status.success());
    let analysis: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reported = report["channel"]["sigma_i2"].as_f64().unwrap();
    let reanalyzed = analysis["sigma_i2"].as_f64().unwrap();
    let rel = (reported - reanalyzed).abs() / reported;
    // CSV round-trips f64 through shortest-representation text
    assert!(rel < 1e-12, "sigma_i2 {reported} vs {reanalyzed}");
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fsqkd-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
