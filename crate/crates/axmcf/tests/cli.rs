//! End-to-end checks of the experiment drivers and the binary: artifact
//! determinism, snapshot reuse as initial data, exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use axmcf::commands::execute;
use axmcf::config::{resolve, ExperimentKind, FileConfig, Overrides};
use axmcf::AppError;

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("axmcf-cli-{tag}-{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    dir
}

fn resolve_with(kind: ExperimentKind, toml: &str, out: &Path) -> axmcf::config::ExperimentConfig {
    let file = FileConfig::parse(toml).unwrap();
    let over = Overrides { out: Some(out.to_path_buf()), ..Overrides::default() };
    resolve(kind, file, &over).unwrap()
}

fn read_all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn rerunning_a_config_reproduces_every_byte() {
    let toml = r#"
        kind = "run"
        [scheme]
        segments = 32
        dt_mode = "h2"
        final_time = 0.02
        [initial]
        family = "sphere"
        radius = 1.0
        [snapshots]
        mode = "every"
        every = 10
    "#;
    let dir_a = temp_dir("identical-a");
    let dir_b = temp_dir("identical-b");
    execute(&resolve_with(ExperimentKind::Run, toml, &dir_a)).unwrap();
    execute(&resolve_with(ExperimentKind::Run, toml, &dir_b)).unwrap();

    let files_a = read_all_files(&dir_a);
    let files_b = read_all_files(&dir_b);
    assert!(files_a.iter().any(|(name, _)| name == "series.csv"));
    assert_eq!(files_a.len(), files_b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in files_a.iter().zip(&files_b) {
        assert_eq!(name_a, name_b);
        if name_a == "report.json" {
            // The reports differ only in the echoed output directory.
            let scrub = |b: &[u8], dir: &Path| {
                String::from_utf8(b.to_vec()).unwrap().replace(&dir.display().to_string(), "OUT")
            };
            assert_eq!(scrub(bytes_a, &dir_a), scrub(bytes_b, &dir_b));
        } else {
            assert_eq!(bytes_a, bytes_b, "{name_a} differs between reruns");
        }
    }
    std::fs::remove_dir_all(&dir_a).unwrap();
    std::fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn final_snapshot_feeds_back_as_initial_data() {
    let dir_a = temp_dir("feedback-a");
    let toml = r#"
        kind = "run"
        [scheme]
        segments = 24
        dt_mode = "h2"
        final_time = 0.01
    "#;
    execute(&resolve_with(ExperimentKind::Run, toml, &dir_a)).unwrap();

    let dir_b = temp_dir("feedback-b");
    let file = FileConfig::parse(
        r#"
        kind = "run"
        [scheme]
        segments = 24
        dt_mode = "h2"
        final_time = 0.005
    "#,
    )
    .unwrap();
    let over = Overrides {
        out: Some(dir_b.clone()),
        initial: Some(format!("csv:{}", dir_a.join("final.csv").display())),
        ..Overrides::default()
    };
    let cfg = resolve(ExperimentKind::Run, file, &over).unwrap();
    execute(&cfg).unwrap();

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir_b.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"]["reason"], "reached_final_time");
    std::fs::remove_dir_all(&dir_a).unwrap();
    std::fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn collapsing_sphere_ends_in_a_numerical_error_with_report() {
    // Extinction at t = 0.01 sits inside the requested window.
    let toml = r#"
        kind = "run"
        [scheme]
        segments = 16
        dt_mode = "h2"
        final_time = 0.05
        [initial]
        family = "sphere"
        radius = 0.2
    "#;
    let dir = temp_dir("collapse");
    let err = execute(&resolve_with(ExperimentKind::Run, toml, &dir)).unwrap_err();
    assert!(matches!(err, AppError::Numerical(_)), "{err}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"]["reason"], "step_failed");
    assert!(dir.join("series.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn pooled_sweep_matches_the_sequential_table() {
    let toml = r#"
        kind = "eoc-sweep"
        [scheme]
        dt_mode = "h"
        final_time = 0.125
        [sweep]
        segment_list = [32, 64]
        threads = 2
    "#;
    let dir = temp_dir("sweep-match");
    execute(&resolve_with(ExperimentKind::EocSweep, toml, &dir)).unwrap();

    let rows = axmcf_core::analysis::eoc_table(
        &[32, 64],
        axmcf_core::stepper::DtMode::ProportionalH,
        0.125,
        1.0,
    )
    .unwrap();

    let text = std::fs::read_to_string(dir.join("eoc.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "J,err_0h,eoc_0h,err_1h,eoc_1h");
    for row in &rows {
        let line = lines.next().unwrap();
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0].parse::<usize>().unwrap(), row.segments);
        assert_eq!(cols[1].parse::<f64>().unwrap(), row.err_l2);
        assert_eq!(cols[3].parse::<f64>().unwrap(), row.err_h1);
        match row.eoc_l2 {
            Some(v) => assert!((cols[2].parse::<f64>().unwrap() - v).abs() < 1e-12),
            None => assert!(cols[2].is_empty()),
        }
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn limacon_snapshot_times_produce_four_files() {
    let toml = r#"
        kind = "run"
        [scheme]
        segments = 128
        dt_mode = "fixed:1e-3"
        final_time = 0.2
        [initial]
        family = "limacon"
        amplitude = 1.5
        [snapshots]
        mode = "at-times"
        times = [0.0, 0.1, 0.14, 0.2]
    "#;
    let dir = temp_dir("limacon-snaps");
    execute(&resolve_with(ExperimentKind::Run, toml, &dir)).unwrap();
    let snaps: Vec<String> = read_all_files(&dir)
        .into_iter()
        .map(|(name, _)| name)
        .filter(|n| n.starts_with("snapshot_"))
        .collect();
    assert_eq!(snaps.len(), 4, "{snaps:?}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn binary_maps_errors_to_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_axmcf");
    let dir = temp_dir("exit-codes");

    // Validation failure: segment count below the scheme minimum.
    let out = Command::new(bin)
        .args(["run", "--segments", "1", "--out"])
        .arg(dir.join("bad"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    // Clean tiny run.
    let out = Command::new(bin)
        .args(["run", "--segments", "16", "--final-time", "0.01", "--out"])
        .arg(dir.join("ok"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("ok").join("report.json").exists());

    // Numerical failure: evolve a small sphere past its extinction time.
    let out = Command::new(bin)
        .args(["run", "--segments", "16", "--initial", "sphere:0.2", "--final-time", "0.05", "--out"])
        .arg(dir.join("gone"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Unreadable config file.
    let out = Command::new(bin)
        .args(["run", "--config", "/nonexistent/axmcf.toml", "--out"])
        .arg(dir.join("noconf"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::remove_dir_all(&dir).unwrap();
}
