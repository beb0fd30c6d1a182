use std::path::Path;
use std::process::{Command, Output};

use pvcoat_core::nalgebra::Vector3;
use pvcoat_core::HoverSample;
use pvcoat_sim::io;

fn pvcoat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvcoat")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_rho_recovers_the_generating_value() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("hover.csv");
    let samples: Vec<HoverSample> = (0..15)
        .map(|i| {
            let h = 0.12 + 0.06 * i as f64;
            let q = 0.10 / (4.0 * h);
            HoverSample { height: h, thrust_in: 1.56 * 9.81 * (1.0 - 5.71 * q * q), mass: 1.56 }
        })
        .collect();
    io::write_hover_samples(std::fs::File::create(&csv).unwrap(), &samples).unwrap();
    let out = pvcoat(&["fit-rho", path(&csv), "--radius", "0.10", "--g", "9.81"]);
    assert!(out.status.success());
    let rho: f64 = stdout(&out).trim().parse().unwrap();
    assert!((rho - 5.71).abs() < 1e-6, "{rho}");
}

#[test]
fn simulate_writes_metrics_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = pvcoat(&["simulate", "table2_ge_on", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(metrics["rmse"][2].as_f64().unwrap() >= 0.0);
    let log = std::fs::read_to_string(dir.path().join("table2_ge_on_log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), io::LOG_COLUMNS.join(","));
    assert!(dir.path().join("table2_ge_on_metrics.json").exists());
}

#[test]
fn simulate_seed_override_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(pvcoat(&["simulate", "table3_tilt_on", "--seed", "17", "--out", path(d)]).status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("table3_tilt_on_log.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn malformed_scenario_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(&file, "{ \"version\": 1, \"duration_s\": ").unwrap();
    let out = pvcoat(&["simulate", path(&file)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(pvcoat(&["simulate", "no_such_scenario"]).status.code(), Some(1));
}

#[test]
fn degenerate_hover_data_exits_with_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("hover.csv");
    std::fs::write(&csv, "h_m,thrust_in_N,mass_kg\n1e-200,15,1.56\n2e-200,15,1.56\n").unwrap();
    assert_eq!(pvcoat(&["fit-rho", path(&csv)]).status.code(), Some(2));
}

#[test]
fn plan_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let corners = dir.path().join("corners.json");
    std::fs::write(
        &corners,
        r#"{ "corners": [[0.0, 0.0, 0.0], [1.1, 0.0, 0.0], [1.1, 2.3, 0.5], [0.0, 2.3, 0.5]] }"#,
    )
    .unwrap();
    let plan = dir.path().join("plan.csv");
    let out = pvcoat(&["plan", path(&corners), "--spacing", "0.07", "--speed", "0.5", "--out", path(&plan)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // The slope makes the panel 2.354 m long in-plane: 34 lines of 7 cm.
    assert!(String::from_utf8_lossy(&out.stderr).contains("34 sweeps"));

    // A log that sits 2 cm above the plan everywhere.
    let text = std::fs::read_to_string(&plan).unwrap();
    let mut log = String::from("t,x,y,z\n");
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        log.push_str(&format!("{},{},{},{}\n", f[0], f[1], f[2], f[3] + 0.02));
    }
    let log_path = dir.path().join("log.csv");
    std::fs::write(&log_path, log).unwrap();
    let out = pvcoat(&["metrics", path(&log_path), "--ref", path(&plan)]);
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((m["rmse"][2].as_f64().unwrap() - 0.02).abs() < 1e-6);
    assert!(m["rmse"][0].as_f64().unwrap() < 1e-6);
}

#[test]
fn detect_finds_a_flat_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("cloud.csv");
    let mut text = String::from("x,y,z\n");
    for i in 0..=50 {
        for j in 0..=100 {
            text.push_str(&format!("{},{},-0.8\n", i as f64 * 0.02, j as f64 * 0.02));
        }
    }
    std::fs::write(&cloud, text).unwrap();
    let out = pvcoat(&["detect", path(&cloud)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let corners = io::read_corners(&stdout(&out)).unwrap();
    for want in [Vector3::new(0.0, 0.0, -0.8), Vector3::new(1.0, 2.0, -0.8)] {
        assert!(corners.0.iter().any(|c| (c - want).norm() < 1e-9));
    }
}

#[test]
fn list_names_every_bundled_scenario() {
    let out = pvcoat(&["list"]);
    assert_eq!(stdout(&out).lines().count(), 9);
}
