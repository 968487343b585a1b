use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsed-g2"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn")
}

fn write_config(dir: &Path, state: &str, pulses: u64, efficiency: f64) -> PathBuf {
    let path = dir.join("exp.toml");
    let text = format!(
        r#"seed = 11

[source]
state = "{state}"
mode = "gauss:1e-9"

[detector]
efficiency = {efficiency}

[run]
kind = "pulsed"
pulses = {pulses}
period = 12.5e-9
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn read_report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pulse_index,time_seconds"));
    lines.map(str::to_owned).collect()
}

#[test]
fn coherent_stream_has_expected_click_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "coherent:0.8", 50_000, 0.5);
    let out = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("clicks.csv")).len() as f64;
    // Poisson counts: mean N s mu, variance the same.
    let mean = 50_000.0 * 0.5 * 0.8;
    assert!((rows - mean).abs() < 5.0 * mean.sqrt(), "{rows} vs {mean}");
    assert!(dir.path().join("clicks.csv.json").exists());
}

#[test]
fn repeated_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        vec![
            "simulate", "--state", "thermal:0.5", "--pulses", "5000", "--seed", "9", "--out", name,
        ]
    };
    for name in ["a.csv", "b.csv", "a.bin", "b.bin"] {
        assert!(run(dir.path(), &args(name)).status.success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv.json"), read("b.csv.json"));
    assert_eq!(read("a.bin"), read("b.bin"));

    assert!(run(dir.path(), &["simulate", "--pulses", "5000", "--seed", "10", "--out", "c.csv"])
        .status
        .success());
    assert!(run(dir.path(), &["simulate", "--pulses", "5000", "--seed", "9", "--out", "d.csv"])
        .status
        .success());
    assert_ne!(read("c.csv"), read("d.csv"));
}

#[test]
fn zero_efficiency_gives_empty_stream_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "thermal:1", 1000, 0.0);
    let out = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(data_rows(&dir.path().join("clicks.csv")).is_empty());

    // Analyzing it yields a flagged report, not a failure.
    let out = run(dir.path(), &["analyze", "clicks.csv", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&dir.path().join("res/report.json"));
    let flags: Vec<&str> = report["flags"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    assert!(flags.contains(&"no_clicks"), "{flags:?}");
    assert!(report["g2q_eta"].is_null());
}

#[test]
fn analyze_recovers_thermal_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run(
        dir.path(),
        &["simulate", "--state", "thermal:1", "--pulses", "100000", "--seed", "5", "--out", "t.csv"],
    );
    assert!(sim.status.success());
    let out = run(dir.path(), &["analyze", "t.csv", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&dir.path().join("res/report.json"));
    let g = report["g2q_eta"].as_f64().unwrap();
    let sd = report["g2q_eta_sigma"].as_f64().unwrap();
    assert!((g - 2.0).abs() < 5.0 * sd && sd < 0.05, "{g} +- {sd}");
    assert_eq!(report["N"].as_u64(), Some(100_000));
    assert_eq!(report["warnings"].as_array().unwrap().len(), 0);

    let hist = std::fs::read_to_string(dir.path().join("res/histogram.csv")).unwrap();
    let mut lines = hist.lines();
    assert_eq!(lines.next(), Some("tau_seconds,count,expected_analytic"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(first[2].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn wrong_width_hint_warns_and_doubles_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run(
        dir.path(),
        &["simulate", "--state", "thermal:1", "--pulses", "100000", "--seed", "6", "--out", "t.csv"],
    );
    assert!(sim.status.success());
    let out = run(dir.path(), &["analyze", "t.csv", "--mode", "gauss:2e-9", "--out", "res"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "{stderr}");
    let report = read_report(&dir.path().join("res/report.json"));
    let g = report["g2q_eta"].as_f64().unwrap();
    assert!((g / 4.0 - 1.0).abs() < 0.1, "{g}");
    assert!(!report["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn analyze_handles_stationary_streams() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("st.toml");
    std::fs::write(
        &cfg,
        r#"seed = 2
[source]
state = "thermal:1"
mode = "gauss:1e-9"
[detector]
efficiency = 1.0
[run]
kind = "stationary"
light = "poisson"
mean_rate = 1e5
duration = 1.0
[estimator]
bin_width = 1e-6
max_tau = 5e-5
bootstrap_replicates = 50
"#,
    )
    .unwrap();
    assert!(run(dir.path(), &["simulate", "--config", "st.toml"]).status.success());
    let out = run(dir.path(), &["analyze", "clicks.csv", "--config", "st.toml", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&dir.path().join("res/report.json"));
    let ratio = report["peak_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn figures_are_written() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["3", "4"] {
        let out = run(dir.path(), &["figure", id, "--pulses", "2000", "--out", "figs"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let fig4 = std::fs::read_to_string(dir.path().join("figs/figure4.csv")).unwrap();
    assert!(fig4.starts_with("delta_t_seconds,num_pulses,"));
    assert_eq!(fig4.lines().count(), 26);
    let fig3 = std::fs::read_to_string(dir.path().join("figs/figure3.csv")).unwrap();
    assert!(fig3.lines().next().unwrap().contains("expected_analytic"));
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["figure", "9"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));

    std::fs::write(dir.path().join("bad.toml"), "seed = 1\n[detector]\nefficiency = 1.5\n").unwrap();
    let out = run(dir.path(), &["simulate", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("efficiency"));

    let out = run(dir.path(), &["simulate", "--state", "squeezed:1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_stream_exits_2_naming_record() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["simulate", "--pulses", "2000", "--out", "s.csv"])
        .status
        .success());
    let path = dir.path().join("s.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "7,not-a-time";
    std::fs::write(&path, lines.join("\n")).unwrap();
    let out = run(dir.path(), &["analyze", "s.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("record 2"), "{stderr}");

    let out = run(dir.path(), &["analyze", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
}
