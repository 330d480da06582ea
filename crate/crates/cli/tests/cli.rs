use std::path::Path;
use std::process::Command;

use wfh_core::ingest::{read_diff_csv, read_photon_csv};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wfh-sim"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_code(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let last = stderr.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(last).unwrap();
    (out.status.code().unwrap(), v["error"]["code"].as_str().unwrap().to_string())
}

#[test]
fn vacuum_without_coherent_light() {
    assert_eq!(run_ok(&["model-quantum", "--j", "0", "--alpha-sq", "0"]), "dn,probability\n0,1.0\n");
}

#[test]
fn errors_are_machine_readable() {
    assert_eq!(error_code(&["model-classical", "--j", "1", "--alpha-sq", "0"]), (1, "domain_error".into()));
    assert_eq!(error_code(&["no-such-command"]).1, "usage_error");
    assert_eq!(error_code(&["model-quantum", "--j", "1", "--alpha-sq", "1", "--bogus"]).1, "usage_error");
    assert_eq!(error_code(&["fit-alpha-min", "--in", "/nonexistent/scan.csv"]).1, "io_error");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n").unwrap();
    assert_eq!(error_code(&["residual-metric", "--observed", bad.to_str().unwrap(), "--model", bad.to_str().unwrap()]).1, "format_error");
}

#[test]
fn jobs_environment_variable_takes_precedence() {
    let out = bin()
        .args(["model-quantum", "--j", "1", "--alpha-sq", "2", "--jobs", "2"])
        .env("WFH_SIM_JOBS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let ok = bin()
        .args(["model-quantum", "--j", "1", "--alpha-sq", "2", "--jobs", "0"])
        .env("WFH_SIM_JOBS", "3")
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn engineered_state_from_the_command_line() {
    let out = run_ok(&["--preset", "table1", "engineer", "--m", "6", "--n", "0", "--alpha-sq", "15.41"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let g2 = v["g2"].as_f64().unwrap();
    assert!((1.08..=1.30).contains(&g2), "{g2}");
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let out = run_ok(&[
        "--preset", "table1", "engineer", "--m", "6", "--n", "0", "--alpha-sq", "15.41", "--no-interference",
        "--out", csv.to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let g2 = v["g2"].as_f64().unwrap();
    assert!((1.44..=1.74).contains(&g2), "{g2}");
    let dist = read_photon_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert!((dist.total() - 1.0).abs() < 1e-9);
}

#[test]
fn quantum_and_classical_agree_at_the_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.csv");
    let c = dir.path().join("c.csv");
    run_ok(&["--preset", "table1", "model-quantum", "--j", "6", "--alpha-sq", "15.41", "--out", q.to_str().unwrap()]);
    run_ok(&["--preset", "table1", "model-classical", "--j", "6", "--alpha-sq", "15.41", "--out", c.to_str().unwrap()]);
    let out = run_ok(&["residual-metric", "--observed", q.to_str().unwrap(), "--model", c.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let s = v["s_classical"].as_f64().unwrap();
    assert!(s <= 6.7e-6, "residual metric {s}");
}

#[test]
fn scan_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let scan = dir.path().join("scan.csv");
    run_ok(&["--preset", "table1", "transition-scan", "--j", "2", "--grid", "4,6,8,10,12,14", "--out", scan.to_str().unwrap()]);
    let text = std::fs::read_to_string(&scan).unwrap();
    assert!(text.starts_with("alpha_sq,s_classical,nu\n4.0,"));
    let fit: serde_json::Value = serde_json::from_str(&run_ok(&["fit-alpha-min", "--in", scan.to_str().unwrap(), "--threshold", "6.7e-6"])).unwrap();
    assert!(fit["b"].as_f64().unwrap() > 0.0);
    assert!(fit["alpha_sq_min"].as_f64().unwrap() > 4.0);
}

#[test]
fn states_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&[
        "--preset", "table1", "states", "--j", "1", "--wigner-grid=-3,3,7", "--quadrature-grid=-4,4,9",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["files"].as_array().unwrap().len(), 3);
    let wig = std::fs::read_to_string(dir.path().join("wigner.csv")).unwrap();
    assert_eq!(wig.lines().count(), 1 + 49);
    let quad = std::fs::read_to_string(dir.path().join("quadrature.csv")).unwrap();
    assert_eq!(quad.lines().next(), Some("x,density"));
    assert_eq!(quad.lines().count(), 10);
    let photon = read_photon_csv(std::fs::File::open(dir.path().join("photon_number.csv")).unwrap()).unwrap();
    assert_eq!(photon.bounds().unwrap().0, 1);
}

#[test]
fn calibration_from_counts() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.json");
    std::fs::write(
        &counts,
        r#"{"herald_singles": 100000, "signal_singles_c": 15000, "signal_singles_d": 15000,
            "coincidences_hc": 6000, "coincidences_hd": 6000, "trials": 10000000,
            "mean_photons": {"herald": 0.689}}"#,
    )
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&run_ok(&["calibrate", "--counts", counts.to_str().unwrap()])).unwrap();
    assert!((v["efficiencies"]["eta_h"]["value"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!((v["efficiencies"]["eta_c"]["value"].as_f64().unwrap() - 0.12).abs() < 1e-12);
    assert!(v["lambda_mag"].as_f64().unwrap() > 0.0);
    assert!(v["alpha_sq"].is_null());
    assert!(v["detection_rule"].is_string());
}

#[test]
fn model_tally_feeds_nonclassicality() {
    let dir = tempfile::tempdir().unwrap();
    let tally = dir.path().join("tally.csv");
    run_ok(&["--preset", "table1", "model-tally", "--js", "0,2", "--out", tally.to_str().unwrap()]);
    let v: serde_json::Value =
        serde_json::from_str(&run_ok(&["nonclassicality", "--tally", tally.to_str().unwrap(), "--seed", "4"])).unwrap();
    let reports = v["herald_outcomes"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports[0]["g2"].as_f64().unwrap() > 1.0);
    assert!(reports[1]["g2"].as_f64().unwrap() < 1.0);
    assert!(reports[1]["mu_min"].as_f64().unwrap() < 0.0);
    assert!(reports[1]["mu_min_std"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_supplies_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let mut config = wfh_core::ingest::RunConfig::default();
    config.params = wfh_core::ExperimentParams::table1(0.0);
    config.params.detector.mode_overlap = 1.0;
    std::fs::write(&cfg, config.to_toml()).unwrap();
    let a = run_ok(&["--config", cfg.to_str().unwrap(), "model-quantum", "--j", "1", "--alpha-sq", "3"]);
    let b = run_ok(&["--preset", "table1", "model-quantum", "--j", "1", "--alpha-sq", "3"]);
    assert_ne!(a, b);
    let parsed = read_diff_csv(a.as_bytes()).unwrap();
    assert!((parsed.total() - 1.0).abs() < 1e-9);
    assert!(Path::new(&cfg).exists());
}
