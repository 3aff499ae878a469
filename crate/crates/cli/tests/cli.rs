use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const ZERO_T: &str =
    r#"{"omega1":1,"omega2":1.5,"gamma1":1,"gamma2":1,"gamma3":0.5,"gamma12":0,"gamma21":0,"temperature":"zero"}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn thermlab(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermlab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("THERMLAB_LOG", "error")
        .output()
        .unwrap()
}

fn result_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice::<Value>(&out.stdout).unwrap()
}

#[test]
fn steady_zero_temperature_is_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", ZERO_T);
    let doc = result_json(&thermlab(&["steady"], &cfg));
    assert_eq!(doc["result"]["kind"], "Unique");
    let pops: Vec<f64> = doc["result"]["populations"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (p, want) in pops.iter().zip([0.0, 0.0, 1.0]) {
        assert!((p - want).abs() < 1e-10);
    }
    assert!(doc["version"].as_str().unwrap().contains(env!("CARGO_PKG_VERSION")));
    assert_eq!(doc["config"]["params"]["temperature"], "zero");
}

#[test]
fn validate_rejects_strong_interference() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"omega1":1,"omega2":1,"gamma1":1,"gamma2":1,"gamma3":0,"gamma12":1.5,"gamma21":1.5,"temperature":"zero"}"#;
    let out = thermlab(&["validate"], &write_config(dir.path(), "bad.json", text));
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "ValidationError");
    assert_eq!(err["violations"][0]["kind"], "KossakowskiViolation");
}

#[test]
fn malformed_configs_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = ZERO_T.replace("\"gamma3\"", "\"gamma9\"");
    let out = thermlab(&["validate"], &write_config(dir.path(), "u.json", &unknown));
    assert_eq!(out.status.code(), Some(2));
    let no_seed = format!(r#"{{"params":{ZERO_T},"initial_state":"random"}}"#);
    let out = thermlab(&["evolve"], &write_config(dir.path(), "s.json", &no_seed));
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "ConfigError");
}

#[test]
fn non_convergent_scan_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"params":{"omega1":1,"omega2":1.5,"gamma1":1,"gamma2":1,"gamma3":0,"gamma12":0,"gamma21":0,"temperature":1},"order":"temperature_first"}"#;
    let out = thermlab(&["ssb-scan"], &write_config(dir.path(), "c.json", text));
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "NoConvergence");
}

#[test]
fn antitherm_symmetric_decay_gives_symmetric_superposition() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"params":{"omega1":1,"omega2":1,"gamma1":1,"gamma2":1,"gamma3":0,"gamma12":1,"gamma21":1,"temperature":"zero"},"initial_state":"e"}"#;
    let doc = result_json(&thermlab(&["antitherm"], &write_config(dir.path(), "a.json", text)));
    let r = &doc["result"];
    let re = |i: usize, j: usize| r["state"]["re"][i][j].as_f64().unwrap();
    for (i, j) in [(1, 1), (2, 2), (1, 2), (2, 1)] {
        assert!((re(i, j) - 0.5).abs() < 1e-12);
    }
    assert!((r["purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(r["max_gap_to_dynamics"].as_f64().unwrap() < 1e-6);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(r#"{{"params":{ZERO_T},"initial_state":"random","seed":9,"t_final":3,"samples":21}}"#);
    let cfg = write_config(dir.path(), "r.json", &text);
    let a = thermlab(&["evolve"], &cfg);
    let b = thermlab(&["evolve"], &cfg);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = thermlab(&["evolve", "--seed", "10"], &cfg);
    assert_ne!(a.stdout, c.stdout);

    let surface = r#"{"params":{"omega1":1,"omega2":1.5,"gamma1":1,"gamma2":1,"gamma3":0,"gamma12":0,"gamma21":0.5,"temperature":1,"gamma3_ohmic":{"alpha":0.5}},"delta_grid":{"start":0,"stop":1,"count":4},"temperature_grid":{"start":0,"stop":2,"count":4}}"#;
    let cfg = write_config(dir.path(), "s.json", surface);
    let one = thermlab(&["entropy-surface", "--jobs", "1"], &cfg);
    let four = thermlab(&["entropy-surface", "--jobs", "4"], &cfg);
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn trajectory_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(r#"{{"params":{ZERO_T},"t_final":2,"samples":11,"method":"expm"}}"#);
    let cfg = write_config(dir.path(), "e.json", &text);
    let out_path = dir.path().join("traj.csv");
    let out = thermlab(&["evolve", "--out", out_path.to_str().unwrap()], &cfg);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        data[0],
        "t,rho_ee,rho_g1g1,rho_g2g2,re_rho_g2g1,im_rho_g2g1,re_rho_eg1,im_rho_eg1,re_rho_eg2,im_rho_eg2"
    );
    assert_eq!(data.len(), 12);
    let last: Vec<f64> = data[11].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 2.0);
    assert!((last[1] - (-4.0f64).exp()).abs() < 1e-10);
    assert!(csv.contains("# config: "));
}

#[test]
fn micro_compare_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"params":{"omega1":1,"omega2":1,"gamma1":1,"gamma2":1,"gamma3":0,"gamma12":1,"gamma21":1,"temperature":"zero"},"micro":{"modes":128}}"#;
    let cfg = write_config(dir.path(), "m.json", text);
    let out_path = dir.path().join("m.csv");
    let out = thermlab(&["micro-compare", "--out", out_path.to_str().unwrap()], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.summary.json")).unwrap()).unwrap();
    assert!(summary["result"]["max_gap"].as_f64().unwrap() <= 0.05);
    assert!(summary["result"]["validity_window"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header.split(',').count(), 28);
}

#[test]
fn dump_generator_reports_bloch_discrepancies() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"omega1":1,"omega2":1.4,"gamma1":0.6,"gamma2":0.9,"gamma3":0.4,"gamma12":0.3,"gamma21":0.2,"temperature":0.8}"#;
    let doc = result_json(&thermlab(&["dump-generator"], &write_config(dir.path(), "d.json", text)));
    let r = &doc["result"];
    assert_eq!(r["liouvillian"]["re"].as_array().unwrap().len(), 9);
    assert!(r["diff_report"]["effective_gap_r"].as_f64().unwrap() < 1e-10);
    for z in r["bloch_derived_eigenvalues"].as_array().unwrap() {
        assert!(z[0].as_f64().unwrap() <= 1e-10);
    }
}
