use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fpcr_cli::data::read_dataset;
use fpcr_core::inference::{significance_test, TestConfig};
use serde_json::Value;

fn fpcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpcr")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
    "schema_version": 1,
    "seed": 3,
    "n": [30],
    "c": [0.0, 0.6],
    "slope_kinds": ["sparsest", "densest"],
    "reps": 8,
    "bootstrap": 40
}"#;

#[test]
fn simulate_writes_rates_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let res = fpcr(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let csv = fs::read_to_string(out.join("rejection_rates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,c,slope_kind,space,statistic,reject_rate,mc_se,mean_J,reps,seed");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1].starts_with("30,0,sparsest,l2,sq,"));
    assert!(lines[1].ends_with(",8,3"));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["reps"], 8);
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let empty = write_config(dir.path(), &SMALL.replace("[30]", "[]"));
    let res = fpcr(&["simulate", "--config", &empty, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("`n`"));

    let broken = write_config(dir.path(), "{ \"schema_version\": 1,\n  \"seed\": }");
    let res = fpcr(&["simulate", "--config", &broken, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));

    let res = fpcr(&["simulate", "--config", "/nonexistent/config.json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
}

#[test]
fn generated_dataset_round_trips_through_test() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("null.csv");
    let res = fpcr(&["generate", "--n", "40", "--seed", "11", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let out = dir.path().join("test");
    let res = fpcr(&["test", "--data", csv.to_str().unwrap(), "--boot", "199", "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("p_sq="));

    let doc: Value = serde_json::from_str(&fs::read_to_string(out.join("test_result.json")).unwrap()).unwrap();
    let data = read_dataset(&csv).unwrap();
    let cfg = TestConfig {
        bootstrap: 199,
        seed: 5,
        ..TestConfig::default()
    };
    let direct = significance_test(&data, &cfg).unwrap();
    assert_eq!(doc["p_sq"].as_f64().unwrap(), direct.p_value_sq);
    assert_eq!(doc["p_sup"].as_f64().unwrap(), direct.p_value_sup);
    assert_eq!(doc["selected_j"].as_u64().unwrap() as usize, direct.truncation);
    assert_eq!(doc["reject_sq"].as_bool().unwrap(), direct.reject_sq);
    assert!(doc["fve_table"].as_array().unwrap().len() >= direct.truncation);

    // identical inputs give a byte-identical document
    let out2 = dir.path().join("test2");
    fpcr(&["test", "--data", csv.to_str().unwrap(), "--boot", "199", "--seed", "5", "--out", out2.to_str().unwrap()]);
    assert_eq!(
        fs::read(out.join("test_result.json")).unwrap(),
        fs::read(out2.join("test_result.json")).unwrap()
    );
}

#[test]
fn test_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let mut single = String::from("y,x_1\n");
    for i in 0..12 {
        single += &format!("{i},{}\n", i * 2);
    }
    let p = dir.path().join("single.csv");
    fs::write(&p, single).unwrap();
    let res = fpcr(&["test", "--data", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);

    let mut flat = String::from("y,x_1,x_2,x_3\n");
    for i in 0..12 {
        flat += &format!("1.0,{i},{},{}\n", i * i, 3 - i);
    }
    let p = dir.path().join("flat.csv");
    fs::write(&p, flat).unwrap();
    let res = fpcr(&["test", "--data", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));

    let res = fpcr(&["test", "--data", p.to_str().unwrap(), "--alpha", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);

    let res = fpcr(&["test", "--data", p.to_str().unwrap(), "--space", "l3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
}

#[test]
fn validate_reports_all_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("validation");
    let res = fpcr(&["validate", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("validation_report.json")).unwrap()).unwrap();
    assert_eq!(report["all_passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    let by_name = |n: &str| checks.iter().find(|c| c["name"] == n).unwrap_or_else(|| panic!("missing {n}"));
    let ratio = by_name("variance_identity_j3")["measured"]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.03);
    let shrink = &by_name("scaled_statistic_shrinkage")["measured"];
    assert!(shrink["mean_w2_n400"].as_f64().unwrap() < shrink["mean_w2_n100"].as_f64().unwrap());
    assert!(out.join("manifest.json").exists());
}
