use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fpcr_core::function_space::Space;
use fpcr_core::inference::{significance_test, TestConfig, TestOutcome};
use fpcr_core::operators::fve_table;
use fpcr_core::simulation::{run_experiment, ExperimentConfig, ExperimentResult, Simulator, SlopeKind};
use fpcr_core::streams::{stream, ROLE_ERROR, ROLE_GP};
use fpcr_core::validation::{run_suite, CheckResult};
use serde::Serialize;

use crate::config::SimulationConfig;
use crate::data::{read_dataset, write_dataset};
use crate::output::{ensure_dir, fmt17, write_json, Command, RunManifest};
use crate::{CliError, CliResult};

pub const RATES_HEADER: &str = "n,c,slope_kind,space,statistic,reject_rate,mc_se,mean_J,reps,seed";

/// Seed used by `fpcr validate`.
pub const VALIDATION_SEED: u64 = 20_240_917;

fn rate_rows(r: &ExperimentResult) -> [String; 2] {
    let c = &r.config;
    let row = |stat: &str, rate: f64, se: f64| {
        format!(
            "{},{},{},{},{stat},{},{},{},{},{}",
            c.n,
            fmt17(c.c),
            c.slope_kind,
            c.space,
            fmt17(rate),
            fmt17(se),
            fmt17(r.mean_selected_j),
            c.reps,
            c.seed
        )
    };
    [
        row("sq", r.reject_rate_sq, r.mc_se_sq),
        row("sup", r.reject_rate_sup, r.mc_se_sup),
    ]
}

/// Runs every scenario and writes `rejection_rates.csv`.
pub fn simulate(config_path: &Path, out: &Path) -> CliResult<PathBuf> {
    let cfg = SimulationConfig::from_path(config_path)?;
    ensure_dir(out)?;
    RunManifest::new(Command::Simulate, Some(config_path), out, &cfg).write(out)?;

    let mut csv = String::from(RATES_HEADER);
    csv.push('\n');
    for scenario in cfg.scenarios() {
        let result = run_experiment(&scenario)?;
        for row in rate_rows(&result) {
            csv += &row;
            csv.push('\n');
        }
        eprintln!(
            "n={} c={} {} {}: sq {:.3}  sup {:.3}  (mean J {:.2})",
            scenario.n,
            scenario.c,
            scenario.slope_kind,
            scenario.space,
            result.reject_rate_sq,
            result.reject_rate_sup,
            result.mean_selected_j
        );
    }
    let path = out.join("rejection_rates.csv");
    fs::write(&path, csv)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
struct FveRow {
    j: usize,
    eigenvalue: f64,
    cumulative_fve: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TestReport<'a> {
    data: &'a Path,
    n: usize,
    m: usize,
    alpha: f64,
    bootstrap: usize,
    space: Space,
    fve_threshold: f64,
    j_max: usize,
    seed: u64,
    selected_j: usize,
    s_sq: f64,
    s_sup: f64,
    p_sq: f64,
    p_sup: f64,
    reject_sq: bool,
    reject_sup: bool,
    intercept: f64,
    coefficients: &'a [f64],
    fve_table: Vec<FveRow>,
}

/// Tests `beta = 0` on a CSV dataset and writes `test_result.json`.
pub fn test(data_path: &Path, cfg: &TestConfig, out: &Path) -> CliResult<TestOutcome> {
    cfg.validate()?;
    ensure_dir(out)?;
    RunManifest::new(Command::Test, Some(data_path), out, cfg).write(out)?;
    let data = read_dataset(data_path)?;
    let outcome = significance_test(&data, cfg)?;

    let cumulative = fve_table(&outcome.eigenvalues);
    let rows = outcome
        .eigenvalues
        .iter()
        .zip(&cumulative)
        .take(cfg.j_max)
        .enumerate()
        .map(|(k, (&eigenvalue, &cumulative_fve))| FveRow {
            j: k + 1,
            eigenvalue,
            cumulative_fve,
        })
        .collect();
    let report = TestReport {
        data: data_path,
        n: data.n(),
        m: data.grid_size(),
        alpha: cfg.alpha,
        bootstrap: cfg.bootstrap,
        space: cfg.space,
        fve_threshold: cfg.fve_threshold,
        j_max: cfg.j_max,
        seed: cfg.seed,
        selected_j: outcome.truncation,
        s_sq: outcome.s_sq,
        s_sup: outcome.s_sup,
        p_sq: outcome.p_value_sq,
        p_sup: outcome.p_value_sup,
        reject_sq: outcome.reject_sq,
        reject_sup: outcome.reject_sup,
        intercept: outcome.intercept,
        coefficients: &outcome.coefficients,
        fve_table: rows,
    };
    write_json(&out.join("test_result.json"), &report)?;
    println!(
        "n={} m={} J={} p_sq={:.4} p_sup={:.4} reject_sq={} reject_sup={} (alpha={})",
        data.n(),
        data.grid_size(),
        outcome.truncation,
        outcome.p_value_sq,
        outcome.p_value_sup,
        outcome.reject_sq,
        outcome.reject_sup,
        cfg.alpha
    );
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
struct ValidationReport<'a> {
    tool_version: &'static str,
    seed: u64,
    all_passed: bool,
    checks: &'a [CheckResult],
}

/// Runs the validation suite and writes `validation_report.json`.
pub fn validate(out: &Path) -> CliResult<Vec<CheckResult>> {
    ensure_dir(out)?;
    RunManifest::new(Command::Validate, None, out, VALIDATION_SEED).write(out)?;
    let checks = run_suite(VALIDATION_SEED);
    let all_passed = checks.iter().all(|c| c.passed);
    write_json(
        &out.join("validation_report.json"),
        &ValidationReport {
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: VALIDATION_SEED,
            all_passed,
            checks: &checks,
        },
    )?;
    for c in &checks {
        println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    if !all_passed {
        let mut failed = String::new();
        for c in checks.iter().filter(|c| !c.passed) {
            let _ = write!(failed, "{} ", c.name);
        }
        return Err(CliError::Validation(failed.trim_end().to_string()));
    }
    Ok(checks)
}

/// Settings of `fpcr generate`.
#[derive(Debug, Clone, Serialize)]
pub struct GenerateConfig {
    pub n: usize,
    pub m: usize,
    pub c: f64,
    pub slope_kind: SlopeKind,
    pub seed: u64,
}

/// Writes one simulated dataset (Matérn curves, Laplace errors) as CSV.
pub fn generate(cfg: &GenerateConfig, out_file: &Path) -> CliResult<()> {
    let sim = Simulator::new(ExperimentConfig {
        n: cfg.n,
        m: cfg.m,
        c: cfg.c,
        slope_kind: cfg.slope_kind,
        seed: cfg.seed,
        ..ExperimentConfig::default()
    })?;
    let data = sim.generate(&mut stream(cfg.seed, &[ROLE_GP]), &mut stream(cfg.seed, &[ROLE_ERROR]))?;
    if let Some(dir) = out_file.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_dataset(out_file, &data)
}
