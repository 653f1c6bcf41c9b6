//! Numerical experiments that check the implementation against known
//! identities and the large-sample theory. Each check returns its measured
//! values; [`run_suite`] bundles them into a report.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

use crate::error::{FpcrError, Result};
use crate::fpcr::{decompose_regressors, fit_fpcr, fit_fpcr_leastsquares, fit_with_eigensystem, Dataset};
use crate::function_space::{inner_product, norm, GridFunction, Space};
use crate::inference::{
    select_truncation, statistic_t, variance_identity_check, GaussianReference, ResidualBootstrap,
};
use crate::metrics::{kolmogorov_distance, wasserstein2_1d, wasserstein2_hilbert, FunctionSample, ScalarSample};
use crate::operators::{eigen_decompose, CovarianceOperator, EigenSystem};
use crate::simulation::{laplace_error, make_slope, matern_gram, GpSampler, MaternParams, SlopeKind};
use crate::special::chi_square_mode_density;
use crate::streams::{derive_seed, stream, ROLE_BOOTSTRAP, ROLE_ERROR, ROLE_GP, ROLE_REFERENCE};

/// One named check with its measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub requirement: String,
    pub measured: BTreeMap<String, f64>,
}

impl CheckResult {
    fn new(name: &str, passed: bool, requirement: &str, measured: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            passed,
            requirement: requirement.to_string(),
            measured: measured.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn failed(name: &str, requirement: &str, err: &FpcrError) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            requirement: format!("{requirement} (error: {err})"),
            measured: BTreeMap::new(),
        }
    }
}

fn matern_sampler(m: usize) -> Result<GpSampler> {
    GpSampler::new(&matern_gram(m, &MaternParams::default())?)
}

fn panel<R: Rng + ?Sized>(sampler: &GpSampler, n: usize, rng: &mut R) -> Vec<GridFunction> {
    (0..n).map(|_| sampler.sample(rng)).collect()
}

/// Largest absolute coefficient difference between the spectral and the
/// least-squares estimators over random instances.
pub fn estimator_equivalence(seed: u64, instances: usize) -> Result<f64> {
    let worst: Vec<f64> = (0..instances as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[k]);
            let n = rng.gen_range(20..=100);
            let m = rng.gen_range(20..=50);
            let j = rng.gen_range(1..=8);
            let space = if k % 2 == 0 { Space::L2 } else { Space::W12 };
            let x = panel(&matern_sampler(m)?, n, &mut rng);
            let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let data = Dataset::new(x, y)?;
            let a = fit_fpcr(&data, j, space)?;
            let b = fit_fpcr_leastsquares(&data, j, space)?;
            Ok(a.coefficients()
                .iter()
                .zip(b.coefficients())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Monte Carlo ratio `E||Gamma_J^{-1/2} U_n||^2 / (sigma^2 J/n)` for each `J`,
/// on one fixed Matérn panel with unit-variance Gaussian errors.
pub fn variance_identity(seed: u64, n: usize, js: &[usize], n_mc: usize) -> Result<Vec<(usize, f64)>> {
    let sampler = matern_sampler(50)?;
    let x = panel(&sampler, n, &mut stream(seed, &[ROLE_GP]));
    let data = Dataset::new(x, vec![0.0; n])?;
    js.par_iter()
        .map(|&j| {
            let mut rng = stream(seed, &[ROLE_ERROR, j as u64]);
            Ok((j, variance_identity_check(&data, Space::L2, j, n_mc, 1.0, &mut rng)?))
        })
        .collect()
}

/// Smallest `sqrt2 ||f||_{W12} - max|f|` over random polynomial plus
/// trigonometric mixtures on an `m`-point grid.
pub fn sobolev_embedding(seed: u64, count: usize, m: usize) -> Result<f64> {
    let mut rng = stream(seed, &[]);
    let mut min_slack = f64::INFINITY;
    for _ in 0..count {
        let poly: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let trig: Vec<(f64, f64)> = (0..4)
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let f = GridFunction::from_fn(m, |u| {
            let p = poly.iter().rev().fold(0.0, |acc, c| acc * u + c);
            let t: f64 = trig
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = 2.0 * std::f64::consts::PI * (k + 1) as f64 * u;
                    a * w.sin() + b * w.cos()
                })
                .sum();
            p + t
        })?;
        let slack = 2f64.sqrt() * norm(&f, Space::W12)? - f.sup_norm();
        min_slack = min_slack.min(slack);
    }
    Ok(min_slack)
}

/// Largest gap between the closed-form peak of the chi-square density and a
/// fine-grid maximization of `statrs`' density.
pub fn chi_square_mode_grid(js: &[usize]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &j in js {
        let chi = ChiSquared::new(j as f64).map_err(|e| FpcrError::Numerical(e.to_string()))?;
        let steps = 200_000;
        let upper = 3.0 * j as f64;
        let grid_max = (1..=steps)
            .map(|k| chi.pdf(upper * k as f64 / steps as f64))
            .fold(0.0, f64::max);
        worst = worst.max((chi_square_mode_density(j)? - grid_max).abs());
    }
    Ok(worst)
}

/// Relative change of `M_J sqrt(J)` between `J = 500` and `J = 1000`.
pub fn chi_square_mode_scaling() -> Result<f64> {
    let a = chi_square_mode_density(500)? * 500f64.sqrt();
    let b = chi_square_mode_density(1000)? * 1000f64.sqrt();
    Ok((b - a).abs() / a)
}

fn random_curves<R: Rng + ?Sized>(rng: &mut R, count: usize, m: usize, shift: f64) -> Vec<GridFunction> {
    (0..count)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let c: f64 = rng.sample(StandardNormal);
            GridFunction::from_fn(m, |u| shift + a + b * u + c * (5.0 * u).cos()).unwrap()
        })
        .collect()
}

fn brute_force_w2(a: &[GridFunction], b: &[GridFunction], space: Space) -> Result<f64> {
    let n = a.len();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = norm(&a[i].axpy(-1.0, &b[j])?, space)?.powi(2);
        }
    }
    // Heap's algorithm over all permutations
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>();
    let mut best = total(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(total(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best / n as f64).sqrt())
}

/// Largest gap between the assignment-based distance and exhaustive search
/// over all pairings of `N = 8` curves.
pub fn wasserstein_bruteforce(seed: u64, pairs: usize) -> Result<f64> {
    let gaps: Vec<f64> = (0..pairs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[k]);
            let space = if k % 2 == 0 { Space::L2 } else { Space::W12 };
            let a = random_curves(&mut rng, 8, 20, 0.0);
            let b = random_curves(&mut rng, 8, 20, 0.5);
            let fast = wasserstein2_hilbert(
                &FunctionSample::new(a.clone(), space)?,
                &FunctionSample::new(b.clone(), space)?,
            )?;
            Ok((fast - brute_force_w2(&a, &b, space)?).abs())
        })
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// `|W2 - exact|` for samples of `N(0,1)` and `N(1,2)`.
pub fn wasserstein_gaussian(seed: u64, n: usize) -> Result<f64> {
    let mut rng = stream(seed, &[]);
    let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let b: Vec<f64> = (0..n)
        .map(|_| 1.0 + 2f64.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let w = wasserstein2_1d(&ScalarSample::new(a)?, &ScalarSample::new(b)?)?;
    let exact = (1.0 + (2f64.sqrt() - 1.0).powi(2)).sqrt();
    Ok((w - exact).abs())
}

/// Worst violation of symmetry, identity and the triangle inequality.
pub fn metric_axioms(seed: u64, triples: usize) -> Result<f64> {
    let mut rng = stream(seed, &[]);
    let mut worst: f64 = 0.0;
    for k in 0..triples {
        let space = if k % 2 == 0 { Space::L2 } else { Space::W12 };
        let mut sample = |shift| FunctionSample::new(random_curves(&mut rng, 16, 25, shift), space);
        let (a, b, c) = (sample(0.0)?, sample(0.3)?, sample(-0.2)?);
        let ab = wasserstein2_hilbert(&a, &b)?;
        let ba = wasserstein2_hilbert(&b, &a)?;
        let ac = wasserstein2_hilbert(&a, &c)?;
        let cb = wasserstein2_hilbert(&c, &b)?;
        worst = worst
            .max((ab - ba).abs())
            .max(wasserstein2_hilbert(&a, &a)?)
            .max(ab - ac - cb);
        let xs: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (xs, ys) = (ScalarSample::new(xs)?, ScalarSample::new(ys)?);
        worst = worst
            .max((wasserstein2_1d(&xs, &ys)? - wasserstein2_1d(&ys, &xs)?).abs())
            .max((kolmogorov_distance(&xs, &ys) - kolmogorov_distance(&ys, &xs)).abs());
    }
    Ok(worst)
}

/// Eigensystem of the gridded Matérn kernel itself.
pub fn population_eigensystem(m: usize, space: Space) -> Result<EigenSystem> {
    let op = CovarianceOperator::from_kernel(matern_gram(m, &MaternParams::default())?, space)?;
    eigen_decompose(&op)
}

/// KS distance between `J ||G||^2` for reference draws and the `chi^2(J)` law.
pub fn reference_chi_square(seed: u64, j: usize, draws: usize) -> Result<f64> {
    let pop = population_eigensystem(50, Space::L2)?;
    let reference = GaussianReference::new(pop.eigenfunctions()[..j].to_vec(), 1.0, Space::L2)?;
    let mut rng = stream(seed, &[ROLE_REFERENCE]);
    let mut v: Vec<f64> = (0..draws)
        .map(|_| Ok(j as f64 * norm(&reference.sample(&mut rng)?, Space::L2)?.powi(2)))
        .collect::<Result<_>>()?;
    v.sort_by(f64::total_cmp);
    let chi = ChiSquared::new(j as f64).map_err(|e| FpcrError::Numerical(e.to_string()))?;
    let n = draws as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = chi.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

/// Settings of the shrinkage experiment for the scaled statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageConfig {
    pub small_n: usize,
    pub large_n: usize,
    pub draws: usize,
    pub truncation: usize,
    pub c: f64,
    pub m: usize,
}

impl Default for ShrinkageConfig {
    fn default() -> Self {
        Self {
            small_n: 100,
            large_n: 400,
            draws: 256,
            truncation: 3,
            c: 0.4,
            m: 50,
        }
    }
}

/// `W2` to the Gaussian reference at both sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkageRep {
    pub w_small: f64,
    pub w_large: f64,
}

fn conditional_draws(
    seed: u64,
    n: usize,
    cfg: &ShrinkageConfig,
    sampler: &GpSampler,
    beta: &GridFunction,
) -> Result<Vec<GridFunction>> {
    let x = panel(sampler, n, &mut stream(seed, &[n as u64, ROLE_GP]));
    let signal: Vec<f64> = x
        .iter()
        .map(|xi| inner_product(beta, xi, Space::L2))
        .collect::<Result<_>>()?;
    let base = Dataset::new(x, signal.clone())?;
    let es: Arc<EigenSystem> = decompose_regressors(&base, Space::L2)?;
    (0..cfg.draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = stream(seed, &[n as u64, ROLE_ERROR, d]);
            let y: Vec<f64> = signal.iter().map(|s| s + laplace_error(&mut rng)).collect();
            let fit = fit_with_eigensystem(&base.with_responses(y)?, es.clone(), cfg.truncation)?;
            Ok(statistic_t(&fit, beta, n)?.t_function)
        })
        .collect()
}

/// One repetition: conditional draws of `T_J` on fixed panels of two sizes,
/// compared with draws of `sigma J^{-1/2} G_J` built from the population
/// eigenfunctions (`sigma = 1`, Laplace errors, sparse slope).
pub fn shrinkage_rep(seed: u64, cfg: &ShrinkageConfig) -> Result<ShrinkageRep> {
    let sampler = matern_sampler(cfg.m)?;
    let beta = make_slope(SlopeKind::Sparse, cfg.c, cfg.m)?;
    let pop = population_eigensystem(cfg.m, Space::L2)?;
    let reference = GaussianReference::new(pop.eigenfunctions()[..cfg.truncation].to_vec(), 1.0, Space::L2)?;
    let mut rng = stream(seed, &[ROLE_REFERENCE]);
    let ref_draws: Vec<GridFunction> = (0..cfg.draws)
        .map(|_| reference.sample(&mut rng))
        .collect::<Result<_>>()?;
    let ref_sample = FunctionSample::new(ref_draws, Space::L2)?;

    let mut w = [0.0; 2];
    for (slot, n) in [cfg.small_n, cfg.large_n].into_iter().enumerate() {
        let t = conditional_draws(seed, n, cfg, &sampler, &beta)?;
        w[slot] = wasserstein2_hilbert(&FunctionSample::new(t, Space::L2)?, &ref_sample)?;
    }
    Ok(ShrinkageRep {
        w_small: w[0],
        w_large: w[1],
    })
}

/// Settings of the bootstrap calibration experiment under the null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationConfig {
    pub n: usize,
    pub draws: usize,
    pub bootstrap: usize,
    pub fve_threshold: f64,
    pub j_max: usize,
    pub m: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n: 200,
            draws: 256,
            bootstrap: 256,
            fve_threshold: 0.75,
            j_max: 20,
            m: 50,
        }
    }
}

/// KS distance between conditional draws of `S_sq` under `beta = 0` and the
/// bootstrap replicates from one dataset on the same panel.
pub fn calibration_rep(seed: u64, cfg: &CalibrationConfig) -> Result<f64> {
    let sampler = matern_sampler(cfg.m)?;
    let x = panel(&sampler, cfg.n, &mut stream(seed, &[ROLE_GP]));
    let base = Dataset::new(x, vec![0.0; cfg.n])?;
    let es = decompose_regressors(&base, Space::L2)?;
    let j = select_truncation(&es, cfg.fve_threshold, cfg.j_max)?;
    let zero = GridFunction::zeros(cfg.m)?;
    let errors = |d: u64| -> Vec<f64> {
        let mut rng = stream(seed, &[ROLE_ERROR, d]);
        (0..cfg.n).map(|_| laplace_error(&mut rng)).collect()
    };

    let conditional: Vec<f64> = (0..cfg.draws as u64)
        .into_par_iter()
        .map(|d| {
            let fit = fit_with_eigensystem(&base.with_responses(errors(d))?, es.clone(), j)?;
            Ok(statistic_t(&fit, &zero, cfg.n)?.s_sq)
        })
        .collect::<Result<_>>()?;

    let observed = base.with_responses(errors(cfg.draws as u64))?;
    let fit = fit_with_eigensystem(&observed, es.clone(), j)?;
    let boot = ResidualBootstrap::new(&fit, &observed)?;
    let replicates: Vec<f64> = (0..cfg.bootstrap as u64)
        .into_par_iter()
        .map(|b| Ok(boot.replicate(&mut stream(seed, &[ROLE_BOOTSTRAP, b]))?.s_sq))
        .collect::<Result<_>>()?;
    Ok(kolmogorov_distance(
        &ScalarSample::new(conditional)?,
        &ScalarSample::new(replicates)?,
    ))
}

/// Seeds of the ten repetitions used by the shrinkage and calibration checks.
pub fn repetition_seeds(seed: u64, reps: usize) -> Vec<u64> {
    (0..reps as u64).map(|r| derive_seed(seed, &[r])).collect()
}

fn check(name: &str, requirement: &str, f: impl FnOnce() -> Result<(bool, Vec<(&'static str, f64)>)>) -> CheckResult {
    match f() {
        Ok((passed, measured)) => CheckResult::new(name, passed, requirement, &measured),
        Err(e) => CheckResult::failed(name, requirement, &e),
    }
}

/// Runs every check with fixed seeds.
pub fn run_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(check("estimator_equivalence", "max |b_spectral - b_lsq| < 1e-8 over 200 instances", || {
        let d = estimator_equivalence(derive_seed(seed, &[1]), 200)?;
        Ok((d < 1e-8, vec![("max_discrepancy", d)]))
    }));
    match variance_identity(derive_seed(seed, &[2]), 50, &[1, 3, 5], 20_000) {
        Ok(ratios) => {
            for (j, r) in ratios {
                let name = format!("variance_identity_j{j}");
                out.push(CheckResult::new(&name, (0.97..=1.03).contains(&r), "ratio in [0.97, 1.03]", &[("ratio", r)]));
            }
        }
        Err(e) => out.push(CheckResult::failed("variance_identity", "ratio in [0.97, 1.03]", &e)),
    }
    out.push(check("sobolev_embedding", "min slack >= 0 over 1000 mixtures", || {
        let s = sobolev_embedding(derive_seed(seed, &[3]), 1000, 50)?;
        Ok((s >= 0.0, vec![("min_slack", s)]))
    }));
    out.push(check("chi_square_mode_density", "closed form within 1e-6 of grid maximum for J in {5, 10, 50}", || {
        let d = chi_square_mode_grid(&[5, 10, 50])?;
        Ok((d < 1e-6, vec![("max_abs_error", d)]))
    }));
    out.push(check("chi_square_mode_scaling", "M_J sqrt(J) changes < 2% from J=500 to J=1000", || {
        let d = chi_square_mode_scaling()?;
        Ok((d < 0.02, vec![("relative_change", d)]))
    }));
    out.push(check("wasserstein_bruteforce", "assignment equals exhaustive search within 1e-10 (N=8, 50 pairs)", || {
        let d = wasserstein_bruteforce(derive_seed(seed, &[4]), 50)?;
        Ok((d < 1e-10, vec![("max_abs_error", d)]))
    }));
    out.push(check("wasserstein_gaussian", "|W2 - closed form| < 0.05", || {
        let d = wasserstein_gaussian(derive_seed(seed, &[5]), 4000)?;
        Ok((d < 0.05, vec![("abs_error", d)]))
    }));
    out.push(check("metric_axioms", "worst axiom violation < 1e-10", || {
        let d = metric_axioms(derive_seed(seed, &[6]), 20)?;
        Ok((d < 1e-10, vec![("worst_violation", d)]))
    }));
    out.push(check("gaussian_reference_chi_square", "KS distance to chi2(5) below the 1% critical value", || {
        let n = 10_000;
        let d = reference_chi_square(derive_seed(seed, &[7]), 5, n)?;
        let crit = 1.63 / (n as f64).sqrt();
        Ok((d < crit, vec![("ks", d), ("critical", crit)]))
    }));
    out.push(check("scaled_statistic_shrinkage", "W2(n=400) < W2(n=100) in >= 8 of 10 repetitions", || {
        let cfg = ShrinkageConfig::default();
        let reps: Vec<ShrinkageRep> = repetition_seeds(derive_seed(seed, &[8]), 10)
            .into_iter()
            .map(|s| shrinkage_rep(s, &cfg))
            .collect::<Result<_>>()?;
        let wins = reps.iter().filter(|r| r.w_large < r.w_small).count();
        let mean = |f: fn(&ShrinkageRep) -> f64| reps.iter().map(f).sum::<f64>() / reps.len() as f64;
        Ok((
            wins >= 8,
            vec![
                ("wins", wins as f64),
                ("mean_w2_n100", mean(|r| r.w_small)),
                ("mean_w2_n400", mean(|r| r.w_large)),
            ],
        ))
    }));
    out.push(check("bootstrap_calibration", "KS(S_sq, S*_sq) < 0.15 in >= 8 of 10 repetitions", || {
        let cfg = CalibrationConfig::default();
        let ks: Vec<f64> = repetition_seeds(derive_seed(seed, &[9]), 10)
            .into_iter()
            .map(|s| calibration_rep(s, &cfg))
            .collect::<Result<_>>()?;
        let passes = ks.iter().filter(|&&k| k < 0.15).count();
        let max = ks.iter().cloned().fold(0.0, f64::max);
        Ok((passes >= 8, vec![("passes", passes as f64), ("max_ks", max)]))
    }));
    out
}
