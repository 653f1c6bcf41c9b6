//! Data generation for the size/power experiment and the Monte Carlo runner.
//!
//! Regressors are centered Gaussian processes with a Matérn covariance,
//! errors are Laplace with unit variance, and slopes are built from the
//! trigonometric basis. Replicate `r` of an experiment draws its curves,
//! errors and bootstrap indices from independent streams keyed by
//! `(seed, r, role)`, so results do not depend on thread scheduling.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::distributions::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{FpcrError, Result};
use crate::fpcr::Dataset;
use crate::function_space::{grid_points, inner_product, GridFunction, Space};
use crate::inference::{significance_test, TestConfig};
use crate::special::bessel_k;
use crate::streams::{derive_seed, stream, ROLE_BOOTSTRAP, ROLE_ERROR, ROLE_GP};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Matérn covariance parameters `(sigma^2, rho, nu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma2: f64,
    pub rho: f64,
    pub nu: f64,
}

impl Default for MaternParams {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            rho: 1.0,
            nu: 1.0,
        }
    }
}

impl MaternParams {
    pub fn new(sigma2: f64, rho: f64, nu: f64) -> Result<Self> {
        let p = Self { sigma2, rho, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma2", self.sigma2), ("rho", self.rho), ("nu", self.nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FpcrError::Domain(format!(
                    "Matérn parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// `C(u1, u2) = sigma^2 2^{1-nu} / Gamma(nu) * r^nu K_nu(r)`, `r = sqrt(2 nu) |u1 - u2| / rho`.
pub fn matern_kernel(u1: f64, u2: f64, p: &MaternParams) -> f64 {
    let d = (u1 - u2).abs();
    if d == 0.0 {
        return p.sigma2;
    }
    let r = (2.0 * p.nu).sqrt() * d / p.rho;
    if !r.is_finite() {
        return 0.0;
    }
    let k = match bessel_k(p.nu, r) {
        Ok(k) => k,
        Err(_) => return 0.0,
    };
    if k == 0.0 {
        return 0.0;
    }
    let log_scale = (1.0 - p.nu) * 2f64.ln() - ln_gamma(p.nu) + p.nu * r.ln();
    p.sigma2 * log_scale.exp() * k
}

/// Matérn kernel evaluated on the uniform `m`-point grid.
pub fn matern_gram(m: usize, p: &MaternParams) -> Result<DMatrix<f64>> {
    p.validate()?;
    let u = grid_points(m)?;
    let mut k = DMatrix::zeros(m, m);
    for a in 0..m {
        k[(a, a)] = p.sigma2;
        for b in 0..a {
            let v = matern_kernel(u[a], u[b], p);
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    Ok(k)
}

/// Lower Cholesky factor of a gridded kernel, with diagonal jitter on failure.
#[derive(Debug, Clone)]
pub struct GpSampler {
    factor: DMatrix<f64>,
    jitter: f64,
}

impl GpSampler {
    /// Tries a plain factorization first, then adds `1e-10 * scale` to the
    /// diagonal and doubles it until it reaches `1e-6 * scale`.
    pub fn new(kernel: &DMatrix<f64>) -> Result<Self> {
        let m = kernel.nrows();
        if kernel.ncols() != m {
            return Err(FpcrError::Dimension {
                context: "kernel columns",
                expected: m,
                found: kernel.ncols(),
            });
        }
        let diag_max = kernel.diagonal().amax();
        let scale = if diag_max > 0.0 { diag_max } else { 1.0 };
        if let Some(ch) = kernel.clone().cholesky() {
            return Ok(Self {
                factor: ch.l(),
                jitter: 0.0,
            });
        }
        let mut jitter = JITTER_START * scale;
        while jitter <= JITTER_MAX * scale {
            let mut k = kernel.clone();
            for i in 0..m {
                k[(i, i)] += jitter;
            }
            if let Some(ch) = k.cholesky() {
                return Ok(Self {
                    factor: ch.l(),
                    jitter,
                });
            }
            jitter *= 2.0;
        }
        Err(FpcrError::Numerical(format!(
            "Cholesky factorization failed with jitter up to {:e}",
            JITTER_MAX * scale
        )))
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Diagonal jitter that was needed (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn grid_size(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridFunction {
        sample_gp(&self.factor, rng)
    }
}

/// `factor * z` with `z` standard normal.
pub fn sample_gp<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> GridFunction {
    let m = factor.nrows();
    let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let x = factor * z;
    GridFunction::new(x.as_slice().to_vec()).expect("finite Gaussian draw")
}

/// Inverse CDF of the Laplace law with mean 0 and variance 1 (scale `1/sqrt 2`).
pub fn laplace_quantile(u: f64) -> f64 {
    let b = 1.0 / SQRT_2;
    if u < 0.5 {
        b * (2.0 * u).ln()
    } else {
        -b * (2.0 * (1.0 - u)).ln()
    }
}

pub fn laplace_error<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    laplace_quantile(rng.sample(Open01))
}

/// The `j`-th trigonometric function: `1`, `sqrt2 sin(2 pi k u)`, `sqrt2 cos(2 pi k u)`, ...
pub fn trig_basis(j: usize, m: usize) -> Result<GridFunction> {
    if j == 0 {
        return Err(FpcrError::Domain("trigonometric basis index starts at 1".into()));
    }
    let k = (j / 2) as f64;
    match j {
        1 => GridFunction::constant(m, 1.0),
        _ if j.is_multiple_of(2) => GridFunction::from_fn(m, |u| SQRT_2 * (2.0 * k * PI * u).sin()),
        _ => GridFunction::from_fn(m, |u| SQRT_2 * (2.0 * k * PI * u).cos()),
    }
}

/// Alternative slope shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeKind {
    Sparsest,
    Sparse,
    Dense,
    Densest,
}

impl SlopeKind {
    pub const ALL: [SlopeKind; 4] = [
        SlopeKind::Sparsest,
        SlopeKind::Sparse,
        SlopeKind::Dense,
        SlopeKind::Densest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SlopeKind::Sparsest => "sparsest",
            SlopeKind::Sparse => "sparse",
            SlopeKind::Dense => "dense",
            SlopeKind::Densest => "densest",
        }
    }
}

impl fmt::Display for SlopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SlopeKind {
    type Err = FpcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sparsest" => Ok(SlopeKind::Sparsest),
            "sparse" => Ok(SlopeKind::Sparse),
            "dense" => Ok(SlopeKind::Dense),
            "densest" => Ok(SlopeKind::Densest),
            other => Err(FpcrError::Domain(format!("unknown slope kind '{other}'"))),
        }
    }
}

fn trig_series(terms: usize, m: usize) -> Result<GridFunction> {
    let coefs: Vec<f64> = (1..=terms).map(|j| 2.75 / (j + 2) as f64).collect();
    let basis: Vec<GridFunction> = (1..=terms).map(|j| trig_basis(j, m)).collect::<Result<_>>()?;
    GridFunction::linear_combination(m, &coefs, &basis)
}

/// `c * beta_1` for the given shape.
pub fn make_slope(kind: SlopeKind, c: f64, m: usize) -> Result<GridFunction> {
    let base = match kind {
        SlopeKind::Sparsest => GridFunction::constant(m, 1.0)?,
        SlopeKind::Sparse => trig_series(3, m)?,
        SlopeKind::Dense => trig_series(100, m)?,
        SlopeKind::Densest => GridFunction::from_fn(m, |u| 1.5 * u * u * u.exp())?,
    };
    Ok(base.scale(c))
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub c: f64,
    pub slope_kind: SlopeKind,
    pub space: Space,
    pub alpha: f64,
    pub bootstrap: usize,
    pub reps: usize,
    pub fve_threshold: f64,
    pub j_max: usize,
    pub seed: u64,
    pub matern: MaternParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 50,
            m: 50,
            c: 0.0,
            slope_kind: SlopeKind::Sparsest,
            space: Space::L2,
            alpha: 0.05,
            bootstrap: 1000,
            reps: 500,
            fve_threshold: 0.75,
            j_max: 20,
            seed: 20_250_101,
            matern: MaternParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(FpcrError::InsufficientData { n: self.n, min: 3 });
        }
        if self.m < self.space.min_grid() {
            return Err(FpcrError::InvalidGrid {
                m: self.m,
                min: self.space.min_grid(),
            });
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(FpcrError::Domain(format!("c must be >= 0, got {}", self.c)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(FpcrError::Domain(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.fve_threshold > 0.0 && self.fve_threshold < 1.0) {
            return Err(FpcrError::Domain(format!(
                "FVE threshold must lie in (0, 1), got {}",
                self.fve_threshold
            )));
        }
        if self.bootstrap == 0 || self.reps == 0 || self.j_max == 0 {
            return Err(FpcrError::Domain(
                "bootstrap, reps and j_max must be positive".into(),
            ));
        }
        self.matern.validate()
    }

    pub fn test_config(&self, seed: u64) -> TestConfig {
        TestConfig {
            alpha: self.alpha,
            bootstrap: self.bootstrap,
            space: self.space,
            fve_threshold: self.fve_threshold,
            j_max: self.j_max,
            seed,
        }
    }
}

/// Precomputed generator for one scenario: GP factor and slope function.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ExperimentConfig,
    sampler: GpSampler,
    slope: GridFunction,
}

impl Simulator {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let sampler = GpSampler::new(&matern_gram(config.m, &config.matern)?)?;
        let slope = make_slope(config.slope_kind, config.c, config.m)?;
        Ok(Self {
            config,
            sampler,
            slope,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn sampler(&self) -> &GpSampler {
        &self.sampler
    }

    pub fn slope(&self) -> &GridFunction {
        &self.slope
    }

    /// `n` regressor curves.
    pub fn draw_curves<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<GridFunction> {
        (0..self.config.n).map(|_| self.sampler.sample(rng)).collect()
    }

    /// Responses `<beta, X_i> + e_i` for given curves (the intercept is zero).
    pub fn responses(
        &self,
        curves: &[GridFunction],
        mut error: impl FnMut() -> f64,
    ) -> Result<Vec<f64>> {
        curves
            .iter()
            .map(|x| Ok(inner_product(&self.slope, x, Space::L2)? + error()))
            .collect()
    }

    pub fn generate_with_errors<R: Rng + ?Sized>(
        &self,
        gp_rng: &mut R,
        error: impl FnMut() -> f64,
    ) -> Result<Dataset> {
        let curves = self.draw_curves(gp_rng);
        let y = self.responses(&curves, error)?;
        Dataset::new(curves, y)
    }

    /// Curves from `gp_rng`, Laplace errors from `err_rng`.
    pub fn generate<R: Rng + ?Sized, E: Rng + ?Sized>(
        &self,
        gp_rng: &mut R,
        err_rng: &mut E,
    ) -> Result<Dataset> {
        self.generate_with_errors(gp_rng, || laplace_error(err_rng))
    }

    /// Dataset of replicate `rep`, drawn from its own streams.
    pub fn dataset_for_rep(&self, rep: u64) -> Result<Dataset> {
        let mut gp = stream(self.config.seed, &[rep, ROLE_GP]);
        let mut err = stream(self.config.seed, &[rep, ROLE_ERROR]);
        self.generate(&mut gp, &mut err)
    }

    pub fn bootstrap_seed(&self, rep: u64) -> u64 {
        derive_seed(self.config.seed, &[rep, ROLE_BOOTSTRAP])
    }
}

/// Draws a dataset for `cfg` using a single stream for curves and errors.
pub fn generate_dataset<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<Dataset> {
    let sim = Simulator::new(cfg.clone())?;
    let curves = sim.draw_curves(rng);
    let y = sim.responses(&curves, || laplace_error(rng))?;
    Dataset::new(curves, y)
}

/// Rejection rates of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub reject_rate_sq: f64,
    pub reject_rate_sup: f64,
    pub mc_se_sq: f64,
    pub mc_se_sup: f64,
    pub mean_selected_j: f64,
    pub completed_reps: usize,
    pub failed_reps: usize,
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    reject_sq: bool,
    reject_sup: bool,
    j: usize,
}

fn run_rep(sim: &Simulator, rep: u64) -> Result<RepOutcome> {
    let data = sim.dataset_for_rep(rep)?;
    let out = significance_test(&data, &sim.config.test_config(sim.bootstrap_seed(rep)))?;
    Ok(RepOutcome {
        reject_sq: out.reject_sq,
        reject_sup: out.reject_sup,
        j: out.truncation,
    })
}

/// Runs `reps` independent replicates and averages the rejection indicators.
/// Fails if more than 1% of replicates fail.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let sim = Simulator::new(cfg.clone())?;
    let outcomes: Vec<Result<RepOutcome>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(&sim, rep))
        .collect();

    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    if failed * 100 > cfg.reps {
        let first = outcomes.iter().find_map(|o| o.as_ref().err()).map(|e| e.to_string());
        return Err(FpcrError::ExperimentAborted {
            failed,
            reps: cfg.reps,
            first: first.unwrap_or_default(),
        });
    }
    let ok: Vec<RepOutcome> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
    let k = ok.len() as f64;
    let rate = |f: fn(&RepOutcome) -> bool| ok.iter().filter(|o| f(o)).count() as f64 / k;
    let se = |p: f64| (p * (1.0 - p) / k).sqrt();
    let reject_rate_sq = rate(|o| o.reject_sq);
    let reject_rate_sup = rate(|o| o.reject_sup);
    Ok(ExperimentResult {
        config: cfg.clone(),
        reject_rate_sq,
        reject_rate_sup,
        mc_se_sq: se(reject_rate_sq),
        mc_se_sup: se(reject_rate_sup),
        mean_selected_j: ok.iter().map(|o| o.j as f64).sum::<f64>() / k,
        completed_reps: ok.len(),
        failed_reps: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matern_examples() {
        let p = MaternParams::default();
        assert_eq!(matern_kernel(0.3, 0.3, &p), 1.0);
        let half = MaternParams::new(1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(matern_kernel(0.0, 1.0, &half), (-1f64).exp(), epsilon = 1e-14);
        // sqrt(2) K_1(sqrt(2)), high-precision reference
        assert_abs_diff_eq!(matern_kernel(0.0, 1.0, &p), 0.444_342_523_632_236_04, epsilon = 1e-12);
    }

    #[test]
    fn matern_half_is_exponential_everywhere() {
        let p = MaternParams::new(2.0, 0.7, 0.5).unwrap();
        for d in [0.01, 0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(matern_kernel(0.0, d, &p), 2.0 * (-d / 0.7f64).exp(), epsilon = 1e-13);
        }
    }

    #[test]
    fn matern_is_continuous_at_zero() {
        let p = MaternParams::default();
        assert!((matern_kernel(0.0, 1e-7, &p) - 1.0).abs() < 1e-6);
        assert!(MaternParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gridded_kernel_is_symmetric_psd() {
        let k = matern_gram(50, &MaternParams::default()).unwrap();
        assert_eq!((&k - k.transpose()).amax(), 0.0);
        let min = k.symmetric_eigenvalues().min();
        assert!(min >= -1e-8, "{min}");
    }

    #[test]
    fn zero_kernel_sampler_uses_jitter() {
        let sampler = GpSampler::new(&DMatrix::zeros(10, 10)).unwrap();
        assert!(sampler.jitter() > 0.0);
        let x = sampler.sample(&mut stream(1, &[]));
        assert!(x.sup_norm() <= 1e-4);
    }

    #[test]
    fn laplace_examples() {
        assert_eq!(laplace_quantile(0.5), 0.0);
        assert!(laplace_quantile(0.25) < 0.0 && laplace_quantile(0.75) > 0.0);
        assert_abs_diff_eq!(laplace_quantile(0.25), -laplace_quantile(0.75), epsilon = 1e-15);
    }

    #[test]
    fn trig_basis_examples() {
        let m = 50;
        assert!(trig_basis(1, m).unwrap().values().iter().all(|&v| v == 1.0));
        let five = trig_basis(2, 5).unwrap();
        assert_abs_diff_eq!(five.values()[1], SQRT_2, epsilon = 1e-15);
        let ip = inner_product(&trig_basis(2, m).unwrap(), &trig_basis(3, m).unwrap(), Space::L2).unwrap();
        assert!(ip.abs() < 1e-3);
        assert!(trig_basis(0, m).is_err());
    }

    #[test]
    fn slope_examples() {
        assert_eq!(make_slope(SlopeKind::Sparsest, 0.0, 50).unwrap().sup_norm(), 0.0);
        let sparse = make_slope(SlopeKind::Sparse, 1.0, 50).unwrap();
        assert_abs_diff_eq!(sparse.values()[0], 2.75 * (1.0 / 3.0 + SQRT_2 / 5.0), epsilon = 1e-14);
        let densest = make_slope(SlopeKind::Densest, 1.0, 50).unwrap();
        assert_abs_diff_eq!(densest.values()[49], 1.5 * std::f64::consts::E, epsilon = 1e-14);
        assert!("medium".parse::<SlopeKind>().is_err());
    }

    #[test]
    fn dense_slope_projections_recover_coefficients() {
        // modes up to 100 need a fine grid to avoid aliasing
        let fine = 4001;
        let beta = make_slope(SlopeKind::Dense, 1.0, fine).unwrap();
        for j in 1..=10 {
            let ip = inner_product(&beta, &trig_basis(j, fine).unwrap(), Space::L2).unwrap();
            assert!((ip - 2.75 / (j + 2) as f64).abs() < 1e-3, "j={j}: {ip}");
        }
    }

    #[test]
    fn null_dataset_has_pure_error_responses() {
        let cfg = ExperimentConfig {
            n: 20,
            ..ExperimentConfig::default()
        };
        let sim = Simulator::new(cfg).unwrap();
        let mut gp = stream(3, &[0]);
        let mut err = stream(3, &[1]);
        let data = sim.generate(&mut gp, &mut err).unwrap();
        let mut err2 = stream(3, &[1]);
        let expected: Vec<f64> = (0..20).map(|_| laplace_error(&mut err2)).collect();
        assert_eq!(data.y(), expected.as_slice());
        assert_eq!(data.n(), 20);
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ExperimentConfig { alpha: 0.0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { alpha: 1.0, ..ok.clone() }.validate().is_ok());
        assert!(ExperimentConfig { fve_threshold: 1.0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { reps: 0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { c: -0.1, ..ok }.validate().is_err());
    }

    #[test]
    fn unit_alpha_always_rejects() {
        let cfg = ExperimentConfig {
            alpha: 1.0,
            reps: 5,
            bootstrap: 20,
            ..ExperimentConfig::default()
        };
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.reject_rate_sq, 1.0);
        assert_eq!(res.reject_rate_sup, 1.0);
        assert_eq!(res.mc_se_sq, 0.0);
    }

    #[test]
    fn experiment_is_reproducible() {
        let cfg = ExperimentConfig {
            reps: 6,
            bootstrap: 50,
            c: 0.4,
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.completed_reps, 6);
    }
}
