//! Scaled test statistics, the residual bootstrap and the Gaussian reference law.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FpcrError, Result};
use crate::fpcr::{decompose_regressors, fit_with_eigensystem, Dataset, FpcrFit};
use crate::function_space::{inner_product, norm, GridFunction, Space};
use crate::operators::{fve_select_j, EigenSystem};
use crate::streams::{stream, ROLE_BOOTSTRAP};

pub use crate::special::chi_square_mode_density;

/// `T = sqrt(n/J) Gamma_J^{1/2} (beta_hat - beta_ref)` with its two summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledStatistic {
    pub t_function: GridFunction,
    /// `int T(u)^2 du`
    pub s_sq: f64,
    /// `max_k |T(u_k)|`
    pub s_sup: f64,
}

impl ScaledStatistic {
    pub fn from_function(t_function: GridFunction) -> Result<Self> {
        let s_sq = inner_product(&t_function, &t_function, Space::L2)?;
        let s_sup = t_function.sup_norm();
        Ok(Self {
            t_function,
            s_sq,
            s_sup,
        })
    }
}

/// Scaled statistic of `fit` around `beta_ref`.
pub fn statistic_t(fit: &FpcrFit, beta_ref: &GridFunction, n: usize) -> Result<ScaledStatistic> {
    if n == 0 {
        return Err(FpcrError::InsufficientData { n, min: 1 });
    }
    let j = fit.truncation();
    let diff = fit.beta_hat().axpy(-1.0, beta_ref)?;
    let t = fit
        .eigensystem()
        .pseudo_power_apply(0.5, j, &diff)?
        .scale((n as f64 / j as f64).sqrt());
    ScaledStatistic::from_function(t)
}

/// Resamples residuals of a fixed fit. The eigensystem and the scores are
/// reused, so each replicate costs `O(nJ + Jm)`.
#[derive(Debug, Clone)]
pub struct ResidualBootstrap<'a> {
    fit: &'a FpcrFit,
    fitted: Vec<f64>,
    sqrt_gamma: Vec<f64>,
}

impl<'a> ResidualBootstrap<'a> {
    pub fn new(fit: &'a FpcrFit, data: &Dataset) -> Result<Self> {
        if data.n() != fit.n() {
            return Err(FpcrError::Dimension {
                context: "bootstrap sample size",
                expected: fit.n(),
                found: data.n(),
            });
        }
        let sqrt_gamma = fit.eigensystem().eigenvalues()[..fit.truncation()]
            .iter()
            .map(|g| g.max(0.0).sqrt())
            .collect();
        Ok(Self {
            fit,
            fitted: fit.fitted_values(),
            sqrt_gamma,
        })
    }

    /// Replicate with residual indices `indices` (`Y*_i = fitted_i + e_{indices[i]}`).
    pub fn replicate_with_indices(&self, indices: &[usize]) -> Result<ScaledStatistic> {
        let fit = self.fit;
        let n = fit.n();
        let j = fit.truncation();
        if indices.len() != n {
            return Err(FpcrError::Dimension {
                context: "bootstrap indices",
                expected: n,
                found: indices.len(),
            });
        }
        let resid = fit.residuals();
        let mut y_star = Vec::with_capacity(n);
        for &k in indices {
            let e = *resid.get(k).ok_or_else(|| {
                FpcrError::Precondition(format!("bootstrap index {k} out of range 0..{n}"))
            })?;
            y_star.push(e);
        }
        for (y, f) in y_star.iter_mut().zip(&self.fitted) {
            *y += f;
        }
        let y_bar = y_star.iter().sum::<f64>() / n as f64;

        let gammas = fit.eigensystem().eigenvalues();
        let mut weights = vec![0.0; j];
        for (i, y) in y_star.iter().enumerate() {
            let dy = y - y_bar;
            for (l, w) in weights.iter_mut().enumerate() {
                *w += fit.score(i, l) * dy;
            }
        }
        let scale = (n as f64 / j as f64).sqrt();
        for l in 0..j {
            let coef_star = weights[l] / (n as f64 * gammas[l]);
            weights[l] = scale * self.sqrt_gamma[l] * (coef_star - fit.coefficients()[l]);
        }
        ScaledStatistic::from_function(fit.eigensystem().synthesize(&weights)?)
    }

    pub fn replicate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ScaledStatistic> {
        let n = self.fit.n();
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        self.replicate_with_indices(&idx)
    }
}

/// One bootstrap replicate `T*` of `fit`.
pub fn bootstrap_replicate<R: Rng + ?Sized>(
    fit: &FpcrFit,
    data: &Dataset,
    rng: &mut R,
) -> Result<ScaledStatistic> {
    ResidualBootstrap::new(fit, data)?.replicate(rng)
}

pub fn bootstrap_replicate_with_indices(
    fit: &FpcrFit,
    data: &Dataset,
    indices: &[usize],
) -> Result<ScaledStatistic> {
    ResidualBootstrap::new(fit, data)?.replicate_with_indices(indices)
}

/// Settings of the no-effect test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub bootstrap: usize,
    pub space: Space,
    pub fve_threshold: f64,
    pub j_max: usize,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bootstrap: 1000,
            space: Space::L2,
            fve_threshold: 0.75,
            j_max: 20,
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(FpcrError::Domain(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.bootstrap == 0 {
            return Err(FpcrError::Domain("at least one bootstrap replicate is required".into()));
        }
        if !(self.fve_threshold > 0.0 && self.fve_threshold < 1.0) {
            return Err(FpcrError::Domain(format!(
                "FVE threshold must lie in (0, 1), got {}",
                self.fve_threshold
            )));
        }
        if self.j_max == 0 {
            return Err(FpcrError::Domain("J_max must be positive".into()));
        }
        Ok(())
    }
}

/// Result of the no-effect test `beta = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub truncation: usize,
    pub s_sq: f64,
    pub s_sup: f64,
    pub p_value_sq: f64,
    pub p_value_sup: f64,
    pub reject_sq: bool,
    pub reject_sup: bool,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub bootstrap: usize,
}

/// Monte Carlo p-value `(1 + #{S* >= S}) / (B + 1)`.
pub fn bootstrap_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

fn check_not_degenerate(data: &Dataset) -> Result<()> {
    let y0 = data.y()[0];
    if data.y().iter().all(|&y| y == y0) {
        return Err(FpcrError::DegenerateData("all responses are equal".into()));
    }
    let x0 = &data.x()[0];
    if data.x().iter().all(|x| x == x0) {
        return Err(FpcrError::DegenerateData("regressor curves are all identical".into()));
    }
    Ok(())
}

/// FVE-selected truncation, capped at the numerical rank.
pub fn select_truncation(es: &EigenSystem, threshold: f64, j_max: usize) -> Result<usize> {
    let j = fve_select_j(es.eigenvalues(), threshold, j_max)?;
    Ok(j.min(es.rank()).max(1))
}

/// Bootstrap test of `H0: beta = 0` with both the L2 and the sup statistic.
/// Replicate `b` draws from stream `(seed, BOOTSTRAP, b)`, so the outcome is
/// identical for any thread count.
pub fn significance_test(data: &Dataset, cfg: &TestConfig) -> Result<TestOutcome> {
    cfg.validate()?;
    check_not_degenerate(data)?;
    let es: Arc<EigenSystem> = decompose_regressors(data, cfg.space)?;
    if es.eigenvalues().first().is_none_or(|&g| g <= 0.0) {
        return Err(FpcrError::DegenerateData("regressor covariance is zero".into()));
    }
    let j = select_truncation(&es, cfg.fve_threshold, cfg.j_max)?;
    let fit = fit_with_eigensystem(data, es, j)?;
    let zero = GridFunction::zeros(data.grid_size())?;
    let observed = statistic_t(&fit, &zero, data.n())?;

    let boot = ResidualBootstrap::new(&fit, data)?;
    let draws: Vec<(f64, f64)> = (0..cfg.bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(cfg.seed, &[ROLE_BOOTSTRAP, b]);
            boot.replicate(&mut rng).map(|s| (s.s_sq, s.s_sup))
        })
        .collect::<Result<_>>()?;
    let sq: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let sup: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let p_value_sq = bootstrap_p_value(observed.s_sq, &sq);
    let p_value_sup = bootstrap_p_value(observed.s_sup, &sup);

    Ok(TestOutcome {
        truncation: j,
        s_sq: observed.s_sq,
        s_sup: observed.s_sup,
        p_value_sq,
        p_value_sup,
        reject_sq: p_value_sq <= cfg.alpha,
        reject_sup: p_value_sup <= cfg.alpha,
        intercept: fit.intercept(),
        coefficients: fit.coefficients().to_vec(),
        eigenvalues: fit.eigensystem().eigenvalues().to_vec(),
        beta_hat: fit.beta_hat().values().to_vec(),
        bootstrap: cfg.bootstrap,
    })
}

/// Draws `sigma J^{-1/2} sum_j Z_j phi_j` for an orthonormal `basis`.
#[derive(Debug, Clone)]
pub struct GaussianReference {
    basis: Vec<GridFunction>,
    scale: f64,
}

impl GaussianReference {
    pub fn new(basis: Vec<GridFunction>, sigma: f64, space: Space) -> Result<Self> {
        if basis.is_empty() {
            return Err(FpcrError::Domain("reference basis is empty".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(FpcrError::Domain(format!("sigma must be >= 0, got {sigma}")));
        }
        for a in 0..basis.len() {
            for b in 0..=a {
                let ip = inner_product(&basis[a], &basis[b], space)?;
                let target = if a == b { 1.0 } else { 0.0 };
                if (ip - target).abs() > 1e-6 {
                    return Err(FpcrError::Precondition(format!(
                        "basis is not orthonormal: <phi_{}, phi_{}> = {ip}",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        let scale = sigma / (basis.len() as f64).sqrt();
        Ok(Self { basis, scale })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GridFunction> {
        let z: Vec<f64> = (0..self.basis.len())
            .map(|_| self.scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        GridFunction::linear_combination(self.basis[0].grid_size(), &z, &self.basis)
    }
}

pub fn sample_gaussian_reference<R: Rng + ?Sized>(
    basis: &[GridFunction],
    sigma: f64,
    space: Space,
    rng: &mut R,
) -> Result<GridFunction> {
    GaussianReference::new(basis.to_vec(), sigma, space)?.sample(rng)
}

/// Leading `J` eigenfunctions of a system, for use as a reference basis.
pub fn leading_basis(es: &EigenSystem, j: usize) -> Result<Vec<GridFunction>> {
    if j == 0 || j > es.len() {
        return Err(FpcrError::Dimension {
            context: "reference basis size",
            expected: es.len(),
            found: j,
        });
    }
    Ok(es.eigenfunctions()[..j].to_vec())
}

/// Monte Carlo estimate of `E ||Gamma_J^{-1/2} U_n||^2 / (sigma^2 J / n)`
/// with `U_n = n^{-1} sum (X_i - Xbar) e_i` and errors from `draw`.
/// The regressors are held fixed; the ratio should be close to 1.
pub fn variance_identity_ratio_with(
    data: &Dataset,
    space: Space,
    j: usize,
    n_mc: usize,
    sigma: f64,
    mut draw: impl FnMut() -> f64,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(FpcrError::Domain("n_mc must be positive".into()));
    }
    if !(sigma > 0.0) {
        return Err(FpcrError::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let es = decompose_regressors(data, space)?;
    let n = data.n();
    let m = data.grid_size();
    let centered: Vec<GridFunction> = data
        .x()
        .iter()
        .map(|x| x.axpy(-1.0, es.mean()))
        .collect::<Result<_>>()?;
    let mut acc = 0.0;
    let mut errors = vec![0.0; n];
    for _ in 0..n_mc {
        for e in errors.iter_mut() {
            *e = draw() / n as f64;
        }
        let u = GridFunction::linear_combination(m, &errors, &centered)?;
        let v = es.pseudo_power_apply(-0.5, j, &u)?;
        acc += norm(&v, space)?.powi(2);
    }
    Ok(acc / n_mc as f64 / (sigma * sigma * j as f64 / n as f64))
}

/// [`variance_identity_ratio_with`] using Gaussian errors with standard deviation `sigma`.
pub fn variance_identity_check<R: Rng + ?Sized>(
    data: &Dataset,
    space: Space,
    j: usize,
    n_mc: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<f64> {
    variance_identity_ratio_with(data, space, j, n_mc, sigma, || {
        sigma * rng.sample::<f64, _>(StandardNormal)
    })
}
