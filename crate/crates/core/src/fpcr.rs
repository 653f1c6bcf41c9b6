//! Functional principal component regression.
//!
//! Two routes compute the same estimator. The spectral route divides the
//! projected cross-covariance by the eigenvalues, `b_j = <Delta, phi_j> / gamma_j`.
//! The least-squares route regresses the centered responses on the centered
//! principal component scores and solves the `J x J` normal equations. The
//! score covariance matrix is `diag(gamma_1..gamma_J)`, so both agree.
//! The intercept is always handled by centering.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{FpcrError, Result};
use crate::function_space::{check_same_grid, GridFunction, Space};
use crate::operators::{eigen_decompose, mean_function, sample_covariance, EigenSystem, RANK_TOLERANCE};

/// Paired observations `(Y_i, X_i)` on a common grid.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Vec<GridFunction>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<GridFunction>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(FpcrError::Dimension {
                context: "responses vs curves",
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(FpcrError::InsufficientData { n: x.len(), min: 2 });
        }
        for c in &x[1..] {
            check_same_grid(&x[0], c)?;
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(FpcrError::NonFinite { index });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[GridFunction] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn grid_size(&self) -> usize {
        self.x[0].grid_size()
    }

    pub fn y_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n() as f64
    }

    /// Same regressors, new responses.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y)
    }
}

/// Empirical cross-covariance `n^{-1} sum (X_i - Xbar)(Y_i - Ybar)`.
pub fn cross_covariance(data: &Dataset) -> Result<GridFunction> {
    let mean = mean_function(&data.x)?;
    let ybar = data.y_mean();
    let n = data.n() as f64;
    let mut out = vec![0.0; data.grid_size()];
    for (xi, yi) in data.x.iter().zip(&data.y) {
        let dy = yi - ybar;
        for ((o, v), mu) in out.iter_mut().zip(xi.values()).zip(mean.values()) {
            *o += (v - mu) * dy;
        }
    }
    out.iter_mut().for_each(|v| *v /= n);
    GridFunction::new(out)
}

/// A fitted FPCR model with truncation level `J`.
#[derive(Debug, Clone)]
pub struct FpcrFit {
    coefficients: Vec<f64>,
    beta_hat: GridFunction,
    intercept: f64,
    residuals: Vec<f64>,
    truncation: usize,
    eigensystem: Arc<EigenSystem>,
    space: Space,
    // centered scores <X_i - Xbar, phi_j>, row-major n x J
    scores: Vec<f64>,
    y_mean: f64,
}

impl FpcrFit {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn beta_hat(&self) -> &GridFunction {
        &self.beta_hat
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn eigensystem(&self) -> &Arc<EigenSystem> {
        &self.eigensystem
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    /// Centered score `<X_i - Xbar, phi_j>` (0-based `i`, `j`).
    pub fn score(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.truncation + j]
    }

    /// `Ybar + <beta_hat, X_i - Xbar>`.
    pub fn fitted_values(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                self.y_mean
                    + (0..self.truncation)
                        .map(|j| self.coefficients[j] * self.score(i, j))
                        .sum::<f64>()
            })
            .collect()
    }
}

fn check_rank(es: &EigenSystem, j: usize) -> Result<()> {
    if j == 0 || j > es.len() {
        return Err(FpcrError::Dimension {
            context: "truncation level",
            expected: es.len(),
            found: j,
        });
    }
    let top = es.eigenvalues()[0];
    if top <= 0.0 {
        return Err(FpcrError::DegenerateData(
            "regressors have zero variance".into(),
        ));
    }
    let tol = RANK_TOLERANCE * top;
    if let Some(k) = es.eigenvalues()[..j].iter().position(|&g| g <= tol) {
        return Err(FpcrError::SingularDesign {
            index: k + 1,
            detail: format!(
                "eigenvalue {:e} is below the rank tolerance {:e}",
                es.eigenvalues()[k],
                tol
            ),
        });
    }
    Ok(())
}

fn centered_scores(data: &Dataset, es: &EigenSystem, j: usize) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(data.n() * j);
    for xi in &data.x {
        let centered = xi.axpy(-1.0, es.mean())?;
        scores.extend(es.coordinates(&centered, j)?);
    }
    Ok(scores)
}

fn assemble(
    data: &Dataset,
    es: Arc<EigenSystem>,
    j: usize,
    coefficients: Vec<f64>,
    scores: Vec<f64>,
) -> Result<FpcrFit> {
    let beta_hat = es.synthesize(&coefficients)?;
    let y_mean = data.y_mean();
    let residuals = data
        .y
        .iter()
        .enumerate()
        .map(|(i, yi)| {
            let fit: f64 = (0..j).map(|k| coefficients[k] * scores[i * j + k]).sum();
            yi - y_mean - fit
        })
        .collect();
    // <beta_hat, Xbar> = sum_j b_j <Xbar, phi_j>
    let mean_proj: f64 = es
        .coordinates(es.mean(), j)?
        .iter()
        .zip(&coefficients)
        .map(|(a, b)| a * b)
        .sum();
    let intercept = y_mean - mean_proj;
    Ok(FpcrFit {
        coefficients,
        beta_hat,
        intercept,
        residuals,
        truncation: j,
        space: es.space(),
        eigensystem: es,
        scores,
        y_mean,
    })
}

/// Spectral fit reusing an existing decomposition of the same regressors.
pub fn fit_with_eigensystem(data: &Dataset, es: Arc<EigenSystem>, j: usize) -> Result<FpcrFit> {
    if es.grid_size() != data.grid_size() {
        return Err(FpcrError::Dimension {
            context: "eigensystem grid",
            expected: data.grid_size(),
            found: es.grid_size(),
        });
    }
    check_rank(&es, j)?;
    let delta = cross_covariance(data)?;
    let coefficients: Vec<f64> = es
        .coordinates(&delta, j)?
        .iter()
        .zip(es.eigenvalues())
        .map(|(d, g)| d / g)
        .collect();
    let scores = centered_scores(data, &es, j)?;
    assemble(data, es, j, coefficients, scores)
}

/// Decomposes the sample covariance of the regressors in `space`.
pub fn decompose_regressors(data: &Dataset, space: Space) -> Result<Arc<EigenSystem>> {
    let op = sample_covariance(&data.x, space)?;
    Ok(Arc::new(eigen_decompose(&op)?))
}

/// FPCR fit through the spectral formula `b_j = <Delta, phi_j> / gamma_j`.
pub fn fit_fpcr(data: &Dataset, j: usize, space: Space) -> Result<FpcrFit> {
    let es = decompose_regressors(data, space)?;
    fit_with_eigensystem(data, es, j)
}

/// FPCR fit through the `J x J` normal equations of the score regression.
pub fn fit_fpcr_leastsquares(data: &Dataset, j: usize, space: Space) -> Result<FpcrFit> {
    let es = decompose_regressors(data, space)?;
    if j == 0 || j > es.len() {
        return Err(FpcrError::Dimension {
            context: "truncation level",
            expected: es.len(),
            found: j,
        });
    }
    let n = data.n();
    let scores = centered_scores(data, &es, j)?;
    let design = DMatrix::from_row_slice(n, j, &scores);
    let ybar = data.y_mean();
    let yc = DVector::from_iterator(n, data.y.iter().map(|v| v - ybar));
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * yc;
    let scale = gram.diagonal().amax();
    if scale <= 0.0 {
        return Err(FpcrError::SingularDesign {
            index: 1,
            detail: "score matrix is zero".into(),
        });
    }
    let lu = gram.clone().full_piv_lu();
    let (u_min, idx) = (0..j)
        .map(|k| (lu.u()[(k, k)].abs(), k))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    if u_min <= RANK_TOLERANCE * scale * n as f64 {
        return Err(FpcrError::SingularDesign {
            index: idx + 1,
            detail: format!("normal equations are singular (pivot {u_min:e})"),
        });
    }
    let coef = lu
        .solve(&rhs)
        .ok_or_else(|| FpcrError::SingularDesign {
            index: j,
            detail: "normal equations could not be solved".into(),
        })?;
    assemble(data, es, j, coef.as_slice().to_vec(), scores)
}
