//! Covariance operators on gridded functions and their spectral decomposition.
//!
//! An operator is stored as its discretized kernel `K` (an `m x m` matrix);
//! it acts on `f` as `f -> K G f` where `G` is the Gram matrix of the ambient
//! space. With `G = L L^T` the eigenproblem `K G phi = gamma phi` becomes the
//! symmetric problem `(L^T K L) v = gamma v` with `phi = L^{-T} v`, so the
//! returned eigenfunctions are orthonormal under the space's inner product.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{FpcrError, Result};
use crate::function_space::{check_same_grid, gram_matrix, GridFunction, Space};

/// Relative cutoff below which an eigenvalue counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;
/// Relative gap below which neighbouring eigenvalues are flagged as near-duplicates.
pub const NEAR_DUPLICATE_TOLERANCE: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = 1e-8;

/// Discretized covariance kernel together with the mean it was centered on.
#[derive(Debug, Clone)]
pub struct CovarianceOperator {
    kernel: DMatrix<f64>,
    mean: GridFunction,
    space: Space,
    n_samples: usize,
}

impl CovarianceOperator {
    /// Wraps a known (population) kernel with zero mean.
    pub fn from_kernel(kernel: DMatrix<f64>, space: Space) -> Result<Self> {
        let m = kernel.nrows();
        if kernel.ncols() != m {
            return Err(FpcrError::Dimension {
                context: "kernel columns",
                expected: m,
                found: kernel.ncols(),
            });
        }
        if m < space.min_grid() {
            return Err(FpcrError::InvalidGrid {
                m,
                min: space.min_grid(),
            });
        }
        check_symmetric(&kernel)?;
        Ok(Self {
            kernel,
            mean: GridFunction::zeros(m)?,
            space,
            n_samples: 0,
        })
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn mean(&self) -> &GridFunction {
        &self.mean
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn grid_size(&self) -> usize {
        self.kernel.nrows()
    }

    /// Applies the integral operator directly: `(K G f)`.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let m = self.grid_size();
        if f.grid_size() != m {
            return Err(FpcrError::Dimension {
                context: "operator argument",
                expected: m,
                found: f.grid_size(),
            });
        }
        let g = gram_matrix(self.space, m)?;
        let fv = DVector::from_column_slice(f.values());
        let out = &self.kernel * (g * fv);
        GridFunction::new(out.as_slice().to_vec())
    }
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(FpcrError::Precondition(format!(
            "kernel is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Centered sample covariance `n^{-1} sum (X_i - Xbar) (X_i - Xbar)^T`.
pub fn sample_covariance(curves: &[GridFunction], space: Space) -> Result<CovarianceOperator> {
    let n = curves.len();
    if n < 2 {
        return Err(FpcrError::InsufficientData { n, min: 2 });
    }
    let m = curves[0].grid_size();
    for c in &curves[1..] {
        check_same_grid(&curves[0], c)?;
    }
    if m < space.min_grid() {
        return Err(FpcrError::InvalidGrid {
            m,
            min: space.min_grid(),
        });
    }
    let mean = mean_function(curves)?;
    let mut centered = DMatrix::zeros(m, n);
    for (i, c) in curves.iter().enumerate() {
        for (k, (v, mu)) in c.values().iter().zip(mean.values()).enumerate() {
            centered[(k, i)] = v - mu;
        }
    }
    let kernel = (&centered * centered.transpose()) / n as f64;
    Ok(CovarianceOperator {
        kernel,
        mean,
        space,
        n_samples: n,
    })
}

pub(crate) fn mean_function(curves: &[GridFunction]) -> Result<GridFunction> {
    let m = curves[0].grid_size();
    let n = curves.len() as f64;
    let mut mean = vec![0.0; m];
    for c in curves {
        for (acc, v) in mean.iter_mut().zip(c.values()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    GridFunction::new(mean)
}

/// Eigengaps: `d_1 = g_1 - g_2`, `d_j = min(g_j - g_{j+1}, g_{j-1} - g_j)`.
/// The last entry only has a left neighbour.
pub fn eigengaps(eigenvalues: &[f64]) -> Vec<f64> {
    let p = eigenvalues.len();
    (0..p)
        .map(|j| {
            let right = (j + 1 < p).then(|| eigenvalues[j] - eigenvalues[j + 1]);
            let left = (j > 0).then(|| eigenvalues[j - 1] - eigenvalues[j]);
            match (left, right) {
                (Some(l), Some(r)) => l.min(r),
                (None, Some(r)) => r,
                (Some(l), None) => l,
                (None, None) => f64::INFINITY,
            }
        })
        .collect()
}

/// Sorted eigenpairs of a covariance operator.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<GridFunction>,
    // G phi_j, so that <f, phi_j> = f . duals[j]
    duals: Vec<Vec<f64>>,
    eigengaps: Vec<f64>,
    mean: GridFunction,
    space: Space,
}

impl EigenSystem {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[GridFunction] {
        &self.eigenfunctions
    }

    pub fn eigengaps(&self) -> &[f64] {
        &self.eigengaps
    }

    pub fn mean(&self) -> &GridFunction {
        &self.mean
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn grid_size(&self) -> usize {
        self.mean.grid_size()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Number of eigenvalues above `RANK_TOLERANCE * gamma_1`.
    pub fn rank(&self) -> usize {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.eigenvalues
            .iter()
            .take_while(|&&g| g > RANK_TOLERANCE * top)
            .count()
    }

    fn check_truncation(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.len() {
            return Err(FpcrError::Dimension {
                context: "truncation level",
                expected: self.len(),
                found: j,
            });
        }
        Ok(())
    }

    /// `<f, phi_j>` for `j = 1..=J` in the system's space.
    pub fn coordinates(&self, f: &GridFunction, j: usize) -> Result<Vec<f64>> {
        self.check_truncation(j)?;
        if f.grid_size() != self.grid_size() {
            return Err(FpcrError::Dimension {
                context: "projection argument",
                expected: self.grid_size(),
                found: f.grid_size(),
            });
        }
        Ok(self.duals[..j]
            .iter()
            .map(|d| d.iter().zip(f.values()).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `sum_{j<=J} c_j phi_j`.
    pub fn synthesize(&self, coefs: &[f64]) -> Result<GridFunction> {
        self.check_truncation(coefs.len())?;
        GridFunction::linear_combination(
            self.grid_size(),
            coefs,
            &self.eigenfunctions[..coefs.len()],
        )
    }

    /// Projection onto the span of the first `J` eigenfunctions.
    pub fn project(&self, f: &GridFunction, j: usize) -> Result<GridFunction> {
        let c = self.coordinates(f, j)?;
        self.synthesize(&c)
    }

    /// `Gamma_J^a f = sum_{j<=J} gamma_j^a <f, phi_j> phi_j`.
    pub fn pseudo_power_apply(&self, a: f64, j: usize, f: &GridFunction) -> Result<GridFunction> {
        self.check_truncation(j)?;
        if a < 0.0 {
            let tol = RANK_TOLERANCE * self.eigenvalues[0];
            let last = self.eigenvalues[j - 1];
            if last <= tol || last <= 0.0 {
                return Err(FpcrError::SingularOperator {
                    index: j,
                    value: last,
                    tolerance: tol,
                });
            }
        }
        let coords = self.coordinates(f, j)?;
        let scaled: Vec<f64> = coords
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, g)| if a == 0.0 { *c } else { g.powf(a) * c })
            .collect();
        self.synthesize(&scaled)
    }

    /// Diagnostics for the truncation level `J` and sample size `n`.
    pub fn condition_diagnostics(&self, j: usize, n: usize) -> Result<ConditionReport> {
        condition_diagnostics(&self.eigenvalues, j, n)
    }
}

/// Weighted symmetric eigendecomposition of a covariance operator.
pub fn eigen_decompose(op: &CovarianceOperator) -> Result<EigenSystem> {
    let m = op.grid_size();
    let gram = gram_matrix(op.space, m)?;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| FpcrError::Numerical("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let weighted = l.transpose() * &op.kernel * &l;
    let weighted = (&weighted + weighted.transpose()) * 0.5;
    if weighted.iter().any(|v| !v.is_finite()) {
        return Err(FpcrError::Numerical(
            "non-finite entries in the weighted kernel".into(),
        ));
    }
    let eig = SymmetricEigen::try_new(weighted, f64::EPSILON, 0).ok_or_else(|| {
        FpcrError::Numerical(format!("symmetric eigensolver did not converge (m = {m})"))
    })?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let lowest = eig.eigenvalues[order[m - 1]];
    if lowest < -PSD_TOLERANCE * top.max(1.0) {
        return Err(FpcrError::Precondition(format!(
            "kernel is not positive semi-definite (smallest eigenvalue {lowest:e})"
        )));
    }

    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenfunctions = Vec::with_capacity(m);
    let mut duals = Vec::with_capacity(m);
    for &idx in &order {
        let v = eig.eigenvectors.column(idx).into_owned();
        let mut phi = lt
            .solve_upper_triangular(&v)
            .ok_or_else(|| FpcrError::Numerical("triangular solve failed".into()))?;
        let (imax, _) = phi
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, x)| {
                if x.abs() > bv {
                    (i, x.abs())
                } else {
                    (bi, bv)
                }
            });
        if phi[imax] < 0.0 {
            phi.neg_mut();
        }
        let dual = &gram * &phi;
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
        eigenfunctions.push(GridFunction::new(phi.as_slice().to_vec())?);
        duals.push(dual.as_slice().to_vec());
    }
    let eigengaps = eigengaps(&eigenvalues);
    Ok(EigenSystem {
        eigenvalues,
        eigenfunctions,
        duals,
        eigengaps,
        mean: op.mean.clone(),
        space: op.space,
    })
}

/// Free-function form of [`EigenSystem::pseudo_power_apply`].
pub fn pseudo_power_apply(
    es: &EigenSystem,
    a: f64,
    j: usize,
    f: &GridFunction,
) -> Result<GridFunction> {
    es.pseudo_power_apply(a, j, f)
}

/// Smallest `J <= j_max` whose cumulative variance share reaches `threshold`;
/// `j_max` if none does.
pub fn fve_select_j(eigenvalues: &[f64], threshold: f64, j_max: usize) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FpcrError::Domain(format!(
            "FVE threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if j_max == 0 {
        return Err(FpcrError::Domain("J_max must be positive".into()));
    }
    let total: f64 = eigenvalues.iter().map(|g| g.max(0.0)).sum();
    if total <= 0.0 {
        return Err(FpcrError::DegenerateData(
            "all eigenvalues are zero".into(),
        ));
    }
    let mut cum = 0.0;
    for (j, g) in eigenvalues.iter().take(j_max).enumerate() {
        cum += g.max(0.0);
        if cum >= threshold * total {
            return Ok(j + 1);
        }
    }
    Ok(j_max)
}

/// Cumulative fraction of variance explained for each leading component.
pub fn fve_table(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().map(|g| g.max(0.0)).sum();
    let mut cum = 0.0;
    eigenvalues
        .iter()
        .map(|g| {
            cum += g.max(0.0);
            if total > 0.0 {
                cum / total
            } else {
                0.0
            }
        })
        .collect()
}

/// Supremum (operator), Hilbert-Schmidt and nuclear norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorNorms {
    pub sup: f64,
    pub hilbert_schmidt: f64,
    pub nuclear: f64,
}

/// Norms of the self-adjoint operator `f -> A G f` whose kernel matrix is `a`.
pub fn operator_norms(a: &DMatrix<f64>, space: Space) -> Result<OperatorNorms> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(FpcrError::Dimension {
            context: "operator columns",
            expected: m,
            found: a.ncols(),
        });
    }
    check_symmetric(a)?;
    let gram = gram_matrix(space, m)?;
    let l = gram
        .cholesky()
        .ok_or_else(|| FpcrError::Numerical("Gram matrix is not positive definite".into()))?
        .l();
    let w = l.transpose() * a * &l;
    let w = (&w + w.transpose()) * 0.5;
    let eigs = w.symmetric_eigenvalues();
    Ok(OperatorNorms {
        sup: eigs.iter().fold(0.0_f64, |acc, e| acc.max(e.abs())),
        hilbert_schmidt: eigs.iter().map(|e| e * e).sum::<f64>().sqrt(),
        nuclear: eigs.iter().map(|e| e.abs()).sum(),
    })
}

/// Quantities from the eigenvalue-decay and truncation conditions, reported
/// for inspection only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub truncation: usize,
    pub n: usize,
    /// `max_{j<=J} gamma_j j log j`
    pub decay: f64,
    /// `n^{-1} sum_{j<=J} delta_j^{-2}`; infinite when a gap vanishes.
    pub gap_sum: f64,
    /// `n^{-1/2} sum_{j<=J} j log j`
    pub growth_sum: f64,
    pub eigengaps: Vec<f64>,
    /// 1-based indices whose gap is below `NEAR_DUPLICATE_TOLERANCE * gamma_1`.
    pub near_duplicates: Vec<usize>,
}

/// Condition diagnostics from a descending eigenvalue list.
pub fn condition_diagnostics(eigenvalues: &[f64], j: usize, n: usize) -> Result<ConditionReport> {
    if j == 0 || j > eigenvalues.len() {
        return Err(FpcrError::Dimension {
            context: "truncation level",
            expected: eigenvalues.len(),
            found: j,
        });
    }
    if n == 0 {
        return Err(FpcrError::InsufficientData { n, min: 1 });
    }
    let top = eigenvalues[0].max(0.0);
    let gaps = eigengaps(eigenvalues);
    let nf = n as f64;
    let jlogj = |k: usize| {
        let k = k as f64;
        k * k.ln()
    };
    let decay = (1..=j)
        .map(|k| eigenvalues[k - 1] * jlogj(k))
        .fold(f64::NEG_INFINITY, f64::max);
    let zero_gap = RANK_TOLERANCE * top;
    let gap_sum = gaps[..j]
        .iter()
        .map(|&d| if d <= zero_gap { f64::INFINITY } else { d.powi(-2) })
        .sum::<f64>()
        / nf;
    let growth_sum = (1..=j).map(jlogj).sum::<f64>() / nf.sqrt();
    let near_duplicates = gaps[..j]
        .iter()
        .enumerate()
        .filter(|(_, &d)| d < NEAR_DUPLICATE_TOLERANCE * top)
        .map(|(k, _)| k + 1)
        .collect();
    Ok(ConditionReport {
        truncation: j,
        n,
        decay,
        gap_sum,
        growth_sum,
        eigengaps: gaps[..j].to_vec(),
        near_duplicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::{inner_product, norm};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gf(m: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(m, f).unwrap()
    }

    fn outer(f: &GridFunction) -> DMatrix<f64> {
        let v = DVector::from_column_slice(f.values());
        &v * v.transpose()
    }

    fn random_curves(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<GridFunction> {
        (0..n)
            .map(|_| {
                let a: [f64; 4] = rng.gen();
                gf(m, |u| {
                    a[0] - 0.5
                        + (a[1] - 0.5) * (3.0 * u).sin()
                        + (a[2] - 0.5) * u * u
                        + (a[3] - 0.5) * (7.0 * u).cos()
                })
                .axpy(0.05, &GridFunction::new((0..m).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap())
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn covariance_of_identical_curves_is_zero() {
        let f = gf(10, |u| u.sin());
        let op = sample_covariance(&[f.clone(), f], Space::L2).unwrap();
        assert_eq!(op.kernel().amax(), 0.0);
    }

    #[test]
    fn covariance_of_antipodal_pair_is_outer_product() {
        let f = gf(10, |u| 1.0 + u * u);
        let op = sample_covariance(&[f.clone(), -&f], Space::L2).unwrap();
        assert!((op.kernel() - outer(&f)).amax() < 1e-14);
        assert_eq!(op.mean().sup_norm(), 0.0);
        assert_eq!(op.n_samples(), 2);
    }

    #[test]
    fn covariance_errors() {
        let f = gf(10, |u| u);
        assert_eq!(
            sample_covariance(std::slice::from_ref(&f), Space::L2).unwrap_err(),
            FpcrError::InsufficientData { n: 1, min: 2 }
        );
        let g = gf(11, |u| u);
        assert!(matches!(
            sample_covariance(&[f, g], Space::L2),
            Err(FpcrError::Dimension { .. })
        ));
    }

    #[test]
    fn rank_one_decomposition() {
        for space in [Space::L2, Space::W12] {
            let raw = gf(30, |u| (1.0 + u).ln() + 0.3);
            let f = raw.scale(1.0 / norm(&raw, space).unwrap());
            let op = CovarianceOperator::from_kernel(outer(&f), space).unwrap();
            let es = eigen_decompose(&op).unwrap();
            assert_abs_diff_eq!(es.eigenvalues()[0], 1.0, epsilon = 1e-10);
            assert!(es.eigenvalues()[1..].iter().all(|&g| g.abs() < 1e-10));
            // f is positive, so the canonical sign matches f
            assert!((es.eigenfunctions()[0].clone().axpy(-1.0, &f).unwrap()).sup_norm() < 1e-8);
        }
    }

    #[test]
    fn zero_kernel_decomposition() {
        let op = CovarianceOperator::from_kernel(DMatrix::zeros(8, 8), Space::L2).unwrap();
        let es = eigen_decompose(&op).unwrap();
        assert!(es.eigenvalues().iter().all(|&g| g == 0.0));
        assert_eq!(es.rank(), 0);
    }

    #[test]
    fn rejects_asymmetric_or_indefinite_kernels() {
        let mut k = DMatrix::identity(5, 5);
        k[(0, 1)] = 0.5;
        assert!(matches!(
            CovarianceOperator::from_kernel(k, Space::L2),
            Err(FpcrError::Precondition(_))
        ));
        let op = CovarianceOperator::from_kernel(-DMatrix::identity(5, 5), Space::L2).unwrap();
        assert!(matches!(eigen_decompose(&op), Err(FpcrError::Precondition(_))));
    }

    #[test]
    fn orthonormality_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for space in [Space::L2, Space::W12] {
            let curves = random_curves(&mut rng, 40, 25);
            let op = sample_covariance(&curves, space).unwrap();
            let es = eigen_decompose(&op).unwrap();
            let p = es.len();
            for a in 0..p {
                for b in 0..p {
                    let ip = inner_product(&es.eigenfunctions()[a], &es.eigenfunctions()[b], space)
                        .unwrap();
                    let target = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - target).abs() < 1e-8, "{space} <{a},{b}> = {ip}");
                }
            }
            assert!(es.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
            assert!(es.eigenvalues().iter().all(|&g| g >= 0.0));

            let m = es.grid_size();
            let mut rec = DMatrix::zeros(m, m);
            for (g, phi) in es.eigenvalues().iter().zip(es.eigenfunctions()) {
                rec += outer(phi) * *g;
            }
            assert!((rec - op.kernel()).amax() < 1e-6);
        }
    }

    #[test]
    fn eigengaps_follow_definition() {
        let g = [4.0, 3.0, 1.5, 1.0];
        assert_eq!(eigengaps(&g), vec![1.0, 1.0, 0.5, 0.5]);
    }

    #[test]
    fn pseudo_power_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for space in [Space::L2, Space::W12] {
            let curves = random_curves(&mut rng, 30, 20);
            let op = sample_covariance(&curves, space).unwrap();
            let es = eigen_decompose(&op).unwrap();
            let f = gf(20, |u| (5.0 * u).cos() + u);

            // a = 1 over all components equals direct quadrature application
            let direct = op.apply(&f).unwrap();
            let spectral = es.pseudo_power_apply(1.0, es.len(), &f).unwrap();
            assert!((&direct - &spectral).sup_norm() < 1e-8);

            // -1/2 then +1/2 gives the projection
            let j = 4;
            let half = es.pseudo_power_apply(-0.5, j, &f).unwrap();
            let back = es.pseudo_power_apply(0.5, j, &half).unwrap();
            let proj = es.project(&f, j).unwrap();
            assert!((&back - &proj).sup_norm() < 1e-10);

            // eigenfunction case
            let phi1 = &es.eigenfunctions()[0];
            let inv = es.pseudo_power_apply(-1.0, 3, phi1).unwrap();
            let expected = phi1.scale(1.0 / es.eigenvalues()[0]);
            assert!((&inv - &expected).sup_norm() < 1e-8 * expected.sup_norm());
        }
    }

    #[test]
    fn negative_power_beyond_rank_is_singular() {
        let f = gf(12, |u| u + 1.0);
        let op = sample_covariance(&[f.clone(), -&f], Space::L2).unwrap();
        let es = eigen_decompose(&op).unwrap();
        assert_eq!(es.rank(), 1);
        assert!(matches!(
            es.pseudo_power_apply(-0.5, 2, &f),
            Err(FpcrError::SingularOperator { index: 2, .. })
        ));
        assert!(es.pseudo_power_apply(0.5, 2, &f).is_ok());
    }

    #[test]
    fn fve_examples() {
        assert_eq!(fve_select_j(&[3.0, 1.0], 0.75, 20).unwrap(), 1);
        assert_eq!(fve_select_j(&[1.0, 1.0, 1.0, 1.0], 0.75, 20).unwrap(), 3);
        let flat = vec![1.0; 100];
        assert_eq!(fve_select_j(&flat, 0.75, 20).unwrap(), 20);
        assert!(matches!(
            fve_select_j(&[0.0, 0.0], 0.75, 20),
            Err(FpcrError::DegenerateData(_))
        ));
        assert!(fve_select_j(&[1.0], 1.0, 20).is_err());
        let table = fve_table(&[3.0, 1.0]);
        assert_eq!(table, vec![0.75, 1.0]);
    }

    #[test]
    fn operator_norm_examples() {
        let m = 40;
        for space in [Space::L2, Space::W12] {
            // identity on the span of J orthonormal functions
            let raw: Vec<GridFunction> = (0..3)
                .map(|k| gf(m, move |u| u.powi(k) + 0.1 * k as f64))
                .collect();
            let mut basis: Vec<GridFunction> = Vec::new();
            for f in raw {
                let mut g = f.clone();
                for b in &basis {
                    let c = inner_product(&f, b, space).unwrap();
                    g = g.axpy(-c, b).unwrap();
                }
                let nrm = norm(&g, space).unwrap();
                basis.push(g.scale(1.0 / nrm));
            }
            let mut k = DMatrix::zeros(m, m);
            for b in &basis {
                k += outer(b);
            }
            let norms = operator_norms(&k, space).unwrap();
            assert_abs_diff_eq!(norms.sup, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(norms.hilbert_schmidt, 3f64.sqrt(), epsilon = 1e-8);
            assert_abs_diff_eq!(norms.nuclear, 3.0, epsilon = 1e-8);

            let one = operator_norms(&outer(&basis[0]), space).unwrap();
            assert_abs_diff_eq!(one.sup, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(one.hilbert_schmidt, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(one.nuclear, 1.0, epsilon = 1e-8);
        }
        let zero = operator_norms(&DMatrix::zeros(6, 6), Space::L2).unwrap();
        assert_eq!((zero.sup, zero.hilbert_schmidt, zero.nuclear), (0.0, 0.0, 0.0));

        let mut asym = DMatrix::zeros(4, 4);
        asym[(0, 3)] = 1.0;
        assert!(operator_norms(&asym, Space::L2).is_err());
    }

    #[test]
    fn condition_diagnostic_examples() {
        let g: Vec<f64> = (1..=6).map(|j| 2f64.powi(-j)).collect();
        let rep = condition_diagnostics(&g, 3, 100).unwrap();
        for (j, d) in rep.eigengaps.iter().enumerate() {
            assert_abs_diff_eq!(*d, 2f64.powi(-(j as i32 + 2)), epsilon = 1e-15);
        }
        let expected_gap = (16.0 + 64.0 + 256.0) / 100.0;
        assert_abs_diff_eq!(rep.gap_sum, expected_gap, epsilon = 1e-12);
        let expected_decay = (0.25 * 2.0 * 2f64.ln()).max(0.125 * 3.0 * 3f64.ln());
        assert_abs_diff_eq!(rep.decay, expected_decay, epsilon = 1e-15);
        let expected_growth = (2.0 * 2f64.ln() + 3.0 * 3f64.ln()) / 10.0;
        assert_abs_diff_eq!(rep.growth_sum, expected_growth, epsilon = 1e-15);
        assert!(rep.near_duplicates.is_empty());

        let one = condition_diagnostics(&g, 1, 100).unwrap();
        assert_abs_diff_eq!(one.gap_sum, (g[0] - g[1]).powi(-2) / 100.0, epsilon = 1e-12);

        let tied = condition_diagnostics(&[1.0, 1.0, 0.5], 2, 10).unwrap();
        assert!(tied.gap_sum.is_infinite());
        assert_eq!(tied.near_duplicates, vec![1, 2]);
    }

    fn psd_kernel(m: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-1.0..1.0f64, m * 3).prop_map(move |v| {
            let b = DMatrix::from_vec(m, 3, v);
            &b * b.transpose()
        })
    }

    proptest! {
        #[test]
        fn norm_chain(k in psd_kernel(10)) {
            for space in [Space::L2, Space::W12] {
                let n = operator_norms(&k, space).unwrap();
                prop_assert!(n.sup <= n.hilbert_schmidt + 1e-12);
                prop_assert!(n.hilbert_schmidt <= n.nuclear + 1e-12);
            }
        }

        #[test]
        fn first_power_matches_quadrature(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let curves = random_curves(&mut rng, 25, 15);
            let op = sample_covariance(&curves, Space::L2).unwrap();
            let es = eigen_decompose(&op).unwrap();
            let f = GridFunction::new((0..15).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap();
            let direct = op.apply(&f).unwrap();
            let spectral = es.pseudo_power_apply(1.0, es.len(), &f).unwrap();
            prop_assert!((&direct - &spectral).sup_norm() < 1e-8);
        }
    }
}
