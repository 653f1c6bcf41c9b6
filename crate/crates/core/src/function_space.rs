//! Functions on `[0, 1]` sampled on a uniform, endpoint-including grid.
//!
//! Integrals use the trapezoid rule and derivatives use finite differences
//! (central in the interior, one-sided at the endpoints). Two ambient spaces
//! are supported: `L2` with `<f, g> = int f g` and the Sobolev space `W12`
//! with `<f, g> = int f g + int f' g'`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FpcrError, Result};

/// Ambient Hilbert space of the regressors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    L2,
    W12,
}

impl Space {
    pub fn as_str(&self) -> &'static str {
        match self {
            Space::L2 => "l2",
            Space::W12 => "w12",
        }
    }

    /// Smallest grid size on which the space's inner product is defined.
    pub fn min_grid(&self) -> usize {
        match self {
            Space::L2 => 2,
            Space::W12 => 3,
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Space {
    type Err = FpcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Space::L2),
            "w12" => Ok(Space::W12),
            other => Err(FpcrError::Domain(format!(
                "unknown space '{other}' (expected l2 or w12)"
            ))),
        }
    }
}

/// `u_k = k / (m - 1)` for `k = 0..m`.
pub fn grid_points(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(FpcrError::InvalidGrid { m, min: 2 });
    }
    let h = 1.0 / (m - 1) as f64;
    Ok((0..m)
        .map(|k| if k == m - 1 { 1.0 } else { k as f64 * h })
        .collect())
}

/// Trapezoid weights on the uniform grid; they sum to one.
pub fn trapezoid_weights(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(FpcrError::InvalidGrid { m, min: 2 });
    }
    let h = 1.0 / (m - 1) as f64;
    let mut w = vec![h; m];
    w[0] = 0.5 * h;
    w[m - 1] = 0.5 * h;
    Ok(w)
}

/// A real function on `[0, 1]` given by its values on the uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(FpcrError::InvalidGrid {
                m: values.len(),
                min: 2,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FpcrError::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid_points(m)?.into_iter().map(f).collect())
    }

    pub fn zeros(m: usize) -> Result<Self> {
        Self::new(vec![0.0; m])
    }

    pub fn constant(m: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| k * v).collect(),
        }
    }

    /// `self + k * other`.
    pub fn axpy(&self, k: f64, other: &Self) -> Result<Self> {
        check_same_grid(self, other)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + k * b)
                .collect(),
        })
    }

    /// `sum_j coefs[j] * funcs[j]`, all on a grid of size `m`.
    pub fn linear_combination(m: usize, coefs: &[f64], funcs: &[GridFunction]) -> Result<Self> {
        if coefs.len() != funcs.len() {
            return Err(FpcrError::Dimension {
                context: "linear combination",
                expected: coefs.len(),
                found: funcs.len(),
            });
        }
        let mut values = vec![0.0; m];
        for (c, f) in coefs.iter().zip(funcs) {
            if f.grid_size() != m {
                return Err(FpcrError::Dimension {
                    context: "linear combination",
                    expected: m,
                    found: f.grid_size(),
                });
            }
            for (v, fv) in values.iter_mut().zip(&f.values) {
                *v += c * fv;
            }
        }
        GridFunction::new(values)
    }

    /// Largest absolute grid value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;

    /// Panics on mismatched grids; use [`GridFunction::axpy`] for a checked sum.
    fn add(self, rhs: Self) -> GridFunction {
        self.axpy(1.0, rhs).expect("grid sizes differ")
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;

    fn sub(self, rhs: Self) -> GridFunction {
        self.axpy(-1.0, rhs).expect("grid sizes differ")
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;

    fn mul(self, k: f64) -> GridFunction {
        self.scale(k)
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;

    fn neg(self) -> GridFunction {
        self.scale(-1.0)
    }
}

pub(crate) fn check_same_grid(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.grid_size() != g.grid_size() {
        return Err(FpcrError::Dimension {
            context: "grid size",
            expected: f.grid_size(),
            found: g.grid_size(),
        });
    }
    Ok(())
}

fn finite_difference(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let h = 1.0 / (m - 1) as f64;
    let mut d = Vec::with_capacity(m);
    d.push((v[1] - v[0]) / h);
    for k in 1..m - 1 {
        d.push((v[k + 1] - v[k - 1]) / (2.0 * h));
    }
    d.push((v[m - 1] - v[m - 2]) / h);
    d
}

/// Finite-difference derivative on the same grid.
pub fn derivative(f: &GridFunction) -> Result<GridFunction> {
    let m = f.grid_size();
    if m < 3 {
        return Err(FpcrError::InvalidGrid { m, min: 3 });
    }
    GridFunction::new(finite_difference(&f.values))
}

fn trapezoid_dot(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    let interior: f64 = (1..m - 1).map(|k| a[k] * b[k]).sum();
    (interior + 0.5 * (a[0] * b[0] + a[m - 1] * b[m - 1])) / (m - 1) as f64
}

/// Inner product in the given space.
pub fn inner_product(f: &GridFunction, g: &GridFunction, space: Space) -> Result<f64> {
    check_same_grid(f, g)?;
    let base = trapezoid_dot(&f.values, &g.values);
    match space {
        Space::L2 => Ok(base),
        Space::W12 => {
            let df = derivative(f)?;
            let dg = derivative(g)?;
            Ok(base + trapezoid_dot(&df.values, &dg.values))
        }
    }
}

pub fn norm(f: &GridFunction, space: Space) -> Result<f64> {
    Ok(inner_product(f, f, space)?.max(0.0).sqrt())
}

pub fn sup_norm(f: &GridFunction) -> f64 {
    f.sup_norm()
}

/// The finite-difference operator as an `m x m` matrix.
pub fn derivative_matrix(m: usize) -> Result<DMatrix<f64>> {
    if m < 3 {
        return Err(FpcrError::InvalidGrid { m, min: 3 });
    }
    let h = 1.0 / (m - 1) as f64;
    let mut d = DMatrix::zeros(m, m);
    d[(0, 0)] = -1.0 / h;
    d[(0, 1)] = 1.0 / h;
    for k in 1..m - 1 {
        d[(k, k - 1)] = -0.5 / h;
        d[(k, k + 1)] = 0.5 / h;
    }
    d[(m - 1, m - 2)] = -1.0 / h;
    d[(m - 1, m - 1)] = 1.0 / h;
    Ok(d)
}

/// Gram matrix `G` with `<f, g> = f^T G g` in the given space.
pub fn gram_matrix(space: Space, m: usize) -> Result<DMatrix<f64>> {
    let w = trapezoid_weights(m)?;
    let wd = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w));
    match space {
        Space::L2 => Ok(wd),
        Space::W12 => {
            let d = derivative_matrix(m)?;
            let g = &wd + d.transpose() * &wd * &d;
            // symmetrize against rounding in the triple product
            Ok((&g + g.transpose()) * 0.5)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    fn gf(m: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(m, f).unwrap()
    }

    #[test]
    fn grid_points_examples() {
        assert_eq!(grid_points(2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(grid_points(3).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = grid_points(50).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[49], 1.0);
        for w in g.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 1.0 / 49.0, epsilon = 1e-15);
        }
        assert_eq!(grid_points(1), Err(FpcrError::InvalidGrid { m: 1, min: 2 }));
    }

    #[test]
    fn weights_sum_to_one() {
        for m in [2, 3, 17, 50] {
            let s: f64 = trapezoid_weights(m).unwrap().iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        assert_eq!(
            GridFunction::new(vec![0.0, f64::NAN, 1.0]),
            Err(FpcrError::NonFinite { index: 1 })
        );
        assert!(GridFunction::new(vec![1.0]).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let one = GridFunction::constant(50, 1.0).unwrap();
        let u = gf(50, |u| u);
        assert_eq!(inner_product(&one, &one, Space::L2).unwrap(), 1.0);
        assert_abs_diff_eq!(inner_product(&u, &one, Space::L2).unwrap(), 0.5, epsilon = 1e-15);

        // int u^2 + int 1 = 4/3; trapezoid error for u^2 is h^2 / 6
        let fine = gf(1000, |u| u);
        let v = inner_product(&fine, &fine, Space::W12).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-6, "{v}");
        let v50 = inner_product(&u, &u, Space::W12).unwrap();
        assert!((v50 - 4.0 / 3.0).abs() < 1e-4, "{v50}");
    }

    #[test]
    fn inner_product_rejects_mismatched_grids() {
        let a = GridFunction::zeros(5).unwrap();
        let b = GridFunction::zeros(6).unwrap();
        assert!(matches!(
            inner_product(&a, &b, Space::L2),
            Err(FpcrError::Dimension { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let c = GridFunction::constant(10, 3.5).unwrap();
        assert!(derivative(&c).unwrap().values().iter().all(|&v| v == 0.0));

        let u = gf(50, |u| u);
        for v in derivative(&u).unwrap().values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }

        let sq = gf(50, |u| u * u);
        let d = derivative(&sq).unwrap();
        let pts = grid_points(50).unwrap();
        for k in 1..49 {
            assert_abs_diff_eq!(d.values()[k], 2.0 * pts[k], epsilon = 1e-12);
        }
        // one-sided endpoints are first order: error is exactly h
        let h = 1.0 / 49.0;
        assert_abs_diff_eq!(d.values()[0], h, epsilon = 1e-12);
        assert_abs_diff_eq!(d.values()[49], 2.0 - h, epsilon = 1e-12);

        assert!(derivative(&GridFunction::zeros(2).unwrap()).is_err());
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(GridFunction::constant(7, 1.0).unwrap().sup_norm(), 1.0);
        assert_eq!(gf(3, |u| u - 0.5).sup_norm(), 0.5);
        let s = gf(50, |u| SQRT_2 * (2.0 * PI * u).sin()).sup_norm();
        // nearest grid point to the peak is at most h/2 away
        let h = 1.0 / 49.0;
        assert!(s <= SQRT_2 && s >= SQRT_2 * (PI * h).cos(), "{s}");
    }

    #[test]
    fn norm_examples() {
        let one = GridFunction::constant(50, 1.0).unwrap();
        assert_eq!(norm(&one, Space::L2).unwrap(), 1.0);
        assert_eq!(norm(&one, Space::W12).unwrap(), 1.0);
        let u = gf(2000, |u| u);
        assert!((norm(&u, Space::W12).unwrap() - (4.0_f64 / 3.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn gram_matrix_matches_inner_product() {
        let m = 12;
        let f = gf(m, |u| (3.0 * u).sin() + u * u);
        let g = gf(m, |u| (1.0 - u).exp());
        for space in [Space::L2, Space::W12] {
            let gm = gram_matrix(space, m).unwrap();
            let fv = nalgebra::DVector::from_column_slice(f.values());
            let gv = nalgebra::DVector::from_column_slice(g.values());
            let via_matrix = fv.dot(&(&gm * gv));
            assert_abs_diff_eq!(
                via_matrix,
                inner_product(&f, &g, space).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn space_parses() {
        assert_eq!("L2".parse::<Space>().unwrap(), Space::L2);
        assert_eq!("w12".parse::<Space>().unwrap(), Space::W12);
        assert!("h1".parse::<Space>().is_err());
    }

    fn values(m: usize) -> impl Strategy<Value = GridFunction> {
        prop::collection::vec(-10.0..10.0f64, m).prop_map(|v| GridFunction::new(v).unwrap())
    }

    fn space() -> impl Strategy<Value = Space> {
        prop_oneof![Just(Space::L2), Just(Space::W12)]
    }

    // Random smooth function: polynomial of degree <= 4 plus a few sin/cos modes.
    fn smooth() -> impl Strategy<Value = GridFunction> {
        (
            prop::collection::vec(-3.0..3.0f64, 5),
            prop::collection::vec(-2.0..2.0f64, 6),
        )
            .prop_map(|(poly, trig)| {
                gf(50, move |u| {
                    let p: f64 = poly.iter().rev().fold(0.0, |acc, c| acc * u + c);
                    let t: f64 = trig
                        .chunks(2)
                        .enumerate()
                        .map(|(k, ab)| {
                            let w = 2.0 * PI * (k + 1) as f64;
                            ab[0] * (w * u).sin() + ab[1] * (w * u).cos()
                        })
                        .sum();
                    p + t
                })
            })
    }

    proptest! {
        #[test]
        fn inner_product_is_symmetric(f in values(20), g in values(20), s in space()) {
            let a = inner_product(&f, &g, s).unwrap();
            let b = inner_product(&g, &f, s).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn inner_product_is_bilinear(
            f in values(15), g in values(15), h in values(15),
            a in -5.0..5.0f64, b in -5.0..5.0f64, s in space()
        ) {
            let comb = f.scale(a).axpy(b, &g).unwrap();
            let lhs = inner_product(&comb, &h, s).unwrap();
            let rhs = a * inner_product(&f, &h, s).unwrap() + b * inner_product(&g, &h, s).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn cauchy_schwarz(f in values(25), g in values(25), s in space()) {
            let ip = inner_product(&f, &g, s).unwrap().abs();
            let bound = norm(&f, s).unwrap() * norm(&g, s).unwrap();
            prop_assert!(ip <= bound + 1e-12 * (1.0 + bound));
        }

        #[test]
        fn sobolev_embedding(f in smooth()) {
            let lhs = f.sup_norm();
            let rhs = SQRT_2 * norm(&f, Space::W12).unwrap();
            prop_assert!(lhs <= rhs + 1e-8, "sup {} > sqrt2 * W12 norm {}", lhs, rhs);
        }
    }
}
