//! Distances between empirical distributions.
//!
//! `W2` between equal-size samples of curves is an assignment problem; we
//! solve it exactly with the Hungarian method, which is cubic in the sample
//! size, so samples are capped at [`MAX_ASSIGNMENT_SIZE`].

use crate::error::{FpcrError, Result};
use crate::function_space::{check_same_grid, derivative, GridFunction, Space};

pub const MAX_ASSIGNMENT_SIZE: usize = 512;

/// A non-empty sample of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSample(Vec<f64>);

impl ScalarSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FpcrError::InsufficientData { n: 0, min: 1 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FpcrError::NonFinite { index: i });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.0.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// A non-empty sample of curves on one grid, measured in `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSample {
    functions: Vec<GridFunction>,
    space: Space,
}

impl FunctionSample {
    pub fn new(functions: Vec<GridFunction>, space: Space) -> Result<Self> {
        let first = functions
            .first()
            .ok_or(FpcrError::InsufficientData { n: 0, min: 1 })?;
        for f in &functions[1..] {
            check_same_grid(first, f)?;
        }
        if first.grid_size() < space.min_grid() {
            return Err(FpcrError::InvalidGrid {
                m: first.grid_size(),
                min: space.min_grid(),
            });
        }
        Ok(Self { functions, space })
    }

    pub fn functions(&self) -> &[GridFunction] {
        &self.functions
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// Exact `W2` between equal-size samples: pair order statistics.
pub fn wasserstein2_1d(a: &ScalarSample, b: &ScalarSample) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FpcrError::Dimension {
            context: "W2 sample sizes",
            expected: a.len(),
            found: b.len(),
        });
    }
    let sa = a.sorted();
    let sb = b.sorted();
    let sum: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Trapezoid integral of `(f - g)^2`, with the ends at half weight; no `1/(m-1)` factor.
fn sq_dist_unscaled(f: &[f64], g: &[f64]) -> f64 {
    let m = f.len();
    let mut s = 0.0;
    for k in 1..m - 1 {
        s += (f[k] - g[k]).powi(2);
    }
    s + 0.5 * ((f[0] - g[0]).powi(2) + (f[m - 1] - g[m - 1]).powi(2))
}

/// Squared distance matrix `||a_i - b_j||^2`, row-major.
fn cost_matrix(a: &FunctionSample, b: &FunctionSample) -> Result<Vec<f64>> {
    let m = a.functions[0].grid_size();
    let h = 1.0 / (m - 1) as f64;
    let derivs = |s: &FunctionSample| -> Result<Vec<GridFunction>> {
        match s.space {
            Space::L2 => Ok(Vec::new()),
            Space::W12 => s.functions.iter().map(derivative).collect(),
        }
    };
    let da = derivs(a)?;
    let db = derivs(b)?;
    let n = a.len();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut c = sq_dist_unscaled(a.functions[i].values(), b.functions[j].values());
            if a.space == Space::W12 {
                c += sq_dist_unscaled(da[i].values(), db[j].values());
            }
            cost[i * n + j] = c * h;
        }
    }
    Ok(cost)
}

/// Minimum-cost perfect matching; returns `assignment[row] = column`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // shortest augmenting paths with potentials, 1-based with a sentinel at 0
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// `W2` between two equal-size samples of curves in their space.
pub fn wasserstein2_hilbert(a: &FunctionSample, b: &FunctionSample) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FpcrError::Dimension {
            context: "W2 sample sizes",
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.space != b.space {
        return Err(FpcrError::Precondition(format!(
            "samples measured in different spaces ({} vs {})",
            a.space, b.space
        )));
    }
    check_same_grid(&a.functions[0], &b.functions[0])?;
    let n = a.len();
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(FpcrError::SizeLimit {
            n,
            max: MAX_ASSIGNMENT_SIZE,
        });
    }
    let cost = cost_matrix(a, b)?;
    let assignment = hungarian(&cost, n);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok((total.max(0.0) / n as f64).sqrt())
}

/// `sup_s |F_a(s) - F_b(s)|` with right-continuous empirical CDFs.
pub fn kolmogorov_distance(a: &ScalarSample, b: &ScalarSample) -> f64 {
    let sa = a.sorted();
    let sb = b.sorted();
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() || j < sb.len() {
        let s = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] <= s {
            i += 1;
        }
        while j < sb.len() && sb[j] <= s {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
