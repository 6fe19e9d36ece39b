//! Exact analysis on quadratic functions.
//!
//! On `f(y) = ½ yᵀQy` with `Q` diagonalized, the closed loop decouples into
//! one copy of `T(q) = A + qBC` per eigenvalue `q` of `Q`. The worst-case rate
//! is then the largest spectral radius of `T(q)` over `q ∈ [m, L]`, and the
//! stationary noise response of each mode is a discrete Lyapunov equation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algomodel::{AlgorithmRealization, FunctionClass};
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_GRID_POINTS: usize = 2001;
/// Width of the bracket at which golden-section refinement stops.
pub const REFINE_RESOLUTION: f64 = 1e-10;

/// Sorted curvature samples covering `[m, L]`, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureGrid {
    points: Vec<f64>,
    /// Refine around the grid maximizer by golden-section search.
    pub refine: bool,
}

impl CurvatureGrid {
    /// `n` uniformly spaced points (at least 2).
    pub fn uniform(fc: &FunctionClass, n: usize) -> Result<Self> {
        fc.validate()?;
        let n = n.max(2);
        let mut points: Vec<f64> = (0..n)
            .map(|i| fc.m + (fc.l - fc.m) * i as f64 / (n - 1) as f64)
            .collect();
        points[n - 1] = fc.l;
        points.dedup();
        Ok(Self { points, refine: true })
    }

    pub fn default_for(fc: &FunctionClass) -> Result<Self> {
        Self::uniform(fc, DEFAULT_GRID_POINTS)
    }

    /// Grid from explicit samples; they must be strictly increasing and
    /// start at `m` and end at `L`.
    pub fn from_points(fc: &FunctionClass, points: Vec<f64>, refine: bool) -> Result<Self> {
        fc.validate()?;
        let ok_ends = points.first() == Some(&fc.m) && points.last() == Some(&fc.l);
        let increasing = points.windows(2).all(|w| w[0] < w[1]);
        if !ok_ends || !(increasing || points.len() == 1) {
            return Err(Error::InvalidParameter(
                "curvature grid must be strictly increasing from m to L".into(),
            ));
        }
        Ok(Self { points, refine })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Per-mode closed loop `A + qBC`.
pub fn closed_loop(alg: &AlgorithmRealization, q: f64) -> DMatrix<f64> {
    alg.a() + alg.b() * alg.c() * q
}

/// Maximize `g` over the grid, then refine inside the bracket around the
/// best sample. Returns `(q, g(q))`.
fn grid_max(grid: &CurvatureGrid, mut g: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let pts = grid.points();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &q) in pts.iter().enumerate() {
        let v = g(q)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let (i, v) = best;
    if !grid.refine || pts.len() < 2 {
        return Ok((pts[i], v));
    }
    let lo = pts[i.saturating_sub(1)];
    let hi = pts[(i + 1).min(pts.len() - 1)];
    let (q_ref, v_ref) = golden_max(lo, hi, &mut g)?;
    Ok(if v_ref > v { (q_ref, v_ref) } else { (pts[i], v) })
}

fn golden_max(mut a: f64, mut b: f64, g: &mut impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    while (b - a) > REFINE_RESOLUTION * (1.0 + a.abs()) {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - ratio * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + ratio * (b - a);
            gd = g(d)?;
        }
    }
    Ok(if gc >= gd { (c, gc) } else { (d, gd) })
}

/// Largest spectral radius of the closed loop over the curvature range.
pub fn worst_case_rate_quadratic(alg: &AlgorithmRealization, fc: &FunctionClass, grid: &CurvatureGrid) -> Result<f64> {
    fc.validate()?;
    let (_, rho) = grid_max(grid, |q| Ok(linalg::spectral_radius(&closed_loop(alg, q))))?;
    Ok(rho)
}

/// Curvature at which the worst-case quadratic rate is attained.
pub fn worst_case_curvature(alg: &AlgorithmRealization, fc: &FunctionClass, grid: &CurvatureGrid) -> Result<f64> {
    fc.validate()?;
    Ok(grid_max(grid, |q| Ok(linalg::spectral_radius(&closed_loop(alg, q))))?.0)
}

/// Solve `X = T X Tᵀ + W` for stable `T` through the Kronecker form
/// `(I − T ⊗ T) vec X = vec W`.
pub fn solve_discrete_lyapunov(t: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    if t.ncols() != n || w.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "T is {}x{}, W is {}x{}",
            t.nrows(),
            t.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let radius = linalg::spectral_radius(t);
    if radius >= 1.0 {
        return Err(Error::Unstable { radius, at: None });
    }
    let lhs = DMatrix::identity(n * n, n * n) - t.kronecker(t);
    let rhs = DVector::from_column_slice(w.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular Lyapunov operator".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(linalg::symmetrize(&x))
}

/// Stationary output variance of one mode under unit-variance noise.
pub fn mode_output_variance(alg: &AlgorithmRealization, q: f64) -> Result<f64> {
    let t = closed_loop(alg, q);
    let w = alg.b() * alg.b().transpose();
    let x = solve_discrete_lyapunov(&t, &w).map_err(|e| match e {
        Error::Unstable { radius, .. } => Error::Unstable { radius, at: Some(q) },
        other => other,
    })?;
    Ok((alg.c() * x * alg.c().transpose())[(0, 0)])
}

/// Worst-case root-mean-square output error `√(d · max_q σ² v(q))`, with all
/// Hessian eigenvalues placed at the worst curvature.
pub fn quadratic_sensitivity(
    alg: &AlgorithmRealization,
    fc: &FunctionClass,
    sigma: f64,
    d: usize,
    grid: &CurvatureGrid,
) -> Result<f64> {
    fc.validate()?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be nonnegative")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension d must be positive".into()));
    }
    let (_, v) = grid_max(grid, |q| mode_output_variance(alg, q))?;
    Ok(sigma * (d as f64 * v.max(0.0)).sqrt())
}

/// Curvature of the mode with the largest stationary output variance.
pub fn sensitivity_curvature(alg: &AlgorithmRealization, fc: &FunctionClass, grid: &CurvatureGrid) -> Result<f64> {
    fc.validate()?;
    Ok(grid_max(grid, |q| mode_output_variance(alg, q))?.0)
}
