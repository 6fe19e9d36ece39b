//! Lifted algorithm dynamics.
//!
//! The lifted state stacks the current state (relative to the fixed point)
//! with the last `ℓ` outputs and gradients:
//! `x_k = [ξ_k − ξ⋆; y_{k−1}; …; y_{k−ℓ}; u_{k−1}; …; u_{k−ℓ}]`, an
//! `(n + 2ℓ) × d` matrix. Its output is the stacked history
//! `[y_k; …; y_{k−ℓ}; u_k; …; u_{k−ℓ}]` of length `2ℓ + 2`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::algomodel::AlgorithmRealization;

/// `Z₊ = [I_ℓ | 0]` drops the oldest entry of a lifted signal and
/// `Z = [0 | I_ℓ]` drops the newest.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationPair {
    pub zplus: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

pub fn truncation_matrices(ell: usize) -> TruncationPair {
    let mut zplus = DMatrix::zeros(ell, ell + 1);
    let mut z = DMatrix::zeros(ell, ell + 1);
    for i in 0..ell {
        zplus[(i, i)] = 1.0;
        z[(i, i + 1)] = 1.0;
    }
    TruncationPair { zplus, z }
}

/// Lifted realization `(𝒜, ℬ, ℋ, 𝒞, 𝒟)` with projections `(𝒳, 𝒴, 𝒰)`
/// acting on `[x_k; u_k]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftedSystem {
    pub ell: usize,
    pub n: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Noise input matrix.
    pub h: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub x_proj: DMatrix<f64>,
    pub y_proj: DMatrix<f64>,
    pub u_proj: DMatrix<f64>,
}

impl LiftedSystem {
    pub fn new(alg: &AlgorithmRealization, ell: usize) -> Self {
        build_lifted(alg, ell)
    }

    /// Dimension `n + 2ℓ` of the lifted state.
    pub fn state_dim(&self) -> usize {
        self.n + 2 * self.ell
    }

    /// Number of rows `2ℓ + 2` of the lifted output `[𝐲; 𝐮]`.
    pub fn output_dim(&self) -> usize {
        2 * self.ell + 2
    }

    /// `[𝒜 ℬ]`, mapping `[x_k; u_k]` to `x_{k+1}` (noise-free).
    pub fn next_state_map(&self) -> DMatrix<f64> {
        hstack(&self.a, &self.b)
    }

    /// `[I 0]`, selecting `x_k` from `[x_k; u_k]`.
    pub fn state_map(&self) -> DMatrix<f64> {
        let s = self.state_dim();
        DMatrix::identity(s, s + 1)
    }

    /// `[𝒞 𝒟]`, mapping `[x_k; u_k]` to `[𝐲_k; 𝐮_k]`.
    pub fn output_map(&self) -> DMatrix<f64> {
        hstack(&self.c, &self.d)
    }

    /// Stack a lifted state from the current (shifted) state and the past
    /// outputs/gradients, most recent first. Each row of `past_y`/`past_u`
    /// is a `1 × d` signal relative to the fixed point.
    pub fn stack_state(
        &self,
        xi_tilde: &DMatrix<f64>,
        past_y: &[DMatrix<f64>],
        past_u: &[DMatrix<f64>],
    ) -> DMatrix<f64> {
        assert_eq!(xi_tilde.nrows(), self.n);
        assert_eq!(past_y.len(), self.ell);
        assert_eq!(past_u.len(), self.ell);
        let d = xi_tilde.ncols();
        let mut x = DMatrix::zeros(self.state_dim(), d);
        x.rows_mut(0, self.n).copy_from(xi_tilde);
        for (i, row) in past_y.iter().enumerate() {
            x.row_mut(self.n + i).copy_from(&row.row(0));
        }
        for (i, row) in past_u.iter().enumerate() {
            x.row_mut(self.n + self.ell + i).copy_from(&row.row(0));
        }
        x
    }
}

pub fn build_lifted(alg: &AlgorithmRealization, ell: usize) -> LiftedSystem {
    let n = alg.n();
    let (a, b, c) = (alg.a(), alg.b(), alg.c());
    let TruncationPair { zplus, z } = truncation_matrices(ell);
    let mut e1 = DMatrix::zeros(ell + 1, 1);
    e1[(0, 0)] = 1.0;
    let shift = &zplus * z.transpose();
    let zplus_e1 = &zplus * &e1;
    let s = n + 2 * ell;

    let mut la = DMatrix::zeros(s, s);
    la.view_mut((0, 0), (n, n)).copy_from(a);
    la.view_mut((n, 0), (ell, n)).copy_from(&(&zplus_e1 * c));
    la.view_mut((n, n), (ell, ell)).copy_from(&shift);
    la.view_mut((n + ell, n + ell), (ell, ell)).copy_from(&shift);

    let mut lb = DMatrix::zeros(s, 1);
    lb.view_mut((0, 0), (n, 1)).copy_from(b);
    lb.view_mut((n + ell, 0), (ell, 1)).copy_from(&zplus_e1);

    let mut lh = DMatrix::zeros(s, 1);
    lh.view_mut((0, 0), (n, 1)).copy_from(b);

    let mut lc = DMatrix::zeros(2 * ell + 2, s);
    lc.view_mut((0, 0), (ell + 1, n)).copy_from(&(&e1 * c));
    lc.view_mut((0, n), (ell + 1, ell)).copy_from(&z.transpose());
    lc.view_mut((ell + 1, n + ell), (ell + 1, ell))
        .copy_from(&z.transpose());

    let mut ld = DMatrix::zeros(2 * ell + 2, 1);
    ld.view_mut((ell + 1, 0), (ell + 1, 1)).copy_from(&e1);

    let x_proj = DMatrix::identity(n, s + 1);
    let mut y_proj = DMatrix::zeros(1, s + 1);
    y_proj.view_mut((0, 0), (1, n)).copy_from(c);
    let mut u_proj = DMatrix::zeros(1, s + 1);
    u_proj[(0, s)] = 1.0;

    LiftedSystem {
        ell,
        n,
        a: la,
        b: lb,
        h: lh,
        c: lc,
        d: ld,
        x_proj,
        y_proj,
        u_proj,
    }
}

fn hstack(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(left.nrows(), right.nrows());
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}
