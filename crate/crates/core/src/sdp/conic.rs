//! Backend-facing problem form.
//!
//! `minimize cᵀx` subject to `F_k(x) = F_k0 + Σ x_i F_ki ⪯ 0` for each block
//! and `g_r(x) = g_r0 + a_rᵀ x ≤ 0` for each row. Coefficient matrices are
//! stored column-major vectorized, one row per variable that enters the
//! block.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::lmi::LmiProblem;

#[derive(Clone, Debug)]
pub struct ConicBlock {
    pub dim: usize,
    pub constant: DVector<f64>,
    pub vars: Vec<usize>,
    /// `vars.len() × dim²`; row `t` is `vec(F_{k, vars[t]})`.
    pub coefs: DMatrix<f64>,
}

impl ConicBlock {
    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let mut v = self.constant.clone();
        for (t, &var) in self.vars.iter().enumerate() {
            let xv = x[var];
            if xv != 0.0 {
                for (dst, c) in v.iter_mut().zip(self.coefs.row(t).iter()) {
                    *dst += xv * c;
                }
            }
        }
        DMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// `Σ_t Δx_{vars[t]} F_t`.
    pub fn linear_part(&self, dx: &[f64]) -> DMatrix<f64> {
        let w = DVector::from_iterator(self.vars.len(), self.vars.iter().map(|&v| dx[v]));
        let v = self.coefs.tr_mul(&w);
        DMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// `out[vars[t]] += ⟨F_t, g⟩` for a symmetric `g`.
    pub fn adjoint_into(&self, g: &DMatrix<f64>, scale: f64, out: &mut DVector<f64>) {
        let gv = DVector::from_column_slice(g.as_slice());
        let r = &self.coefs * gv;
        for (t, &var) in self.vars.iter().enumerate() {
            out[var] += scale * r[t];
        }
    }

    /// Adds `⟨F_i, Z F_j S⁻¹⟩` to `m` for the variables of this block, using
    /// `vec(Z F S⁻¹) = (S⁻¹ ⊗ Z) vec(F)` for symmetric `Z`, `S⁻¹`.
    pub fn add_scaled_gram(&self, z: &DMatrix<f64>, s_inv: &DMatrix<f64>, m: &mut DMatrix<f64>) {
        if self.vars.is_empty() {
            return;
        }
        let kron = s_inv.kronecker(z);
        let w = &self.coefs * kron;
        let local = &w * self.coefs.transpose();
        for (a, &va) in self.vars.iter().enumerate() {
            for (b, &vb) in self.vars.iter().enumerate() {
                m[(va, vb)] += 0.5 * (local[(a, b)] + local[(b, a)]);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub constant: f64,
    pub coefs: Vec<(usize, f64)>,
}

impl LinearRow {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.linear_part(x)
    }

    pub fn linear_part(&self, dx: &[f64]) -> f64 {
        self.coefs.iter().map(|&(v, a)| a * dx[v]).sum()
    }
}

#[derive(Clone, Debug)]
pub struct ConicForm {
    pub nvar: usize,
    pub blocks: Vec<ConicBlock>,
    pub rows: Vec<LinearRow>,
    pub objective: DVector<f64>,
}

impl ConicForm {
    /// Barrier parameter `ν = Σ dim_k + #rows`.
    pub fn degree(&self) -> f64 {
        (self.blocks.iter().map(|b| b.dim).sum::<usize>() + self.rows.len()) as f64
    }

    /// Slacks `S_k = −F_k(x)`, `s_r = −g_r(x)`.
    pub fn slacks(&self, x: &[f64]) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let s = self.blocks.iter().map(|b| -b.value(x)).collect();
        let r = self.rows.iter().map(|r| -r.value(x)).collect();
        (s, r)
    }

    pub fn strictly_feasible(&self, x: &[f64]) -> bool {
        let (s, r) = self.slacks(x);
        r.iter().all(|&v| v > 0.0) && s.into_iter().all(|m| m.cholesky().is_some())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `∑_r a_r a_rᵀ w_r` added into `m`.
    pub fn add_row_gram(&self, weights: &[f64], m: &mut DMatrix<f64>) {
        for (row, &w) in self.rows.iter().zip(weights) {
            for &(i, ai) in &row.coefs {
                for &(j, aj) in &row.coefs {
                    m[(i, j)] += w * ai * aj;
                }
            }
        }
    }
}

fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Cholesky factor of a symmetric positive semidefinite Newton matrix after
/// Jacobi scaling `D M D`, `D = diag(M)^(-1/2)`. A growing diagonal shift is
/// added when the scaled matrix is numerically singular.
pub(super) struct SchurFactor {
    chol: Cholesky<f64, Dyn>,
    scale: DVector<f64>,
}

impl SchurFactor {
    pub(super) fn new(mut m: DMatrix<f64>) -> Option<Self> {
        let n = m.nrows();
        let scale = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let d = m[(i, i)];
                if d > 0.0 && d.is_finite() {
                    1.0 / d.sqrt()
                } else {
                    1.0
                }
            }),
        );
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] *= scale[i] * scale[j];
            }
        }
        let mut reg = 0.0;
        for _ in 0..8 {
            if let Some(chol) = m.clone().cholesky() {
                return Some(Self { chol, scale });
            }
            let next = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
            for i in 0..n {
                m[(i, i)] += next - reg;
            }
            reg = next;
        }
        None
    }

    pub(super) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.chol.solve(&b.component_mul(&self.scale));
        y.component_mul(&self.scale)
    }
}

/// Magnitude of the problem data: the largest spectral norm of a constant
/// matrix term or absolute constant vector entry, at least 1.
pub fn data_scale(problem: &LmiProblem) -> f64 {
    let mut scale: f64 = 1.0;
    for c in &problem.matrix_constraints {
        let ev = crate::linalg::sym_eigenvalues(&c.expr.constant);
        if let (Some(lo), Some(hi)) = (ev.first(), ev.last()) {
            scale = scale.max(lo.abs()).max(hi.abs());
        }
    }
    for c in &problem.vector_constraints {
        scale = scale.max(c.expr.constant.amax());
    }
    scale
}

/// `‖F_k0‖ + Σ |x_i| ‖F_ki‖` (Frobenius), maximized over constraints. Rounding
/// error in evaluating a constraint at `x` is a small multiple of this.
pub fn evaluation_scale(problem: &LmiProblem, x: &[f64]) -> f64 {
    let mut scale: f64 = 0.0;
    for c in &problem.matrix_constraints {
        let e = &c.expr;
        let s = e.constant.norm() + e.terms.iter().map(|(v, m)| x[*v].abs() * m.norm()).sum::<f64>();
        scale = scale.max(s);
    }
    for c in &problem.vector_constraints {
        let e = &c.expr;
        let s = e.constant.amax() + e.terms.iter().map(|(v, m)| x[*v].abs() * m.amax()).sum::<f64>();
        scale = scale.max(s);
    }
    scale
}

/// Relative size of a margin that floating-point evaluation cannot fake.
pub const ROUNDOFF_GUARD: f64 = 1e-12;

/// Largest constraint violation at `x`: the top eigenvalue of every matrix
/// constraint and every vector entry. Sign constraints are not included.
pub fn feasibility_level(problem: &LmiProblem, x: &[f64]) -> f64 {
    let v = problem.evaluate(x);
    v.max_matrix_eigenvalue().max(v.max_vector_entry())
}

/// Matrix and vector constraints shifted by `shift` (`+shift·I`, `+shift·1`).
/// With `relax_var = Some(t)` the shift is `−x_t` instead.
fn push_problem_constraints(problem: &LmiProblem, form: &mut ConicForm, shift: f64, relax_var: Option<usize>) {
    for c in &problem.matrix_constraints {
        let e = &c.expr;
        let dim = e.dim;
        let mut constant = e.constant.clone();
        for i in 0..dim {
            constant[(i, i)] += shift;
        }
        let mut vars: Vec<usize> = e.terms.iter().map(|(v, _)| *v).collect();
        let mut rows: Vec<DVector<f64>> = e.terms.iter().map(|(_, m)| vectorize(m)).collect();
        if let Some(t) = relax_var {
            vars.push(t);
            rows.push(vectorize(&(-DMatrix::<f64>::identity(dim, dim))));
        }
        let mut coefs = DMatrix::zeros(vars.len(), dim * dim);
        for (k, r) in rows.iter().enumerate() {
            coefs.row_mut(k).copy_from(&r.transpose());
        }
        form.blocks.push(ConicBlock {
            dim,
            constant: vectorize(&constant),
            vars,
            coefs,
        });
    }
    for c in &problem.vector_constraints {
        let e = &c.expr;
        for entry in 0..e.len {
            let mut coefs: Vec<(usize, f64)> = e
                .terms
                .iter()
                .filter(|(_, v)| v[entry] != 0.0)
                .map(|(var, v)| (*var, v[entry]))
                .collect();
            if let Some(t) = relax_var {
                coefs.push((t, -1.0));
            }
            if coefs.is_empty() {
                // constant-only row; kept so an infeasible constant is not lost
                coefs.push((0, 0.0));
            }
            form.rows.push(LinearRow {
                constant: e.constant[entry] + shift,
                coefs,
            });
        }
    }
}

fn push_sign_and_box(problem: &LmiProblem, form: &mut ConicForm, bound: f64) {
    for i in problem.layout.nonnegative_indices() {
        form.rows.push(LinearRow {
            constant: 0.0,
            coefs: vec![(i, -1.0)],
        });
    }
    // |x_i| ≤ R, scaled so the slack is O(1)
    for i in 0..problem.num_variables() {
        for sign in [1.0, -1.0] {
            form.rows.push(LinearRow {
                constant: -1.0,
                coefs: vec![(i, sign / bound)],
            });
        }
    }
}

/// `min t` s.t. `F_k(x) ⪯ tI`, `g(x) ≤ t`, sign constraints, box, `t ≥ −1`.
/// The extra variable `t` is last.
pub fn phase_one_form(problem: &LmiProblem, bound: f64) -> ConicForm {
    let n = problem.num_variables();
    let mut form = ConicForm {
        nvar: n + 1,
        blocks: Vec::new(),
        rows: Vec::new(),
        objective: DVector::zeros(n + 1),
    };
    form.objective[n] = 1.0;
    push_problem_constraints(problem, &mut form, 0.0, Some(n));
    push_sign_and_box(problem, &mut form, bound);
    form.rows.push(LinearRow {
        constant: -1.0,
        coefs: vec![(n, -1.0)],
    });
    form
}

/// The original objective under `F_k(x) ⪯ −εI`, `g(x) ≤ −ε`, signs and box.
pub fn phase_two_form(problem: &LmiProblem, eps: f64, bound: f64) -> ConicForm {
    let n = problem.num_variables();
    let mut form = ConicForm {
        nvar: n,
        blocks: Vec::new(),
        rows: Vec::new(),
        objective: problem.objective.clone().unwrap_or_else(|| DVector::zeros(n)),
    };
    push_problem_constraints(problem, &mut form, eps, None);
    push_sign_and_box(problem, &mut form, bound);
    form
}

/// Largest `α ≥ 0` with `X + α ΔX ⪰ 0`, given the Cholesky factor of `X ≻ 0`.
pub fn max_step_psd(chol: &Cholesky<f64, Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(y) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(m) = l.solve_lower_triangular(&y.transpose()) else {
        return 0.0;
    };
    let lmin = crate::linalg::min_eigenvalue(&m);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Largest `α ≥ 0` with `s + α Δs ≥ 0` elementwise, for `s > 0`.
pub fn max_step_vec(s: &[f64], ds: &[f64]) -> f64 {
    s.iter()
        .zip(ds)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}
