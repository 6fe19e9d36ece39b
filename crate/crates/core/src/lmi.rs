//! Assembly of the rate and sensitivity LMIs.
//!
//! Both problems are affine in the decision variables `(P, p, Λ₁, Λ₂)`:
//! `P` is a symmetric `(n+2ℓ)×(n+2ℓ)` matrix, `p ∈ ℝ^ℓ` weighs past
//! function values, and `Λ₁, Λ₂ ≥ 0` combine interpolation inequalities.
//! Matrix constraints have the sense `⪯ 0`, vector constraints `≤ 0`
//! elementwise.
//!
//! Two routes produce the constraint values at a point. [`LmiProblem`]
//! stores one coefficient matrix per scalar variable and is what the
//! solvers consume; [`rate_lmi_values`] and [`sensitivity_lmi_values`]
//! substitute the variables directly into the block products and are what
//! certificate replay uses.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algomodel::{rows_of, FunctionClass};
use crate::error::{Error, Result};
use crate::interp::{multiplier_form, off_diagonal_pairs, MultiplierBasis, MultiplierLambda};
use crate::lifting::{truncation_matrices, LiftedSystem, TruncationPair};
use crate::linalg;

pub const VAR_P: &str = "P";
pub const VAR_P_VEC: &str = "p";
pub const VAR_LAMBDA1: &str = "Lambda1";
pub const VAR_LAMBDA2: &str = "Lambda2";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarShape {
    /// Symmetric matrix; one scalar per entry on or above the diagonal.
    Symmetric {
        dim: usize,
    },
    Free {
        len: usize,
    },
    /// Square matrix with zero diagonal and nonnegative off-diagonal entries.
    OffDiagonalNonneg {
        size: usize,
    },
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Symmetric { dim } => dim * (dim + 1) / 2,
            VarShape::Free { len } => len,
            VarShape::OffDiagonalNonneg { size } => size * size.saturating_sub(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub shape: VarShape,
    pub offset: usize,
}

/// Named variable blocks laid out contiguously in one scalar vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub blocks: Vec<VarBlock>,
}

/// Decision variables by name; vectors are stored as single columns.
pub type NamedValues = BTreeMap<String, DMatrix<f64>>;

/// Upper-triangle positions of a symmetric matrix, column-major.
fn sym_positions(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(|j| (0..=j).map(move |i| (i, j)))
}

impl VariableLayout {
    pub fn push(&mut self, name: &str, shape: VarShape) -> usize {
        let offset = self.total();
        self.blocks.push(VarBlock {
            name: name.to_string(),
            shape,
            offset,
        });
        offset
    }

    pub fn total(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.shape.len())
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Scalar indices constrained to be nonnegative.
    pub fn nonnegative_indices(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter(|b| matches!(b.shape, VarShape::OffDiagonalNonneg { .. }))
            .flat_map(|b| b.offset..b.offset + b.shape.len())
            .collect()
    }

    pub fn decode(&self, x: &[f64]) -> Result<NamedValues> {
        if x.len() != self.total() {
            return Err(Error::Dimension(format!(
                "variable vector has length {}, layout expects {}",
                x.len(),
                self.total()
            )));
        }
        let mut out = NamedValues::new();
        for b in &self.blocks {
            let vals = &x[b.offset..b.offset + b.shape.len()];
            let m = match b.shape {
                VarShape::Symmetric { dim } => {
                    let mut m = DMatrix::zeros(dim, dim);
                    for (k, (i, j)) in sym_positions(dim).enumerate() {
                        m[(i, j)] = vals[k];
                        m[(j, i)] = vals[k];
                    }
                    m
                }
                VarShape::Free { len } => DMatrix::from_column_slice(len, 1, vals),
                VarShape::OffDiagonalNonneg { size } => {
                    let mut m = DMatrix::zeros(size, size);
                    for (k, (i, j)) in off_diagonal_pairs(size).into_iter().enumerate() {
                        m[(i, j)] = vals[k];
                    }
                    m
                }
            };
            out.insert(b.name.clone(), m);
        }
        Ok(out)
    }

    /// Inverse of [`decode`](Self::decode); symmetric blocks read the upper
    /// triangle and nonnegative blocks ignore the diagonal.
    pub fn encode(&self, values: &NamedValues) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.total()];
        for b in &self.blocks {
            let m = values
                .get(&b.name)
                .ok_or_else(|| Error::CertificateMismatch(format!("missing variable `{}`", b.name)))?;
            let dst = &mut x[b.offset..b.offset + b.shape.len()];
            let expect = match b.shape {
                VarShape::Symmetric { dim } => (dim, dim),
                VarShape::Free { len } => (len, 1),
                VarShape::OffDiagonalNonneg { size } => (size, size),
            };
            if m.shape() != expect {
                return Err(Error::CertificateMismatch(format!(
                    "variable `{}` has shape {:?}, expected {:?}",
                    b.name,
                    m.shape(),
                    expect
                )));
            }
            match b.shape {
                VarShape::Symmetric { dim } => {
                    for (k, (i, j)) in sym_positions(dim).enumerate() {
                        dst[k] = m[(i, j)];
                    }
                }
                VarShape::Free { .. } => dst.copy_from_slice(m.as_slice()),
                VarShape::OffDiagonalNonneg { size } => {
                    for (k, (i, j)) in off_diagonal_pairs(size).into_iter().enumerate() {
                        dst[k] = m[(i, j)];
                    }
                }
            }
        }
        Ok(x)
    }
}

/// `constant + Σ x_i · coef_i`, every matrix symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSymMatrix {
    pub dim: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineSymMatrix {
    pub fn new(constant: DMatrix<f64>) -> Self {
        Self {
            dim: constant.nrows(),
            constant: linalg::symmetrize(&constant),
            terms: Vec::new(),
        }
    }

    /// Adds `coef` to the coefficient of variable `var` (symmetrized).
    pub fn add_term(&mut self, var: usize, coef: DMatrix<f64>) {
        debug_assert_eq!(coef.shape(), (self.dim, self.dim));
        let coef = linalg::symmetrize(&coef);
        match self.terms.iter_mut().find(|(v, _)| *v == var) {
            Some((_, c)) => *c += coef,
            None => self.terms.push((var, coef)),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (var, coef) in &self.terms {
            if x[*var] != 0.0 {
                out += coef * x[*var];
            }
        }
        out
    }
}

/// `constant + Σ x_i · coef_i` for vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineVector {
    pub len: usize,
    pub constant: DVector<f64>,
    pub terms: Vec<(usize, DVector<f64>)>,
}

impl AffineVector {
    pub fn new(constant: DVector<f64>) -> Self {
        Self {
            len: constant.len(),
            constant,
            terms: Vec::new(),
        }
    }

    pub fn add_term(&mut self, var: usize, coef: DVector<f64>) {
        debug_assert_eq!(coef.len(), self.len);
        match self.terms.iter_mut().find(|(v, _)| *v == var) {
            Some((_, c)) => *c += coef,
            None => self.terms.push((var, coef)),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> DVector<f64> {
        let mut out = self.constant.clone();
        for (var, coef) in &self.terms {
            out += coef * x[*var];
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConstraint {
    pub name: String,
    pub expr: AffineSymMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorConstraint {
    pub name: String,
    pub expr: AffineVector,
}

/// Affine matrix inequalities `⪯ 0`, affine vector inequalities `≤ 0`,
/// declared variables, and an optional linear objective to minimize.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiProblem {
    pub label: String,
    pub layout: VariableLayout,
    pub matrix_constraints: Vec<MatrixConstraint>,
    pub vector_constraints: Vec<VectorConstraint>,
    /// Dense objective coefficients over all scalar variables.
    pub objective: Option<DVector<f64>>,
}

/// Constraint values at a point, by constraint name.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiValues {
    pub matrices: Vec<(String, DMatrix<f64>)>,
    pub vectors: Vec<(String, DVector<f64>)>,
}

impl LmiValues {
    /// Largest eigenvalue over all matrix constraints (`-inf` if none).
    pub fn max_matrix_eigenvalue(&self) -> f64 {
        self.matrices
            .iter()
            .map(|(_, m)| linalg::max_eigenvalue(m))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest entry over all vector constraints (`-inf` if none).
    pub fn max_vector_entry(&self) -> f64 {
        self.vectors
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_eigenvalues(&self) -> Vec<(String, f64)> {
        self.matrices
            .iter()
            .map(|(n, m)| (n.clone(), linalg::max_eigenvalue(m)))
            .collect()
    }

    pub fn max_entries(&self) -> Vec<(String, f64)> {
        self.vectors
            .iter()
            .map(|(n, v)| (n.clone(), v.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
            .collect()
    }
}

impl LmiProblem {
    pub fn num_variables(&self) -> usize {
        self.layout.total()
    }

    /// Checks coefficient shapes and symmetry against the declarations.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_variables();
        for c in &self.matrix_constraints {
            let e = &c.expr;
            if e.constant.shape() != (e.dim, e.dim) {
                return Err(Error::Dimension(format!(
                    "constraint {}: constant has wrong shape",
                    c.name
                )));
            }
            if linalg::asymmetry(&e.constant) > 0.0 {
                return Err(Error::NotSymmetric(linalg::asymmetry(&e.constant)));
            }
            for (v, coef) in &e.terms {
                if *v >= n || coef.shape() != (e.dim, e.dim) {
                    return Err(Error::Dimension(format!(
                        "constraint {}: bad term for variable {v}",
                        c.name
                    )));
                }
                if linalg::asymmetry(coef) > 0.0 {
                    return Err(Error::NotSymmetric(linalg::asymmetry(coef)));
                }
            }
        }
        for c in &self.vector_constraints {
            let e = &c.expr;
            if e.constant.len() != e.len || e.terms.iter().any(|(v, coef)| *v >= n || coef.len() != e.len) {
                return Err(Error::Dimension(format!("constraint {}: inconsistent shapes", c.name)));
            }
        }
        if let Some(obj) = &self.objective {
            if obj.len() != n {
                return Err(Error::Dimension("objective length differs from variable count".into()));
            }
        }
        Ok(())
    }

    /// Constraint values through the per-variable coefficient expansion.
    pub fn evaluate(&self, x: &[f64]) -> LmiValues {
        LmiValues {
            matrices: self
                .matrix_constraints
                .iter()
                .map(|c| (c.name.clone(), c.expr.evaluate(x)))
                .collect(),
            vectors: self
                .vector_constraints
                .iter()
                .map(|c| (c.name.clone(), c.expr.evaluate(x)))
                .collect(),
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> Option<f64> {
        self.objective
            .as_ref()
            .map(|c| c.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// Dense JSON dump: every constant and per-variable coefficient.
    pub fn debug_dump(&self) -> LmiDump {
        let mat = |c: &MatrixConstraint| MatrixDump {
            name: c.name.clone(),
            dim: c.expr.dim,
            constant: rows_of(&c.expr.constant),
            coefficients: c.expr.terms.iter().map(|(v, m)| (*v, rows_of(m))).collect(),
        };
        let vec = |c: &VectorConstraint| VectorDump {
            name: c.name.clone(),
            len: c.expr.len,
            constant: c.expr.constant.iter().copied().collect(),
            coefficients: c
                .expr
                .terms
                .iter()
                .map(|(v, m)| (*v, m.iter().copied().collect()))
                .collect(),
        };
        LmiDump {
            label: self.label.clone(),
            num_variables: self.num_variables(),
            variables: self.layout.clone(),
            matrix_constraints: self.matrix_constraints.iter().map(mat).collect(),
            vector_constraints: self.vector_constraints.iter().map(vec).collect(),
            objective: self.objective.as_ref().map(|o| o.iter().copied().collect()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmiDump {
    pub label: String,
    pub num_variables: usize,
    pub variables: VariableLayout,
    pub matrix_constraints: Vec<MatrixDump>,
    pub vector_constraints: Vec<VectorDump>,
    pub objective: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixDump {
    pub name: String,
    pub dim: usize,
    pub constant: Vec<Vec<f64>>,
    /// `(variable index, coefficient)`; the constraint reads
    /// `constant + Σ x_i coef_i ⪯ 0`.
    pub coefficients: Vec<(usize, Vec<Vec<f64>>)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorDump {
    pub name: String,
    pub len: usize,
    pub constant: Vec<f64>,
    pub coefficients: Vec<(usize, Vec<f64>)>,
}

/// Lyapunov parameters and multipliers. `P` need not be positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovVariables {
    pub p_mat: DMatrix<f64>,
    pub p_vec: DVector<f64>,
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
}

impl LyapunovVariables {
    pub fn from_named(values: &NamedValues) -> Result<Self> {
        let get = |name: &str| {
            values
                .get(name)
                .cloned()
                .ok_or_else(|| Error::CertificateMismatch(format!("missing variable `{name}`")))
        };
        let p_vec = get(VAR_P_VEC)?;
        Ok(Self {
            p_mat: get(VAR_P)?,
            p_vec: DVector::from_column_slice(p_vec.as_slice()),
            lambda1: get(VAR_LAMBDA1)?,
            lambda2: get(VAR_LAMBDA2)?,
        })
    }

    pub fn to_named(&self) -> NamedValues {
        let mut out = NamedValues::new();
        out.insert(VAR_P.into(), self.p_mat.clone());
        out.insert(
            VAR_P_VEC.into(),
            DMatrix::from_column_slice(self.p_vec.len(), 1, self.p_vec.as_slice()),
        );
        out.insert(VAR_LAMBDA1.into(), self.lambda1.clone());
        out.insert(VAR_LAMBDA2.into(), self.lambda2.clone());
        out
    }

    /// Shapes must match the lifted system of memory `ell` and state `n`.
    pub fn check_shapes(&self, ls: &LiftedSystem) -> Result<()> {
        let s = ls.state_dim();
        let k = ls.ell + 2;
        let ok = self.p_mat.shape() == (s, s)
            && self.p_vec.len() == ls.ell
            && self.lambda1.shape() == (k, k)
            && self.lambda2.shape() == (k, k);
        if ok {
            Ok(())
        } else {
            Err(Error::CertificateMismatch(format!(
                "variables have shapes P {:?}, p {}, Λ₁ {:?}, Λ₂ {:?}; lifted system with ℓ = {} needs P {s}x{s}, p {}, Λ {k}x{k}",
                self.p_mat.shape(),
                self.p_vec.len(),
                self.lambda1.shape(),
                self.lambda2.shape(),
                ls.ell,
                ls.ell
            )))
        }
    }
}

fn rate_layout(ls: &LiftedSystem) -> VariableLayout {
    let mut layout = VariableLayout::default();
    layout.push(VAR_P, VarShape::Symmetric { dim: ls.state_dim() });
    layout.push(VAR_P_VEC, VarShape::Free { len: ls.ell });
    layout.push(VAR_LAMBDA1, VarShape::OffDiagonalNonneg { size: ls.ell + 2 });
    layout.push(VAR_LAMBDA2, VarShape::OffDiagonalNonneg { size: ls.ell + 2 });
    layout
}

/// `Gᵀ S_ab G` for the symmetric basis element `S_ab` (`E_aa`, or
/// `E_ab + E_ba` off the diagonal), built from rows of `G`.
fn congruence_of_basis(g: &DMatrix<f64>, a: usize, b: usize) -> DMatrix<f64> {
    let ra = g.row(a).transpose();
    let rb = g.row(b).transpose();
    if a == b {
        &ra * ra.transpose()
    } else {
        &ra * rb.transpose() + &rb * ra.transpose()
    }
}

struct Offsets {
    p_mat: usize,
    p_vec: usize,
    lambda1: usize,
    lambda2: usize,
}

fn offsets(layout: &VariableLayout) -> Offsets {
    let off = |n: &str| layout.block(n).map(|b| b.offset).unwrap_or(0);
    Offsets {
        p_mat: off(VAR_P),
        p_vec: off(VAR_P_VEC),
        lambda1: off(VAR_LAMBDA1),
        lambda2: off(VAR_LAMBDA2),
    }
}

/// Common skeleton of both problems, parameterized by the contraction factor
/// `rho2` (`r²` for rate, `1` for sensitivity).
fn assemble_common(ls: &LiftedSystem, fc: &FunctionClass, rho2: f64, label: String) -> LmiProblem {
    let layout = rate_layout(ls);
    let off = offsets(&layout);
    let s = ls.state_dim();
    let ell = ls.ell;
    let basis = MultiplierBasis::new(ell, fc);
    let g_next = ls.next_state_map();
    let g_state = ls.state_map();
    let g_out = ls.output_map();
    let TruncationPair { zplus, z } = truncation_matrices(ell);

    let mut decrease = AffineSymMatrix::new(DMatrix::zeros(s + 1, s + 1));
    let mut positivity = AffineSymMatrix::new(DMatrix::zeros(s + 1, s + 1));
    for (k, (a, b)) in sym_positions(s).enumerate() {
        let next = congruence_of_basis(&g_next, a, b);
        let cur = congruence_of_basis(&g_state, a, b);
        decrease.add_term(off.p_mat + k, next - &cur * rho2);
        positivity.add_term(off.p_mat + k, -cur);
    }
    for (t, quad) in basis.quad.iter().enumerate() {
        let lifted = g_out.transpose() * quad * &g_out;
        decrease.add_term(off.lambda1 + t, lifted.clone());
        positivity.add_term(off.lambda2 + t, lifted);
    }

    // (Z₊ − ρ² Z)ᵀ p + π(Λ₁) ≤ 0 and −Zᵀ p + π(Λ₂) ≤ 0
    let mut decrease_lin = AffineVector::new(DVector::zeros(ell + 1));
    let mut positivity_lin = AffineVector::new(DVector::zeros(ell + 1));
    let shifted = (&zplus - &z * rho2).transpose();
    let zt = z.transpose();
    for i in 0..ell {
        decrease_lin.add_term(off.p_vec + i, shifted.column(i).into_owned());
        positivity_lin.add_term(off.p_vec + i, -zt.column(i).into_owned());
    }
    for (t, lin) in basis.lin.iter().enumerate() {
        decrease_lin.add_term(off.lambda1 + t, lin.clone());
        positivity_lin.add_term(off.lambda2 + t, lin.clone());
    }

    LmiProblem {
        label,
        layout,
        matrix_constraints: vec![
            MatrixConstraint {
                name: "decrease".into(),
                expr: decrease,
            },
            MatrixConstraint {
                name: "positivity".into(),
                expr: positivity,
            },
        ],
        vector_constraints: vec![
            VectorConstraint {
                name: "decrease_values".into(),
                expr: decrease_lin,
            },
            VectorConstraint {
                name: "positivity_values".into(),
                expr: positivity_lin,
            },
        ],
        objective: None,
    }
}

/// Feasibility problem certifying `rate ≤ r`.
pub fn assemble_rate_lmi(ls: &LiftedSystem, r: f64, fc: &FunctionClass) -> Result<LmiProblem> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("rate r = {r} must be positive")));
    }
    fc.validate()?;
    let mut prob = assemble_common(ls, fc, r * r, format!("rate(r = {r}, ell = {})", ls.ell));
    prob.matrix_constraints[1].expr.constant = ls.x_proj.transpose() * &ls.x_proj;
    Ok(prob)
}

/// Minimize `ℋᵀ P ℋ`; the minimum times `σ² d` bounds the squared sensitivity.
pub fn assemble_sensitivity_lmi(ls: &LiftedSystem, fc: &FunctionClass) -> Result<LmiProblem> {
    fc.validate()?;
    let mut prob = assemble_common(ls, fc, 1.0, format!("sensitivity(ell = {})", ls.ell));
    prob.matrix_constraints[0].expr.constant = ls.y_proj.transpose() * &ls.y_proj;
    let s = ls.state_dim();
    let off = offsets(&prob.layout).p_mat;
    let mut obj = DVector::zeros(prob.num_variables());
    for (k, (a, b)) in sym_positions(s).enumerate() {
        let w = ls.h[(a, 0)] * ls.h[(b, 0)];
        obj[off + k] = if a == b { w } else { 2.0 * w };
    }
    prob.objective = Some(obj);
    Ok(prob)
}

fn lambda_checked(m: &DMatrix<f64>) -> MultiplierLambda {
    // negative entries are reported by the residual check, not rejected here
    MultiplierLambda::new(m.map(|v| v.max(0.0))).unwrap_or_else(|_| MultiplierLambda::zeros(m.nrows() - 2))
}

fn direct_values(
    ls: &LiftedSystem,
    fc: &FunctionClass,
    rho2: f64,
    vars: &LyapunovVariables,
    state_weight: &DMatrix<f64>,
    output_weight: &DMatrix<f64>,
) -> Result<LmiValues> {
    vars.check_shapes(ls)?;
    let g_next = ls.next_state_map();
    let g_state = ls.state_map();
    let g_out = ls.output_map();
    let TruncationPair { zplus, z } = truncation_matrices(ls.ell);
    let (pi1, v1) = multiplier_form(&lambda_checked(&vars.lambda1), fc);
    let (pi2, v2) = multiplier_form(&lambda_checked(&vars.lambda2), fc);
    let p = &vars.p_mat;

    let decrease = g_next.transpose() * p * &g_next - g_state.transpose() * p * &g_state * rho2
        + g_out.transpose() * &pi1 * &g_out
        + output_weight;
    let positivity = state_weight - g_state.transpose() * p * &g_state + g_out.transpose() * &pi2 * &g_out;
    let decrease_lin = (&zplus - &z * rho2).transpose() * &vars.p_vec + v1;
    let positivity_lin = -z.transpose() * &vars.p_vec + v2;

    let k = ls.ell + 2;
    let sign = off_diagonal_pairs(k)
        .into_iter()
        .flat_map(|(i, j)| [-vars.lambda1[(i, j)], -vars.lambda2[(i, j)]])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LmiValues {
        matrices: vec![
            ("decrease".into(), linalg::symmetrize(&decrease)),
            ("positivity".into(), linalg::symmetrize(&positivity)),
        ],
        vectors: vec![
            ("decrease_values".into(), decrease_lin),
            ("positivity_values".into(), positivity_lin),
            ("multiplier_sign".into(), DVector::from_element(1, sign)),
        ],
    })
}

/// Rate constraints evaluated by substituting `(P, p, Λ₁, Λ₂)` directly.
/// The extra `multiplier_sign` entry is `max(−Λ_ij)` over off-diagonal
/// entries of both multipliers, so it is `≤ 0` exactly when they are nonnegative.
pub fn rate_lmi_values(ls: &LiftedSystem, r: f64, fc: &FunctionClass, vars: &LyapunovVariables) -> Result<LmiValues> {
    let s = ls.state_dim();
    direct_values(
        ls,
        fc,
        r * r,
        vars,
        &(ls.x_proj.transpose() * &ls.x_proj),
        &DMatrix::zeros(s + 1, s + 1),
    )
}

/// Sensitivity constraints evaluated by direct substitution.
pub fn sensitivity_lmi_values(ls: &LiftedSystem, fc: &FunctionClass, vars: &LyapunovVariables) -> Result<LmiValues> {
    let s = ls.state_dim();
    direct_values(
        ls,
        fc,
        1.0,
        vars,
        &DMatrix::zeros(s + 1, s + 1),
        &(ls.y_proj.transpose() * &ls.y_proj),
    )
}

/// `ℋᵀ P ℋ`.
pub fn noise_gain(ls: &LiftedSystem, p_mat: &DMatrix<f64>) -> f64 {
    (ls.h.transpose() * p_mat * &ls.h)[(0, 0)]
}
