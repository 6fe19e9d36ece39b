//! Infeasible primal-dual interior-point method.
//!
//! Works on the slack form `S_k = −F_k(x) ⪰ 0`, `s = −g(x) ≥ 0` with dual
//! matrices `Z_k ⪰ 0` and multipliers `z ≥ 0`. Each iteration linearizes
//! `Z S = σμI` in the HKM form `ΔZ = sym((R_c − Z ΔS) S⁻¹)`, reduces to the
//! Schur system `M Δx = r` with `M_ij = Σ_k ⟨F_ki, Z_k F_kj S_k⁻¹⟩`, and
//! takes a Mehrotra predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::conic::{max_step_psd, max_step_vec, ConicForm, SchurFactor};
use super::{Backend, Monitor, PhaseOutcome, SolverSettings};
use crate::linalg::symmetrize;

#[derive(Clone, Copy, Debug, Default)]
pub struct Ipm;

const STEP_FRACTION: f64 = 0.95;
const STALL_LIMIT: usize = 15;
const INITIAL_MU: f64 = 10.0;

struct Iterate {
    x: Vec<f64>,
    s_mat: Vec<DMatrix<f64>>,
    s_vec: Vec<f64>,
    z_mat: Vec<DMatrix<f64>>,
    z_vec: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    ds_mat: Vec<DMatrix<f64>>,
    ds_vec: Vec<f64>,
    dz_mat: Vec<DMatrix<f64>>,
    dz_vec: Vec<f64>,
}

/// Quantities fixed within one iteration.
struct Linearization<'a> {
    form: &'a ConicForm,
    s_inv: Vec<DMatrix<f64>>,
    /// Primal residuals `R_k = S_k + F_k(x)` and `ρ = s + g(x)`.
    r_mat: Vec<DMatrix<f64>>,
    r_vec: Vec<f64>,
    /// Dual residual `c + A*(Z)`.
    r_dual: DVector<f64>,
    schur: SchurFactor,
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

impl Linearization<'_> {
    fn direction(&self, it: &Iterate, sigma_mu: f64, corr: Option<&Direction>) -> Option<Direction> {
        let form = self.form;
        let mut rhs = -&self.r_dual;
        // R_c S⁻¹ = σμ S⁻¹ − Z − ΔZ_a ΔS_a S⁻¹
        let mut rc_sinv = Vec::with_capacity(form.blocks.len());
        for (k, block) in form.blocks.iter().enumerate() {
            let mut m = &self.s_inv[k] * sigma_mu - &it.z_mat[k];
            if let Some(c) = corr {
                m -= &c.dz_mat[k] * &c.ds_mat[k] * &self.s_inv[k];
            }
            let g = symmetrize(&(&m + &it.z_mat[k] * &self.r_mat[k] * &self.s_inv[k]));
            block.adjoint_into(&g, -1.0, &mut rhs);
            rc_sinv.push(m);
        }
        let mut rc_vec = Vec::with_capacity(form.rows.len());
        for (r, row) in form.rows.iter().enumerate() {
            let mut rc = sigma_mu - it.z_vec[r] * it.s_vec[r];
            if let Some(c) = corr {
                rc -= c.dz_vec[r] * c.ds_vec[r];
            }
            let w = (rc + it.z_vec[r] * self.r_vec[r]) / it.s_vec[r];
            for &(i, a) in &row.coefs {
                rhs[i] -= a * w;
            }
            rc_vec.push(rc);
        }
        let dx = self.schur.solve(&rhs);
        if dx.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx: Vec<f64> = dx.iter().copied().collect();

        let mut ds_mat = Vec::with_capacity(form.blocks.len());
        let mut dz_mat = Vec::with_capacity(form.blocks.len());
        for (k, block) in form.blocks.iter().enumerate() {
            let ds = -&self.r_mat[k] - block.linear_part(&dx);
            let dz = symmetrize(&(&rc_sinv[k] - &it.z_mat[k] * &ds * &self.s_inv[k]));
            ds_mat.push(ds);
            dz_mat.push(dz);
        }
        let mut ds_vec = Vec::with_capacity(form.rows.len());
        let mut dz_vec = Vec::with_capacity(form.rows.len());
        for (r, row) in form.rows.iter().enumerate() {
            let ds = -self.r_vec[r] - row.linear_part(&dx);
            ds_vec.push(ds);
            dz_vec.push((rc_vec[r] - it.z_vec[r] * ds) / it.s_vec[r]);
        }
        Some(Direction {
            dx,
            ds_mat,
            ds_vec,
            dz_mat,
            dz_vec,
        })
    }
}

/// Largest primal and dual steps to the cone boundary.
fn max_steps(it: &Iterate, d: &Direction, s_chol: &[Cholesky<f64, Dyn>]) -> Option<(f64, f64)> {
    let mut ap = max_step_vec(&it.s_vec, &d.ds_vec);
    let mut ad = max_step_vec(&it.z_vec, &d.dz_vec);
    for (k, sc) in s_chol.iter().enumerate().take(it.s_mat.len()) {
        ap = ap.min(max_step_psd(sc, &d.ds_mat[k]));
        let zc = it.z_mat[k].clone().cholesky()?;
        ad = ad.min(max_step_psd(&zc, &d.dz_mat[k]));
    }
    Some((ap, ad))
}

fn complementarity(it: &Iterate, d: Option<(&Direction, f64, f64)>) -> f64 {
    let mut total = 0.0;
    for k in 0..it.s_mat.len() {
        total += match d {
            None => inner(&it.z_mat[k], &it.s_mat[k]),
            Some((d, ap, ad)) => inner(&(&it.z_mat[k] + &d.dz_mat[k] * ad), &(&it.s_mat[k] + &d.ds_mat[k] * ap)),
        };
    }
    for r in 0..it.s_vec.len() {
        total += match d {
            None => it.z_vec[r] * it.s_vec[r],
            Some((d, ap, ad)) => (it.z_vec[r] + ad * d.dz_vec[r]) * (it.s_vec[r] + ap * d.ds_vec[r]),
        };
    }
    total
}

fn initial_iterate(form: &ConicForm, x0: &[f64]) -> Iterate {
    let (mut s_mat, mut s_vec) = form.slacks(x0);
    for s in s_mat.iter_mut() {
        let lmin = crate::linalg::min_eigenvalue(s);
        if lmin <= 1e-12 {
            let shift = 1.0 - lmin;
            for i in 0..s.nrows() {
                s[(i, i)] += shift;
            }
        }
    }
    for s in s_vec.iter_mut() {
        if *s <= 1e-12 {
            *s = 1.0;
        }
    }
    let s_inv: Vec<DMatrix<f64>> = s_mat
        .iter()
        .map(|s| {
            s.clone()
                .cholesky()
                .map(|c| c.inverse())
                .unwrap_or_else(|| DMatrix::identity(s.nrows(), s.nrows()))
        })
        .collect();
    let inv_vec: Vec<f64> = s_vec.iter().map(|s| 1.0 / s).collect();

    // centered start ZS = μ0 I on the slacks of x0
    let mu0 = INITIAL_MU;
    Iterate {
        x: x0.to_vec(),
        z_mat: s_inv.iter().map(|m| m * mu0).collect(),
        z_vec: inv_vec.iter().map(|v| v * mu0).collect(),
        s_mat,
        s_vec,
    }
}

/// Takes the step, shortening it if roundoff pushes a matrix out of the cone.
fn advance(it: &Iterate, dir: &Direction, mut ap: f64, mut ad: f64) -> Option<Iterate> {
    for _ in 0..30 {
        let s_mat: Vec<DMatrix<f64>> = it
            .s_mat
            .iter()
            .zip(&dir.ds_mat)
            .map(|(s, d)| symmetrize(&(s + d * ap)))
            .collect();
        let z_mat: Vec<DMatrix<f64>> = it
            .z_mat
            .iter()
            .zip(&dir.dz_mat)
            .map(|(z, d)| symmetrize(&(z + d * ad)))
            .collect();
        let s_vec: Vec<f64> = it.s_vec.iter().zip(&dir.ds_vec).map(|(s, d)| s + ap * d).collect();
        let z_vec: Vec<f64> = it.z_vec.iter().zip(&dir.dz_vec).map(|(z, d)| z + ad * d).collect();
        let s_ok = s_mat.iter().all(|m| m.clone().cholesky().is_some()) && s_vec.iter().all(|&v| v > 0.0);
        let z_ok = z_mat.iter().all(|m| m.clone().cholesky().is_some()) && z_vec.iter().all(|&v| v > 0.0);
        if s_ok && z_ok {
            let x = it.x.iter().zip(&dir.dx).map(|(x, d)| x + ap * d).collect();
            return Some(Iterate {
                x,
                s_mat,
                s_vec,
                z_mat,
                z_vec,
            });
        }
        if !s_ok {
            ap *= 0.5;
        }
        if !z_ok {
            ad *= 0.5;
        }
    }
    None
}

impl Backend for Ipm {
    fn name(&self) -> &'static str {
        "ipm"
    }

    fn minimize(
        &self,
        form: &ConicForm,
        x0: &[f64],
        settings: &SolverSettings,
        monitor: &mut Monitor<'_>,
    ) -> PhaseOutcome {
        let nu = form.degree().max(1.0);
        let c = &form.objective;
        let nb = 1.0
            + form
                .blocks
                .iter()
                .map(|b| b.constant.amax())
                .chain(form.rows.iter().map(|r| r.constant.abs()))
                .fold(0.0, f64::max);
        let nc = 1.0 + c.norm();
        let mut it = initial_iterate(form, x0);
        let outcome = |it: &Iterate,
                       converged: bool,
                       stopped_early: bool,
                       iterations: usize,
                       message: String,
                       lb: Option<f64>| PhaseOutcome {
            breakdown: it.x.iter().any(|v| !v.is_finite()),
            x: it.x.clone(),
            objective: form.objective_value(&it.x),
            lower_bound: lb,
            converged,
            stopped_early,
            iterations,
            message,
        };

        let mut best_merit = f64::INFINITY;
        let mut stalled = 0;
        for iter in 0..settings.max_iter {
            let f_vals: Vec<DMatrix<f64>> = form.blocks.iter().map(|b| b.value(&it.x)).collect();
            let r_mat: Vec<DMatrix<f64>> = it.s_mat.iter().zip(&f_vals).map(|(s, f)| s + f).collect();
            let r_vec: Vec<f64> = form
                .rows
                .iter()
                .zip(&it.s_vec)
                .map(|(row, s)| s + row.value(&it.x))
                .collect();
            let mut r_dual = c.clone();
            for (k, b) in form.blocks.iter().enumerate() {
                b.adjoint_into(&it.z_mat[k], 1.0, &mut r_dual);
            }
            for (row, z) in form.rows.iter().zip(&it.z_vec) {
                for &(i, a) in &row.coefs {
                    r_dual[i] += a * z;
                }
            }
            let gap = complementarity(&it, None);
            let mu = gap / nu;
            let pobj = form.objective_value(&it.x);
            let mut dobj = 0.0;
            for (k, b) in form.blocks.iter().enumerate() {
                dobj += b.constant.dot(&DVector::from_column_slice(it.z_mat[k].as_slice()));
            }
            for (row, z) in form.rows.iter().zip(&it.z_vec) {
                dobj += row.constant * z;
            }
            let pinf = (r_mat.iter().map(|m| m.norm_squared()).sum::<f64>() + r_vec.iter().map(|v| v * v).sum::<f64>())
                .sqrt()
                / nb;
            let dinf = r_dual.norm() / nc;
            let lb = dobj - r_dual.abs().sum() * settings.var_bound;

            if monitor(&it.x, Some(lb)) {
                return outcome(&it, false, true, iter, "stopped by monitor".into(), Some(lb));
            }
            let rel_gap = gap / (1.0 + pobj.abs() + dobj.abs());
            if pinf < settings.tol && dinf < settings.tol && rel_gap < settings.tol {
                return outcome(
                    &it,
                    true,
                    false,
                    iter,
                    format!("converged (gap {rel_gap:.1e})"),
                    Some(lb),
                );
            }
            let merit = pinf.max(dinf).max(rel_gap);
            if merit < 0.9 * best_merit {
                best_merit = merit;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALL_LIMIT {
                    let msg = format!("stalled (pinf {pinf:.1e}, dinf {dinf:.1e}, gap {rel_gap:.1e})");
                    // a stall at high accuracy is as good as convergence
                    let near = merit < settings.tol.sqrt() * 1e-2;
                    return outcome(&it, near, false, iter, msg, Some(lb));
                }
            }

            let s_chol: Option<Vec<Cholesky<f64, Dyn>>> = it.s_mat.iter().map(|s| s.clone().cholesky()).collect();
            let Some(s_chol) = s_chol else {
                return outcome(&it, false, false, iter, "slack left the cone".into(), None);
            };
            let s_inv: Vec<DMatrix<f64>> = s_chol.iter().map(|c| c.inverse()).collect();
            let mut m = DMatrix::zeros(form.nvar, form.nvar);
            for (k, b) in form.blocks.iter().enumerate() {
                b.add_scaled_gram(&it.z_mat[k], &s_inv[k], &mut m);
            }
            let w: Vec<f64> = it.z_vec.iter().zip(&it.s_vec).map(|(z, s)| z / s).collect();
            form.add_row_gram(&w, &mut m);
            let Some(schur) = SchurFactor::new(m) else {
                return outcome(
                    &it,
                    false,
                    false,
                    iter,
                    "Schur complement not positive definite".into(),
                    None,
                );
            };
            let lin = Linearization {
                form,
                s_inv,
                r_mat,
                r_vec,
                r_dual,
                schur,
            };

            let Some(pred) = lin.direction(&it, 0.0, None) else {
                return outcome(&it, false, false, iter, "predictor failed".into(), None);
            };
            let Some((ap, ad)) = max_steps(&it, &pred, &s_chol) else {
                return outcome(&it, false, false, iter, "dual left the cone".into(), None);
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mu_aff = complementarity(&it, Some((&pred, ap, ad))) / nu;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            let Some(dir) = lin.direction(&it, sigma * mu, Some(&pred)) else {
                return outcome(&it, false, false, iter, "corrector failed".into(), None);
            };
            let Some((ap, ad)) = max_steps(&it, &dir, &s_chol) else {
                return outcome(&it, false, false, iter, "dual left the cone".into(), None);
            };
            let ap = (STEP_FRACTION * ap).min(1.0);
            let ad = (STEP_FRACTION * ad).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                return outcome(&it, false, false, iter, "step length vanished".into(), None);
            }

            let Some(next) = advance(&it, &dir, ap, ad) else {
                return outcome(&it, false, false, iter, "step left the cone".into(), Some(lb));
            };
            it = next;
        }
        outcome(&it, false, false, settings.max_iter, "iteration limit".into(), None)
    }
}
