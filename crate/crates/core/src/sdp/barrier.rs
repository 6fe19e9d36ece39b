//! Log-barrier path following.
//!
//! Minimizes `τ cᵀx − Σ log det(−F_k(x)) − Σ log(−g_r(x))` by damped Newton
//! steps for an increasing sequence of `τ`. At an exact center the duality
//! gap is `ν/τ`, which gives the lower bound handed to the monitor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::conic::{max_step_psd, max_step_vec, ConicForm, SchurFactor};
use super::{Backend, Monitor, PhaseOutcome, SolverSettings};

#[derive(Clone, Copy, Debug, Default)]
pub struct Barrier;

const TAU_GROWTH: f64 = 10.0;
const MAX_CENTERING: usize = 60;
const CENTER_TOL: f64 = 1e-10;

/// Barrier value, or `None` outside the interior.
fn barrier_value(form: &ConicForm, x: &[f64], tau: f64) -> Option<f64> {
    let (s_mat, s_vec) = form.slacks(x);
    let mut phi = tau * form.objective_value(x);
    for s in s_mat {
        let c = s.cholesky()?;
        phi -= 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    }
    for s in s_vec {
        if s <= 0.0 {
            return None;
        }
        phi -= s.ln();
    }
    phi.is_finite().then_some(phi)
}

struct Derivatives {
    /// Gradient of the barrier term alone (without `τc`).
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    chols: Vec<Cholesky<f64, Dyn>>,
    s_vec: Vec<f64>,
}

/// `∇φ = Σ tr(S⁻¹ F_i) + Σ a_r / s_r`, `∇²φ = Σ ⟨F_i, S⁻¹ F_j S⁻¹⟩ + Σ a_r a_rᵀ / s_r²`.
fn derivatives(form: &ConicForm, x: &[f64]) -> Option<Derivatives> {
    let (s_mat, s_vec) = form.slacks(x);
    let chols: Vec<_> = s_mat.into_iter().map(|s| s.cholesky()).collect::<Option<_>>()?;
    let mut grad = DVector::zeros(form.nvar);
    let mut hess = DMatrix::zeros(form.nvar, form.nvar);
    for (b, c) in form.blocks.iter().zip(&chols) {
        let s_inv = c.inverse();
        b.adjoint_into(&s_inv, 1.0, &mut grad);
        b.add_scaled_gram(&s_inv, &s_inv, &mut hess);
    }
    for (row, s) in form.rows.iter().zip(&s_vec) {
        for &(i, a) in &row.coefs {
            grad[i] += a / s;
        }
    }
    let w: Vec<f64> = s_vec.iter().map(|s| 1.0 / (s * s)).collect();
    form.add_row_gram(&w, &mut hess);
    Some(Derivatives {
        grad,
        hess,
        chols,
        s_vec,
    })
}

/// Weight that makes `x` closest to centered: `argmin_τ ‖τc + ∇φ‖` in the
/// norm of `(∇²φ)⁻¹`, kept at least 1.
fn initial_tau(form: &ConicForm, x: &[f64]) -> f64 {
    let Some(der) = derivatives(form, x) else {
        return 1.0;
    };
    let Some(h) = SchurFactor::new(der.hess) else {
        return 1.0;
    };
    let hc = h.solve(&form.objective);
    let denom = form.objective.dot(&hc);
    let tau = -der.grad.dot(&hc) / denom;
    if tau.is_finite() && denom > 0.0 {
        tau.max(1.0)
    } else {
        1.0
    }
}

impl Backend for Barrier {
    fn name(&self) -> &'static str {
        "barrier"
    }

    fn minimize(
        &self,
        form: &ConicForm,
        x0: &[f64],
        settings: &SolverSettings,
        monitor: &mut Monitor<'_>,
    ) -> PhaseOutcome {
        let nu = form.degree().max(1.0);
        let mut x = x0.to_vec();
        let done = |x: &[f64],
                    converged: bool,
                    stopped_early: bool,
                    iterations: usize,
                    message: &str,
                    lower_bound: Option<f64>| PhaseOutcome {
            breakdown: x.iter().any(|v| !v.is_finite()),
            objective: form.objective_value(x),
            x: x.to_vec(),
            lower_bound,
            converged,
            stopped_early,
            iterations,
            message: message.to_string(),
        };
        if barrier_value(form, &x, 1.0).is_none() {
            return done(&x, false, false, 0, "start is not strictly feasible", None);
        }
        let mut tau = initial_tau(form, &x);
        let mut newton_steps = 0;
        let budget = settings.max_iter * 10;

        loop {
            let mut centered = false;
            for _ in 0..MAX_CENTERING {
                let Some(der) = derivatives(form, &x) else {
                    return done(&x, false, false, newton_steps, "iterate left the interior", None);
                };
                let grad = &form.objective * tau + &der.grad;
                let Some(h) = SchurFactor::new(der.hess) else {
                    return done(&x, false, false, newton_steps, "Hessian not positive definite", None);
                };
                let step: DVector<f64> = -h.solve(&grad);
                let decrement = -grad.dot(&step);
                newton_steps += 1;
                if decrement / 2.0 < CENTER_TOL {
                    centered = true;
                    break;
                }

                let dx: Vec<f64> = step.iter().copied().collect();
                let mut amax = 1.0f64;
                for (b, c) in form.blocks.iter().zip(&der.chols) {
                    amax = amax.min(max_step_psd(c, &(-b.linear_part(&dx))));
                }
                let ds: Vec<f64> = form.rows.iter().map(|r| -r.linear_part(&dx)).collect();
                amax = amax.min(max_step_vec(&der.s_vec, &ds));
                let mut alpha = if amax < 1.0 { 0.99 * amax } else { 1.0 };

                let phi0 = barrier_value(form, &x, tau).unwrap_or(f64::INFINITY);
                let mut accepted = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
                    if let Some(phi) = barrier_value(form, &trial, tau) {
                        if phi <= phi0 - 0.25 * alpha * decrement {
                            x = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    break;
                }
                if monitor(&x, None) {
                    return done(&x, false, true, newton_steps, "stopped by monitor", None);
                }
                if newton_steps >= budget {
                    return done(&x, false, false, newton_steps, "iteration limit", None);
                }
            }

            let obj = form.objective_value(&x);
            // the gap bound ν/τ only holds at a center
            let lb = centered.then_some(obj - nu / tau);
            if monitor(&x, lb) {
                return done(&x, false, true, newton_steps, "stopped by monitor", lb);
            }
            if nu / tau < settings.tol * (1.0 + obj.abs()) {
                return done(&x, centered, false, newton_steps, "converged", lb);
            }
            if newton_steps >= budget {
                return done(&x, false, false, newton_steps, "iteration limit", lb);
            }
            tau *= TAU_GROWTH;
        }
    }
}
