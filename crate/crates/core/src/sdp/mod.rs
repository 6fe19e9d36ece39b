//! In-process semidefinite solvers.
//!
//! [`solve`] runs two phases on an [`LmiProblem`]. Phase I minimizes the
//! largest constraint violation `t` and stops as soon as an iterate is
//! strictly feasible with a margin proportional to the norm of the problem
//! data (and large enough that rounding in the evaluation cannot fake it). If
//! the problem has an objective, Phase II then minimizes it over the strictly
//! tightened constraints, starting from the Phase I point.
//!
//! The phases are driven through a [`Backend`]; two are provided:
//! [`Ipm`], a primal-dual interior-point method (HKM direction with a
//! Mehrotra predictor-corrector), and [`Barrier`], a log-barrier Newton
//! method. They share nothing beyond [`ConicForm`].

mod barrier;
pub mod conic;
mod ipm;
mod svec;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use barrier::Barrier;
pub use conic::{ConicBlock, ConicForm, LinearRow};
pub use ipm::Ipm;
pub use svec::{smat, svec};

use crate::error::{Error, Result};
use crate::lmi::{LmiProblem, NamedValues};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Relative accuracy for gaps and residuals inside a phase.
    pub tol: f64,
    /// Required strict margin, relative to the norm of the constant terms.
    pub strict_margin: f64,
    /// Every variable is confined to `|x_i| ≤ var_bound`.
    pub var_bound: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            strict_margin: 1e-8,
            var_bound: 1e6,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// A strictly feasible point was found (and, with an objective, improved).
    Feasible,
    /// Phase I converged to a nonnegative violation.
    Infeasible,
    /// The solver stopped without a verdict either way.
    Inaccurate,
    Failed,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Failed => "failed",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub backend: String,
    pub x: Vec<f64>,
    /// `x` decoded by variable name.
    pub variables: NamedValues,
    pub objective: Option<f64>,
    /// Phase II converged (always true without an objective).
    pub optimal: bool,
    /// Largest eigenvalue over the matrix constraints at `x`.
    pub max_matrix_eigenvalue: f64,
    /// Largest entry over the vector constraints at `x`.
    pub max_vector_entry: f64,
    /// Most negative value among sign-constrained variables (`0` if none).
    pub min_sign_variable: f64,
    /// The margin a feasible verdict had to beat: `strict_margin` times the
    /// data norm, or a roundoff guard if larger.
    pub required_margin: f64,
    pub phase_one_value: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub message: String,
}

impl SolveReport {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }
}

/// What the driver learns from one backend run.
#[derive(Clone, Debug)]
pub struct PhaseOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Certified lower bound on the optimal value, if the backend has one.
    pub lower_bound: Option<f64>,
    pub converged: bool,
    pub stopped_early: bool,
    /// Numerical breakdown rather than a slow or stalled run.
    pub breakdown: bool,
    pub iterations: usize,
    pub message: String,
}

/// Called after every iterate with `(x, lower_bound)`; returning `true`
/// stops the phase.
pub type Monitor<'a> = dyn FnMut(&[f64], Option<f64>) -> bool + 'a;

/// A conic minimizer. `x0` must be strictly feasible for `form`.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn minimize(
        &self,
        form: &ConicForm,
        x0: &[f64],
        settings: &SolverSettings,
        monitor: &mut Monitor<'_>,
    ) -> PhaseOutcome;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Ipm,
    Barrier,
}

impl BackendKind {
    pub fn backend(self) -> Box<dyn Backend> {
        match self {
            BackendKind::Ipm => Box::new(Ipm),
            BackendKind::Barrier => Box::new(Barrier),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Ipm => "ipm",
            BackendKind::Barrier => "barrier",
        })
    }
}

impl FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ipm" => Ok(BackendKind::Ipm),
            "barrier" => Ok(BackendKind::Barrier),
            other => Err(Error::Solver(format!(
                "unknown solver backend `{other}` (expected ipm or barrier)"
            ))),
        }
    }
}

/// Shorthand for [`solve`] with a [`BackendKind`].
pub fn solve_with(problem: &LmiProblem, kind: BackendKind, settings: &SolverSettings) -> Result<SolveReport> {
    solve(problem, kind.backend().as_ref(), settings)
}

pub fn solve(problem: &LmiProblem, backend: &dyn Backend, settings: &SolverSettings) -> Result<SolveReport> {
    problem.validate()?;
    let start = Instant::now();
    let n = problem.num_variables();
    let nonneg = problem.layout.nonnegative_indices();

    let data_margin = settings.strict_margin * conic::data_scale(problem);
    let margin_at = |x: &[f64]| data_margin.max(conic::ROUNDOFF_GUARD * conic::evaluation_scale(problem, x));

    let mut x0 = vec![0.0; n];
    for &i in &nonneg {
        x0[i] = 1.0;
    }
    let level0 = conic::feasibility_level(problem, &x0);
    if level0 == f64::NEG_INFINITY {
        return Ok(finish(
            problem,
            backend,
            x0,
            SolveStatus::Feasible,
            true,
            0,
            start,
            0.0,
            "no constraints".into(),
        ));
    }

    // Phase I
    let form1 = conic::phase_one_form(problem, settings.var_bound);
    let mut z0 = x0.clone();
    z0.push(level0.max(-0.5) + 1.0);
    let mut best: Option<Vec<f64>> = None;
    let mut proven_infeasible = false;
    let mut monitor = |z: &[f64], lb: Option<f64>| {
        let x = &z[..n];
        if conic::feasibility_level(problem, x) < -margin_at(x) {
            best = Some(x.to_vec());
            return true;
        }
        if let Some(lb) = lb {
            // the relaxed optimum is provably positive
            if lb > settings.strict_margin {
                proven_infeasible = true;
                return true;
            }
        }
        false
    };
    let out1 = backend.minimize(&form1, &z0, settings, &mut monitor);
    let mut iterations = out1.iterations;
    let x1 = best.unwrap_or_else(|| out1.x[..n].to_vec());
    let level1 = conic::feasibility_level(problem, &x1);
    let margin1 = margin_at(&x1);

    if level1 >= -margin1 {
        let status = if out1.breakdown || x1.iter().any(|v| !v.is_finite()) {
            SolveStatus::Failed
        } else if proven_infeasible || (out1.converged && out1.objective >= -margin1) {
            SolveStatus::Infeasible
        } else {
            SolveStatus::Inaccurate
        };
        let msg = format!(
            "phase I: {} (violation {level1:.3e}, margin {margin1:.3e})",
            out1.message
        );
        let mut rep = finish(problem, backend, x1, status, false, iterations, start, margin1, msg);
        rep.phase_one_value = level1;
        return Ok(rep);
    }

    if problem.objective.is_none() {
        let mut rep = finish(
            problem,
            backend,
            x1,
            SolveStatus::Feasible,
            true,
            iterations,
            start,
            margin1,
            "phase I".into(),
        );
        rep.phase_one_value = level1;
        return Ok(rep);
    }

    // Phase II on constraints tightened by half the achieved margin
    let eps = 0.5 * margin1;
    let form2 = conic::phase_two_form(problem, eps, settings.var_bound);
    if !form2.strictly_feasible(&x1) {
        let mut rep = finish(
            problem,
            backend,
            x1,
            SolveStatus::Feasible,
            false,
            iterations,
            start,
            margin1,
            "phase II skipped: start not interior".into(),
        );
        rep.phase_one_value = level1;
        return Ok(rep);
    }
    let out2 = backend.minimize(&form2, &x1, settings, &mut |_, _| false);
    iterations += out2.iterations;
    let x2 = out2.x.clone();
    let level2 = conic::feasibility_level(problem, &x2);
    let (x, optimal, msg) = if level2 < 0.0 && x2.iter().all(|v| v.is_finite()) {
        (x2, out2.converged, format!("phase II: {}", out2.message))
    } else {
        (
            x1,
            false,
            format!("phase II rejected (violation {level2:.3e}); phase I point kept"),
        )
    };
    let mut rep = finish(
        problem,
        backend,
        x,
        SolveStatus::Feasible,
        optimal,
        iterations,
        start,
        margin1,
        msg,
    );
    rep.phase_one_value = level1;
    Ok(rep)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &LmiProblem,
    backend: &dyn Backend,
    x: Vec<f64>,
    status: SolveStatus,
    optimal: bool,
    iterations: usize,
    start: Instant,
    required_margin: f64,
    message: String,
) -> SolveReport {
    let values = problem.evaluate(&x);
    let min_sign = problem
        .layout
        .nonnegative_indices()
        .into_iter()
        .map(|i| x[i])
        .fold(0.0, f64::min);
    SolveReport {
        status,
        variables: problem.layout.decode(&x).unwrap_or_default(),
        backend: backend.name().to_string(),
        objective: problem.objective_value(&x),
        optimal,
        max_matrix_eigenvalue: values.max_matrix_eigenvalue(),
        max_vector_entry: values.max_vector_entry(),
        min_sign_variable: min_sign,
        required_margin,
        phase_one_value: f64::NAN,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        message,
        x,
    }
}
