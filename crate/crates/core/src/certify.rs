//! Rate and sensitivity certification.
//!
//! The rate LMI is affine in the variables for fixed `r`, so the smallest
//! certified rate is found by bisection over `r`. The sensitivity bound is a
//! single minimization. Both return certificates that carry the Lyapunov
//! variables and can be replayed without a solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algomodel::{matrix_from_rows, rows_of, AlgorithmRealization, AlgorithmSpec, FunctionClass};
use crate::error::{Error, Result};
use crate::lifting::{build_lifted, LiftedSystem};
use crate::lmi::{
    assemble_rate_lmi, assemble_sensitivity_lmi, noise_gain, rate_lmi_values, sensitivity_lmi_values, LmiValues,
    LyapunovVariables,
};
use crate::sdp::{solve_with, BackendKind, SolveReport, SolveStatus, SolverSettings};
use crate::TOOL_VERSION;

/// Replay tolerance on the largest eigenvalue / entry of every constraint.
pub const DEFAULT_REPLAY_TOL: f64 = 1e-6;
pub const DEFAULT_RATE_ELL: usize = 1;
pub const DEFAULT_SENSITIVITY_ELL: usize = 6;
pub const DEFAULT_BISECT_TOL: f64 = 1e-4;

/// Dense, serializable `(P, p, Λ₁, Λ₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateVariables {
    #[serde(rename = "P")]
    pub p_mat: Vec<Vec<f64>>,
    #[serde(rename = "p")]
    pub p_vec: Vec<f64>,
    #[serde(rename = "Lambda1")]
    pub lambda1: Vec<Vec<f64>>,
    #[serde(rename = "Lambda2")]
    pub lambda2: Vec<Vec<f64>>,
}

impl CertificateVariables {
    pub fn from_lyapunov(v: &LyapunovVariables) -> Self {
        Self {
            p_mat: rows_of(&v.p_mat),
            p_vec: v.p_vec.iter().copied().collect(),
            lambda1: rows_of(&v.lambda1),
            lambda2: rows_of(&v.lambda2),
        }
    }

    pub fn to_lyapunov(&self) -> Result<LyapunovVariables> {
        let square = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
            let m = matrix_from_rows(rows, name)?;
            if m.nrows() != m.ncols() {
                return Err(Error::CertificateMismatch(format!("{name} is not square")));
            }
            Ok(m)
        };
        Ok(LyapunovVariables {
            p_mat: square(&self.p_mat, "P")?,
            p_vec: DVector::from_column_slice(&self.p_vec),
            lambda1: square(&self.lambda1, "Lambda1")?,
            lambda2: square(&self.lambda2, "Lambda2")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual {
    pub name: String,
    /// Largest eigenvalue (matrix constraints) or entry (vector constraints).
    pub max_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub constraints: Vec<ConstraintResidual>,
    pub max_matrix_eigenvalue: f64,
    pub max_vector_entry: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReplayReport {
    fn from_values(values: &LmiValues, tolerance: f64) -> Self {
        let mut constraints: Vec<ConstraintResidual> = values
            .max_eigenvalues()
            .into_iter()
            .map(|(name, max_value)| ConstraintResidual { name, max_value })
            .collect();
        constraints.extend(
            values
                .max_entries()
                .into_iter()
                .map(|(name, max_value)| ConstraintResidual { name, max_value }),
        );
        let max_matrix_eigenvalue = values.max_matrix_eigenvalue();
        let max_vector_entry = values.max_vector_entry();
        let pass = constraints.iter().all(|c| c.max_value <= tolerance);
        Self {
            constraints,
            max_matrix_eigenvalue,
            max_vector_entry,
            tolerance,
            pass,
        }
    }

    /// Largest residual over all constraints.
    pub fn worst(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.max_value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub r: f64,
    pub status: SolveStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub algorithm: AlgorithmSpec,
    pub fc: FunctionClass,
    pub ell: usize,
    pub r_upper: f64,
    /// Largest `r` found infeasible (or the lower end of the bracket).
    pub r_lower: f64,
    pub bisect_tol: f64,
    pub bisection_history: Vec<BisectionStep>,
    pub variables: CertificateVariables,
    pub residuals: ReplayReport,
    pub tolerance: f64,
    pub solver: String,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RateOutcome {
    Certified(Box<RateCertificate>),
    /// Not certifiable at `r_max`.
    NoCertificate {
        r_max: f64,
        status: SolveStatus,
        bisection_history: Vec<BisectionStep>,
    },
    /// The solver broke down; the best certificate so far, if any, is kept.
    Unknown {
        message: String,
        bisection_history: Vec<BisectionStep>,
        partial: Option<Box<RateCertificate>>,
    },
}

impl RateOutcome {
    pub fn certificate(&self) -> Option<&RateCertificate> {
        match self {
            RateOutcome::Certified(c) => Some(c),
            _ => None,
        }
    }

    pub fn r_upper(&self) -> Option<f64> {
        self.certificate().map(|c| c.r_upper)
    }

    pub fn history(&self) -> &[BisectionStep] {
        match self {
            RateOutcome::Certified(c) => &c.bisection_history,
            RateOutcome::NoCertificate { bisection_history, .. } | RateOutcome::Unknown { bisection_history, .. } => {
                bisection_history
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub ell: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub bisect_tol: f64,
    pub backend: BackendKind,
    pub solver: SolverSettings,
    pub replay_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            ell: DEFAULT_RATE_ELL,
            r_min: 0.0,
            r_max: 1.0,
            bisect_tol: DEFAULT_BISECT_TOL,
            backend: BackendKind::default(),
            solver: SolverSettings::default(),
            replay_tol: DEFAULT_REPLAY_TOL,
        }
    }
}

impl RateOptions {
    pub fn with_ell(ell: usize) -> Self {
        Self { ell, ..Self::default() }
    }
}

fn variables_of(report: &SolveReport) -> Result<LyapunovVariables> {
    LyapunovVariables::from_named(&report.variables)
}

fn solve_rate_at(
    ls: &LiftedSystem,
    r: f64,
    fc: &FunctionClass,
    opts: &RateOptions,
    settings: &SolverSettings,
) -> Result<SolveReport> {
    let prob = assemble_rate_lmi(ls, r, fc)?;
    solve_with(&prob, opts.backend, settings)
}

/// Bisection for the smallest `r ∈ (r_min, r_max]` at which the rate LMI with
/// memory `opts.ell` is feasible.
pub fn certify_rate(alg: &AlgorithmRealization, fc: &FunctionClass, opts: &RateOptions) -> Result<RateOutcome> {
    fc.validate()?;
    if !(opts.r_max > 0.0 && opts.r_min >= 0.0 && opts.r_min < opts.r_max) {
        return Err(Error::InvalidParameter(format!(
            "bisection bracket [{}, {}] is invalid",
            opts.r_min, opts.r_max
        )));
    }
    if !(opts.bisect_tol > 0.0) {
        return Err(Error::InvalidParameter("bisection tolerance must be positive".into()));
    }
    let ls = build_lifted(alg, opts.ell);
    let mut history = Vec::new();

    let top = solve_rate_at(&ls, opts.r_max, fc, opts, &opts.solver)?;
    history.push(BisectionStep {
        r: opts.r_max,
        status: top.status,
    });
    match top.status {
        SolveStatus::Feasible => {}
        SolveStatus::Failed => {
            return Ok(RateOutcome::Unknown {
                message: format!("solver failed at r = {}: {}", opts.r_max, top.message),
                bisection_history: history,
                partial: None,
            })
        }
        status => {
            return Ok(RateOutcome::NoCertificate {
                r_max: opts.r_max,
                status,
                bisection_history: history,
            })
        }
    }

    let (mut lo, mut hi) = (opts.r_min, opts.r_max);
    let mut best = top;
    while hi - lo > opts.bisect_tol {
        let mid = 0.5 * (lo + hi);
        let rep = solve_rate_at(&ls, mid, fc, opts, &opts.solver)?;
        history.push(BisectionStep {
            r: mid,
            status: rep.status,
        });
        match rep.status {
            SolveStatus::Feasible => {
                hi = mid;
                best = rep;
            }
            SolveStatus::Infeasible | SolveStatus::Inaccurate => lo = mid,
            SolveStatus::Failed => {
                let partial = rate_certificate(alg, fc, &ls, hi, lo, &best, &history, opts)
                    .ok()
                    .map(Box::new);
                return Ok(RateOutcome::Unknown {
                    message: format!("solver failed at r = {mid}: {}", rep.message),
                    bisection_history: history,
                    partial,
                });
            }
        }
    }

    let mut cert = rate_certificate(alg, fc, &ls, hi, lo, &best, &history, opts)?;
    if !cert.residuals.pass {
        // re-solve at r_upper with a larger strictness margin
        let tight = SolverSettings {
            strict_margin: opts.solver.strict_margin * 100.0,
            tol: opts.solver.tol * 0.1,
            ..opts.solver.clone()
        };
        let rep = solve_rate_at(&ls, hi, fc, opts, &tight)?;
        history.push(BisectionStep {
            r: hi,
            status: rep.status,
        });
        if rep.status == SolveStatus::Feasible {
            cert = rate_certificate(alg, fc, &ls, hi, lo, &rep, &history, opts)?;
        }
        if !cert.residuals.pass {
            return Ok(RateOutcome::Unknown {
                message: format!(
                    "certificate at r = {hi} does not replay (worst residual {:.3e})",
                    cert.residuals.worst()
                ),
                bisection_history: history,
                partial: Some(Box::new(cert)),
            });
        }
    }
    Ok(RateOutcome::Certified(Box::new(cert)))
}

#[allow(clippy::too_many_arguments)]
fn rate_certificate(
    alg: &AlgorithmRealization,
    fc: &FunctionClass,
    ls: &LiftedSystem,
    r_upper: f64,
    r_lower: f64,
    report: &SolveReport,
    history: &[BisectionStep],
    opts: &RateOptions,
) -> Result<RateCertificate> {
    let vars = variables_of(report)?;
    let residuals = ReplayReport::from_values(&rate_lmi_values(ls, r_upper, fc, &vars)?, opts.replay_tol);
    Ok(RateCertificate {
        algorithm: alg.spec(),
        fc: *fc,
        ell: ls.ell,
        r_upper,
        r_lower,
        bisect_tol: opts.bisect_tol,
        bisection_history: history.to_vec(),
        variables: CertificateVariables::from_lyapunov(&vars),
        residuals,
        tolerance: opts.replay_tol,
        solver: report.backend.clone(),
        tool_version: TOOL_VERSION.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCertificate {
    pub algorithm: AlgorithmSpec,
    pub fc: FunctionClass,
    pub ell: usize,
    /// `ℋᵀ P ℋ` for the stored `P`.
    pub gamma_sq_normalized: f64,
    pub sigma: f64,
    pub d: usize,
    pub gamma: f64,
    /// Whether the minimization converged; otherwise `gamma` is a valid but
    /// possibly loose bound.
    pub optimal: bool,
    pub variables: CertificateVariables,
    pub residuals: ReplayReport,
    pub tolerance: f64,
    pub solver: String,
    pub tool_version: String,
}

impl SensitivityCertificate {
    /// Same certificate at another noise level and dimension.
    pub fn rescaled(&self, sigma: f64, d: usize) -> Self {
        Self {
            sigma,
            d,
            gamma: gamma_from(self.gamma_sq_normalized, sigma, d),
            ..self.clone()
        }
    }
}

/// `σ √(d · ℋᵀPℋ)`.
pub fn gamma_from(gamma_sq_normalized: f64, sigma: f64, d: usize) -> f64 {
    sigma * (d as f64 * gamma_sq_normalized.max(0.0)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SensitivityOutcome {
    Certified(Box<SensitivityCertificate>),
    NoCertificate { status: SolveStatus, message: String },
    Unknown { message: String },
}

impl SensitivityOutcome {
    pub fn certificate(&self) -> Option<&SensitivityCertificate> {
        match self {
            SensitivityOutcome::Certified(c) => Some(c),
            _ => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        self.certificate().map(|c| c.gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityOptions {
    pub ell: usize,
    pub backend: BackendKind,
    pub solver: SolverSettings,
    pub replay_tol: f64,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        Self {
            ell: DEFAULT_SENSITIVITY_ELL,
            backend: BackendKind::default(),
            solver: SolverSettings::default(),
            replay_tol: DEFAULT_REPLAY_TOL,
        }
    }
}

impl SensitivityOptions {
    pub fn with_ell(ell: usize) -> Self {
        Self { ell, ..Self::default() }
    }
}

/// Minimizes `ℋᵀPℋ` and reports `γ = σ √(d ℋᵀPℋ)`.
pub fn certify_sensitivity(
    alg: &AlgorithmRealization,
    fc: &FunctionClass,
    sigma: f64,
    d: usize,
    opts: &SensitivityOptions,
) -> Result<SensitivityOutcome> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level σ = {sigma} must be nonnegative"
        )));
    }
    if d < 1 {
        return Err(Error::InvalidParameter("dimension d must be at least 1".into()));
    }
    let ls = build_lifted(alg, opts.ell);
    let prob = assemble_sensitivity_lmi(&ls, fc)?;
    let rep = solve_with(&prob, opts.backend, &opts.solver)?;
    match rep.status {
        SolveStatus::Feasible => {}
        SolveStatus::Failed => return Ok(SensitivityOutcome::Unknown { message: rep.message }),
        status => {
            return Ok(SensitivityOutcome::NoCertificate {
                status,
                message: rep.message,
            })
        }
    }
    let vars = variables_of(&rep)?;
    let residuals = ReplayReport::from_values(&sensitivity_lmi_values(&ls, fc, &vars)?, opts.replay_tol);
    let g2 = noise_gain(&ls, &vars.p_mat);
    let cert = SensitivityCertificate {
        algorithm: alg.spec(),
        fc: *fc,
        ell: opts.ell,
        gamma_sq_normalized: g2,
        sigma,
        d,
        gamma: gamma_from(g2, sigma, d),
        optimal: rep.optimal,
        variables: CertificateVariables::from_lyapunov(&vars),
        residuals,
        tolerance: opts.replay_tol,
        solver: rep.backend.clone(),
        tool_version: TOOL_VERSION.to_string(),
    };
    if !cert.residuals.pass {
        return Ok(SensitivityOutcome::Unknown {
            message: format!(
                "certificate does not replay (worst residual {:.3e})",
                cert.residuals.worst()
            ),
        });
    }
    Ok(SensitivityOutcome::Certified(Box::new(cert)))
}

fn check_algorithm(spec: &AlgorithmSpec, alg: &AlgorithmRealization) -> Result<()> {
    let stored = spec.realize()?;
    let same = stored.a().shape() == alg.a().shape()
        && (stored.a() - alg.a()).amax() <= 1e-12
        && (stored.b() - alg.b()).amax() <= 1e-12
        && (stored.c() - alg.c()).amax() <= 1e-12;
    if same {
        Ok(())
    } else {
        Err(Error::CertificateMismatch(
            "certificate was produced for a different algorithm".into(),
        ))
    }
}

/// Re-assembles the rate constraints at `r_upper` and substitutes the stored
/// variables.
pub fn replay_rate(cert: &RateCertificate, alg: &AlgorithmRealization, fc: &FunctionClass) -> Result<ReplayReport> {
    check_algorithm(&cert.algorithm, alg)?;
    let ls = build_lifted(alg, cert.ell);
    let vars = cert.variables.to_lyapunov()?;
    Ok(ReplayReport::from_values(
        &rate_lmi_values(&ls, cert.r_upper, fc, &vars)?,
        cert.tolerance,
    ))
}

/// Re-assembles the sensitivity constraints, substitutes the stored variables,
/// and also checks that the stored `γ` matches the stored `P`.
pub fn replay_sensitivity(
    cert: &SensitivityCertificate,
    alg: &AlgorithmRealization,
    fc: &FunctionClass,
) -> Result<ReplayReport> {
    check_algorithm(&cert.algorithm, alg)?;
    let ls = build_lifted(alg, cert.ell);
    let vars = cert.variables.to_lyapunov()?;
    let mut rep = ReplayReport::from_values(&sensitivity_lmi_values(&ls, fc, &vars)?, cert.tolerance);
    let g2 = noise_gain(&ls, &vars.p_mat);
    let mismatch = (g2 - cert.gamma_sq_normalized)
        .abs()
        .max((gamma_from(g2, cert.sigma, cert.d) - cert.gamma).abs());
    rep.constraints.push(ConstraintResidual {
        name: "gamma_consistency".into(),
        max_value: mismatch - cert.tolerance * (1.0 + g2.abs()),
    });
    rep.pass = rep.constraints.iter().all(|c| c.max_value <= rep.tolerance);
    Ok(rep)
}

/// Either kind of certificate, as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Rate(RateCertificate),
    Sensitivity(SensitivityCertificate),
}

impl Certificate {
    pub fn algorithm(&self) -> &AlgorithmSpec {
        match self {
            Certificate::Rate(c) => &c.algorithm,
            Certificate::Sensitivity(c) => &c.algorithm,
        }
    }

    pub fn fc(&self) -> &FunctionClass {
        match self {
            Certificate::Rate(c) => &c.fc,
            Certificate::Sensitivity(c) => &c.fc,
        }
    }
}

/// Replays against the algorithm and class stored in the certificate.
pub fn replay_certificate(cert: &Certificate, alg: &AlgorithmRealization, fc: &FunctionClass) -> Result<ReplayReport> {
    match cert {
        Certificate::Rate(c) => replay_rate(c, alg, fc),
        Certificate::Sensitivity(c) => replay_sensitivity(c, alg, fc),
    }
}
