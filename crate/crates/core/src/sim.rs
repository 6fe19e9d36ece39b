//! Direct simulation of `ξ_{k+1} = A ξ_k + B (u_k + w_k)`, `y_k = C ξ_k`,
//! `u_k = ∇f(y_k)` on concrete functions, with optional additive gradient
//! noise `w_k`.
//!
//! States are `n × d` (one column per coordinate of `y`). The first state row
//! is taken as the reported iterate `x_k`; this holds for every preset.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algomodel::{make_preset, tune_quadratic_optimal, AlgorithmRealization, FunctionClass, Params, Preset};
use crate::error::{Error, Result};

/// Error magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Errors below this are excluded from rate estimation.
pub const RATE_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `½ (y − y⋆)ᵀ Q (y − y⋆)`.
    Quadratic { hessian: Vec<Vec<f64>> },
    /// `Σ_i m z_i²/2 + (L − m) log cosh(z_i)` with `z = y − y⋆`; curvature
    /// sweeps `(m, L]` and the function is not quadratic.
    LogCosh,
}

/// A function in `F_{m,L}` with known minimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub objective: Objective,
    pub y_star: Vec<f64>,
    pub fc: FunctionClass,
    #[serde(skip)]
    hessian: Option<DMatrix<f64>>,
}

impl ProblemInstance {
    /// Quadratic with the given symmetric Hessian, whose eigenvalues must lie
    /// in `[m, L]`.
    pub fn quadratic(hessian: DMatrix<f64>, y_star: Vec<f64>, fc: FunctionClass) -> Result<Self> {
        fc.validate()?;
        let d = y_star.len();
        if hessian.shape() != (d, d) || d == 0 {
            return Err(Error::Dimension(format!(
                "Hessian is {}x{} but the minimizer has {d} entries",
                hessian.nrows(),
                hessian.ncols()
            )));
        }
        if (&hessian - hessian.transpose()).amax() > 1e-12 * (1.0 + hessian.amax()) {
            return Err(Error::NotSymmetric((&hessian - hessian.transpose()).amax()));
        }
        let ev = SymmetricEigen::new(hessian.clone()).eigenvalues;
        let slack = 1e-12 * fc.l;
        if let Some(q) = ev.iter().find(|&&q| q < fc.m - slack || q > fc.l + slack) {
            return Err(Error::InvalidParameter(format!(
                "Hessian eigenvalue {q} lies outside [{}, {}]",
                fc.m, fc.l
            )));
        }
        Ok(Self {
            objective: Objective::Quadratic {
                hessian: crate::algomodel::rows_of(&hessian),
            },
            y_star,
            fc,
            hessian: Some(hessian),
        })
    }

    /// Diagonal quadratic with curvatures `q`.
    pub fn diagonal(q: &[f64], y_star: Vec<f64>, fc: FunctionClass) -> Result<Self> {
        Self::quadratic(
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(q)),
            y_star,
            fc,
        )
    }

    pub fn log_cosh(y_star: Vec<f64>, fc: FunctionClass) -> Result<Self> {
        fc.validate()?;
        if y_star.is_empty() {
            return Err(Error::Dimension("minimizer must have at least one entry".into()));
        }
        Ok(Self {
            objective: Objective::LogCosh,
            y_star,
            fc,
            hessian: None,
        })
    }

    /// Restore cached data after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        match &self.objective {
            Objective::Quadratic { hessian } => {
                let h = crate::algomodel::matrix_from_rows(hessian, "hessian")?;
                Self::quadratic(h, self.y_star, self.fc)
            }
            Objective::LogCosh => Self::log_cosh(self.y_star, self.fc),
        }
    }

    pub fn dim(&self) -> usize {
        self.y_star.len()
    }

    fn offset(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.y_star).map(|(a, b)| a - b).collect()
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let z = self.offset(y);
        match &self.objective {
            Objective::Quadratic { .. } => {
                let h = self
                    .hessian
                    .as_ref()
                    .expect("quadratic instance built through a constructor");
                (0..z.len())
                    .map(|i| (0..z.len()).map(|j| h[(i, j)] * z[j]).sum())
                    .collect()
            }
            Objective::LogCosh => {
                let (m, c) = (self.fc.m, self.fc.l - self.fc.m);
                z.iter().map(|&t| m * t + c * t.tanh()).collect()
            }
        }
    }

    /// `f(y) − f⋆`.
    pub fn value_gap(&self, y: &[f64]) -> f64 {
        let z = self.offset(y);
        match &self.objective {
            Objective::Quadratic { .. } => {
                let g = self.gradient(y);
                0.5 * z.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            }
            Objective::LogCosh => {
                let (m, c) = (self.fc.m, self.fc.l - self.fc.m);
                z.iter().map(|&t| 0.5 * m * t * t + c * log_cosh(t)).sum()
            }
        }
    }
}

/// `log cosh t` without overflow.
fn log_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    Gaussian,
    Uniform,
    Rademacher,
}

impl std::str::FromStr for NoiseDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            "rademacher" => Ok(Self::Rademacher),
            other => Err(Error::InvalidParameter(format!("unknown noise distribution `{other}`"))),
        }
    }
}

/// Independent zero-mean noise with per-coordinate variance `σ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, distribution: NoiseDistribution, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be nonnegative")));
        }
        Ok(Self {
            sigma,
            distribution,
            seed,
        })
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        Self::new(sigma, NoiseDistribution::Gaussian, seed)
    }

    /// Generator for replication `stream`; streams are independent.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.distribution {
            NoiseDistribution::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            NoiseDistribution::Uniform => self.sigma * 3f64.sqrt() * rng.random_range(-1.0..=1.0),
            NoiseDistribution::Rademacher => {
                if rng.random::<bool>() {
                    self.sigma
                } else {
                    -self.sigma
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    /// States `ξ_k`, each `n × d` in row-major order.
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub gradients: Vec<Vec<f64>>,
    /// `‖ξ_k − ξ⋆‖` (Frobenius).
    pub errors: Vec<f64>,
    /// `‖x_k − x⋆‖` for the first state row.
    pub iterate_errors: Vec<f64>,
    /// `f(y_k) − f⋆`.
    pub values: Vec<f64>,
    /// `(1/K) Σ ‖y_k − y⋆‖²` over the recorded outputs.
    pub mean_sq_output_error: f64,
    pub diverged: bool,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// First `k` with `‖x_k − x⋆‖ < tol`.
    pub fn steps_to_tolerance(&self, tol: f64) -> Option<usize> {
        self.iterate_errors.iter().position(|&e| e < tol)
    }

    /// Least-squares slope of `log ‖ξ_k − ξ⋆‖` over the second half of the
    /// iterations before the error drops below [`RATE_FLOOR`], as a rate.
    pub fn empirical_rate(&self) -> Option<f64> {
        let end = self
            .errors
            .iter()
            .position(|&e| e < RATE_FLOOR)
            .unwrap_or(self.errors.len());
        let start = end / 2;
        let pts: Vec<(f64, f64)> = (start..end)
            .filter(|&k| self.errors[k] > 0.0)
            .map(|k| (k as f64, self.errors[k].ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some((sxy / sxx).exp())
    }

    /// Smallest `C` with `‖ξ_k − ξ⋆‖ ≤ C rᵏ ‖ξ₀ − ξ⋆‖` along the trace, up to
    /// the first error below [`RATE_FLOOR`].
    pub fn rate_constant(&self, r: f64) -> f64 {
        let e0 = self.errors.first().copied().unwrap_or(0.0);
        if e0 == 0.0 {
            return 0.0;
        }
        self.errors
            .iter()
            .take_while(|&&e| e >= RATE_FLOOR)
            .enumerate()
            .map(|(k, &e)| e / (e0 * r.powi(k as i32)))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `k, err, x_err, fval, y0, y1, ...`.
    pub fn to_csv(&self) -> String {
        let d = self.outputs.first().map_or(0, Vec::len);
        let mut out = String::from("k,err,x_err,fval");
        for j in 0..d {
            let _ = write!(out, ",y{j}");
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(
                out,
                "{k},{:e},{:e},{:e}",
                self.errors[k], self.iterate_errors[k], self.values[k]
            );
            for v in &self.outputs[k] {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Closed-loop state for one trajectory.
struct Loop<'a> {
    alg: &'a AlgorithmRealization,
    inst: &'a ProblemInstance,
    xi: DMatrix<f64>,
    xi_star: DMatrix<f64>,
}

impl<'a> Loop<'a> {
    fn new(alg: &'a AlgorithmRealization, inst: &'a ProblemInstance, x0: &[f64]) -> Result<Self> {
        let d = inst.dim();
        if x0.len() != d {
            return Err(Error::Dimension(format!("x0 has {} entries, expected {d}", x0.len())));
        }
        let v = alg.fixed_direction();
        let xi = v * DMatrix::from_row_slice(1, d, x0);
        let xi_star = alg.fixed_point(&inst.y_star, 0.0).xi_star;
        Ok(Self { alg, inst, xi, xi_star })
    }

    fn output(&self) -> Vec<f64> {
        (self.alg.c() * &self.xi).iter().copied().collect()
    }

    /// Advance one step with gradient noise `w`; returns `(y_k, u_k)`.
    fn step(&mut self, w: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let y = self.output();
        let u = self.inst.gradient(&y);
        let mut drive = DMatrix::from_row_slice(1, u.len(), &u);
        if let Some(w) = w {
            for (a, b) in drive.iter_mut().zip(w) {
                *a += b;
            }
        }
        self.xi = self.alg.a() * &self.xi + self.alg.b() * drive;
        (y, u)
    }

    fn error(&self) -> f64 {
        (&self.xi - &self.xi_star).norm()
    }

    fn iterate_error(&self) -> f64 {
        (self.xi.row(0) - self.xi_star.row(0)).norm()
    }

    fn state_row_major(&self) -> Vec<f64> {
        self.xi.transpose().iter().copied().collect()
    }
}

fn output_error_sq(y: &[f64], y_star: &[f64]) -> f64 {
    y.iter().zip(y_star).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Simulate `steps` iterations from `ξ₀ = v x0`. Records `k = 0..=steps`;
/// stops early and sets `diverged` if the error exceeds [`DIVERGENCE_LIMIT`].
pub fn run(
    alg: &AlgorithmRealization,
    inst: &ProblemInstance,
    x0: &[f64],
    steps: usize,
    noise: Option<&NoiseModel>,
) -> Result<SimulationTrace> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let mut lp = Loop::new(alg, inst, x0)?;
    let mut rng = noise.map(|n| n.rng(0));
    let d = inst.dim();
    let mut tr = SimulationTrace {
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
        gradients: Vec::with_capacity(steps + 1),
        errors: Vec::with_capacity(steps + 1),
        iterate_errors: Vec::with_capacity(steps + 1),
        values: Vec::with_capacity(steps + 1),
        mean_sq_output_error: 0.0,
        diverged: false,
    };
    let mut sq_sum = 0.0;
    for k in 0..=steps {
        let err = lp.error();
        tr.states.push(lp.state_row_major());
        tr.errors.push(err);
        tr.iterate_errors.push(lp.iterate_error());
        let y = lp.output();
        tr.values.push(inst.value_gap(&y));
        sq_sum += output_error_sq(&y, &inst.y_star);
        tr.gradients.push(inst.gradient(&y));
        tr.outputs.push(y);
        if !err.is_finite() || err > DIVERGENCE_LIMIT {
            tr.diverged = true;
            break;
        }
        if k < steps {
            let w: Option<Vec<f64>> = match (noise, rng.as_mut()) {
                (Some(n), Some(r)) => Some((0..d).map(|_| n.sample(r)).collect()),
                _ => None,
            };
            lp.step(w.as_deref());
        }
    }
    tr.mean_sq_output_error = sq_sum / tr.outputs.len() as f64;
    Ok(tr)
}

/// Replicated estimate of the root-mean-square output error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub horizon: usize,
    pub samples: Vec<f64>,
}

/// Mean over replications of `√((1/T) Σ_{k<T} ‖y_k − y⋆‖²)`, each
/// replication started at the fixed point and driven by its own noise stream.
pub fn empirical_sensitivity(
    alg: &AlgorithmRealization,
    inst: &ProblemInstance,
    noise: &NoiseModel,
    horizon: usize,
    replications: usize,
) -> Result<SensitivityEstimate> {
    if horizon == 0 || replications < 2 {
        return Err(Error::InvalidParameter(
            "need a positive horizon and at least two replications".into(),
        ));
    }
    let d = inst.dim();
    let samples: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut lp = Loop::new(alg, inst, &inst.y_star)?;
            let mut rng = noise.rng(rep);
            let mut w = vec![0.0; d];
            let mut sq_sum = 0.0;
            for k in 0..horizon {
                let y_err = output_error_sq(&lp.output(), &inst.y_star);
                sq_sum += y_err;
                if !y_err.is_finite() || y_err > DIVERGENCE_LIMIT * DIVERGENCE_LIMIT {
                    return Err(Error::Diverged { step: k });
                }
                w.iter_mut().for_each(|x| *x = noise.sample(&mut rng));
                lp.step(Some(&w));
            }
            Ok((sq_sum / horizon as f64).sqrt())
        })
        .collect::<Result<_>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SensitivityEstimate {
        mean,
        std_error: (var / n).sqrt(),
        horizon,
        samples,
    })
}

pub const FIG1_TOL: f64 = 1e-6;
pub const FIG1_X0: [f64; 2] = [-5.0, 1.5];
const FIG1_MAX_STEPS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Row {
    pub algorithm: Preset,
    pub params: Params,
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Result {
    pub rows: Vec<Fig1Row>,
    pub traces: Vec<SimulationTrace>,
}

impl Fig1Result {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("algorithm,alpha,beta,steps\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.algorithm,
                r.params.get("alpha").copied().unwrap_or(f64::NAN),
                r.params.get("beta").copied().unwrap_or(0.0),
                r.steps.map_or("NA".to_string(), |s| s.to_string())
            );
        }
        out
    }

    /// All trajectories, truncated at each method's step count.
    pub fn trajectories_csv(&self) -> String {
        let mut out = String::from("algorithm,k,err,x_err,fval,y0,y1\n");
        for (r, t) in self.rows.iter().zip(&self.traces) {
            let end = r.steps.map_or(t.len(), |s| s + 1);
            for k in 0..end.min(t.len()) {
                let _ = writeln!(
                    out,
                    "{},{k},{:e},{:e},{:e},{:e},{:e}",
                    r.algorithm, t.errors[k], t.iterate_errors[k], t.values[k], t.outputs[k][0], t.outputs[k][1]
                );
            }
        }
        out
    }
}

/// GD, HB and FG with quadratic-optimal tuning on `u² + 10v²` from
/// `(−5, 1.5)`, run until `‖x_k − x⋆‖ < 1e−6`.
pub fn fig1_experiment() -> Result<Fig1Result> {
    let fc = FunctionClass::new(2.0, 20.0)?;
    let inst = ProblemInstance::diagonal(&[2.0, 20.0], vec![0.0, 0.0], fc)?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for preset in [Preset::GD, Preset::HB, Preset::FG] {
        let params = tune_quadratic_optimal(preset, &fc)?;
        let alg = make_preset(preset, &params)?;
        let trace = run(&alg, &inst, &FIG1_X0, FIG1_MAX_STEPS, None)?;
        rows.push(Fig1Row {
            algorithm: preset,
            params,
            steps: trace.steps_to_tolerance(FIG1_TOL),
        });
        traces.push(trace);
    }
    Ok(Fig1Result { rows, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algomodel::params_from;
    use approx::assert_relative_eq;

    fn gd(alpha: f64) -> AlgorithmRealization {
        make_preset(Preset::GD, &params_from(&[("alpha", alpha)])).unwrap()
    }

    #[test]
    fn deadbeat_scalar() {
        let fc = FunctionClass::new(1.0, 1.0).unwrap();
        let inst = ProblemInstance::diagonal(&[1.0], vec![0.0], fc).unwrap();
        let tr = run(&gd(1.0), &inst, &[5.0], 3, None).unwrap();
        assert_eq!(tr.steps_to_tolerance(1e-12), Some(1));
        assert_eq!(tr.len(), 4);
    }

    #[test]
    fn gd_follows_linear_recurrence() {
        let fc = FunctionClass::new(1.0, 4.0).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inst = ProblemInstance::quadratic(q.clone(), vec![0.0, 0.0], fc).unwrap();
        let alpha = 0.3;
        let tr = run(&gd(alpha), &inst, &[1.0, -2.0], 10, None).unwrap();
        let mut x = nalgebra::DVector::from_column_slice(&[1.0, -2.0]);
        for k in 0..=10 {
            assert_relative_eq!(tr.states[k][0], x[0], epsilon = 1e-13);
            assert_relative_eq!(tr.states[k][1], x[1], epsilon = 1e-13);
            x = &x - &q * &x * alpha;
        }
    }

    #[test]
    fn hb_without_momentum_is_gd() {
        let fc = FunctionClass::new(1.0, 5.0).unwrap();
        let inst = ProblemInstance::log_cosh(vec![0.5, -1.0], fc).unwrap();
        let hb = make_preset(Preset::HB, &params_from(&[("alpha", 0.2), ("beta", 0.0)])).unwrap();
        let a = run(&hb, &inst, &[3.0, 2.0], 25, None).unwrap();
        let b = run(&gd(0.2), &inst, &[3.0, 2.0], 25, None).unwrap();
        for (ya, yb) in a.outputs.iter().zip(&b.outputs) {
            assert_eq!(ya, yb);
        }
    }

    #[test]
    fn empirical_rate_of_gd_on_worst_mode() {
        let fc = FunctionClass::new(1.0, 10.0).unwrap();
        let inst = ProblemInstance::diagonal(&[1.0], vec![2.0], fc).unwrap();
        let tr = run(&gd(2.0 / 11.0), &inst, &[7.0], 400, None).unwrap();
        assert!((tr.empirical_rate().unwrap() - 9.0 / 11.0).abs() < 1e-3);
    }

    #[test]
    fn log_cosh_is_in_class() {
        let fc = FunctionClass::new(0.5, 3.0).unwrap();
        let inst = ProblemInstance::log_cosh(vec![1.0], fc).unwrap();
        assert_eq!(inst.gradient(&[1.0]), vec![0.0]);
        assert_eq!(inst.value_gap(&[1.0]), 0.0);
        let h = 1e-5;
        for &y in &[-30.0, -1.0, 0.3, 1.0, 2.5, 40.0] {
            let curv = (inst.gradient(&[y + h])[0] - inst.gradient(&[y - h])[0]) / (2.0 * h);
            assert!((0.5 - 1e-6..=3.0 + 1e-6).contains(&curv), "curvature {curv} at {y}");
            let slope = (inst.value_gap(&[y + h]) - inst.value_gap(&[y - h])) / (2.0 * h);
            assert_relative_eq!(slope, inst.gradient(&[y])[0], epsilon = 1e-5, max_relative = 1e-7);
        }
    }

    #[test]
    fn out_of_class_quadratic_rejected() {
        let fc = FunctionClass::new(1.0, 4.0).unwrap();
        assert!(ProblemInstance::diagonal(&[0.5, 2.0], vec![0.0, 0.0], fc).is_err());
        assert!(ProblemInstance::diagonal(&[1.0, 4.5], vec![0.0, 0.0], fc).is_err());
    }

    #[test]
    fn divergence_is_flagged() {
        let fc = FunctionClass::new(1.0, 4.0).unwrap();
        let inst = ProblemInstance::diagonal(&[4.0], vec![0.0], fc).unwrap();
        let tr = run(&gd(1.0), &inst, &[1.0], 1000, None).unwrap();
        assert!(tr.diverged);
        assert!(tr.len() < 1000);
    }

    #[test]
    fn noise_moments() {
        for dist in [
            NoiseDistribution::Gaussian,
            NoiseDistribution::Uniform,
            NoiseDistribution::Rademacher,
        ] {
            let noise = NoiseModel::new(2.0, dist, 7).unwrap();
            let mut rng = noise.rng(0);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let second = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.03, "{dist:?} mean {mean}");
            assert!((second - 4.0).abs() < 0.08, "{dist:?} second moment {second}");
        }
    }

    #[test]
    fn noisy_runs_are_reproducible() {
        let fc = FunctionClass::new(1.0, 8.0).unwrap();
        let inst = ProblemInstance::diagonal(&[1.0, 8.0], vec![0.0, 0.0], fc).unwrap();
        let noise = NoiseModel::gaussian(1.0, 42).unwrap();
        let a = run(&gd(0.2), &inst, &[1.0, 1.0], 50, Some(&noise)).unwrap();
        let b = run(&gd(0.2), &inst, &[1.0, 1.0], 50, Some(&noise)).unwrap();
        assert_eq!(a, b);
        let ea = empirical_sensitivity(&gd(0.2), &inst, &noise, 2000, 4).unwrap();
        let eb = empirical_sensitivity(&gd(0.2), &inst, &noise, 2000, 4).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn zero_noise_gives_zero_sensitivity() {
        let fc = FunctionClass::new(1.0, 8.0).unwrap();
        let inst = ProblemInstance::diagonal(&[1.0], vec![3.0], fc).unwrap();
        let noise = NoiseModel::gaussian(0.0, 1).unwrap();
        let est = empirical_sensitivity(&gd(0.2), &inst, &noise, 1000, 3).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn gd_noise_matches_closed_form() {
        let fc = FunctionClass::new(1.0, 8.0).unwrap();
        let inst = ProblemInstance::diagonal(&[1.0], vec![0.0], fc).unwrap();
        let noise = NoiseModel::gaussian(1.0, 3).unwrap();
        let est = empirical_sensitivity(&gd(2.0 / 9.0), &inst, &noise, 100_000, 10).unwrap();
        let expect = (1.0f64 / 8.0).sqrt();
        assert!((est.mean - expect).abs() < 0.05 * expect, "estimate {}", est.mean);
    }

    #[test]
    fn fig1_ordering() {
        let res = fig1_experiment().unwrap();
        let steps: Vec<usize> = res.rows.iter().map(|r| r.steps.unwrap()).collect();
        assert!(steps[1] < steps[0] && steps[2] < steps[0], "{steps:?}");
        assert!(res.summary_csv().lines().count() == 4);
    }
}
