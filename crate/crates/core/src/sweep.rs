//! Parameter sweeps: certified rate against condition number, and the
//! rate/noise-sensitivity trade-off on a fixed function class.
//!
//! Rows are computed on a worker pool and returned in input order, so the
//! CSV output depends only on the spec and solver settings.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algomodel::{analytic_rate, make_preset, params_from, tune, FunctionClass, Params, Preset, Tuning};
use crate::certify::{
    certify_rate, certify_sensitivity, RateOptions, RateOutcome, SensitivityOptions, SensitivityOutcome,
    DEFAULT_RATE_ELL, DEFAULT_SENSITIVITY_ELL,
};
use crate::error::{Error, Result};
use crate::quadoracle::{quadratic_sensitivity, worst_case_rate_quadratic, CurvatureGrid};
use crate::sdp::{BackendKind, SolverSettings};

pub const SCHEMA_VERSION: u32 = 1;

/// A preset with a named tuning rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunedAlgorithm {
    pub preset: Preset,
    pub tuning: Tuning,
}

impl TunedAlgorithm {
    pub const fn new(preset: Preset, tuning: Tuning) -> Self {
        Self { preset, tuning }
    }

    /// GD, HB and FG with quadratic-optimal tuning, FG with the
    /// estimating-sequences tuning and TMM.
    pub fn standard() -> Vec<Self> {
        vec![
            Self::new(Preset::GD, Tuning::QuadraticOptimal),
            Self::new(Preset::HB, Tuning::QuadraticOptimal),
            Self::new(Preset::FG, Tuning::QuadraticOptimal),
            Self::new(Preset::FG, Tuning::EstimatingSequences),
            Self::new(Preset::TMM, Tuning::TripleMomentum),
        ]
    }

    pub fn label(&self) -> String {
        match (self.preset, self.tuning) {
            (Preset::FG, Tuning::EstimatingSequences) => "FG*".to_string(),
            (p, _) => p.to_string(),
        }
    }

    pub fn params(&self, fc: &FunctionClass) -> Result<Params> {
        if self.tuning == Tuning::Manual {
            return Err(Error::InvalidParameter("sweeps need a named tuning rule".into()));
        }
        tune(self.preset, self.tuning, fc, &Params::new())
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut v: Vec<f64> = (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        }
    }
}

fn build_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    b.build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::InvalidParameter(format!(
            "unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Settings of the κ-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema_version: u32,
    pub kappas: Vec<f64>,
    #[serde(default = "TunedAlgorithm::standard")]
    pub algorithms: Vec<TunedAlgorithm>,
    /// Strong convexity; `L = κ m`.
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "default_rate_ell")]
    pub ell: usize,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn default_rate_ell() -> usize {
    DEFAULT_RATE_ELL
}

fn default_sens_ell() -> usize {
    DEFAULT_SENSITIVITY_ELL
}

impl SweepSpec {
    pub fn new(kappas: Vec<f64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kappas,
            algorithms: TunedAlgorithm::standard(),
            m: 1.0,
            ell: DEFAULT_RATE_ELL,
            backend: BackendKind::default(),
            solver: SolverSettings::default(),
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.kappas.is_empty() || self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        if let Some(k) = self.kappas.iter().find(|k| !(k.is_finite() && **k >= 1.0)) {
            return Err(Error::InvalidParameter(format!("kappa = {k} must be at least 1")));
        }
        FunctionClass::new(self.m, self.m)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub kappa: f64,
    pub algorithm: String,
    pub tuning: Tuning,
    /// Certified bound; 1.0 when no certificate was found.
    pub certified_rate: f64,
    pub certified: bool,
    /// `certified`, `no-certificate`, `unknown` or `error: ...`.
    pub status: String,
    pub oracle_rate: f64,
    pub analytic_rate: Option<f64>,
}

fn rate_row(kappa: f64, alg: TunedAlgorithm, spec: &SweepSpec) -> RateRow {
    let mut row = RateRow {
        kappa,
        algorithm: alg.label(),
        tuning: alg.tuning,
        certified_rate: 1.0,
        certified: false,
        status: String::new(),
        oracle_rate: f64::NAN,
        analytic_rate: None,
    };
    let mut run = || -> Result<(RateOutcome, f64)> {
        let fc = FunctionClass::new(spec.m, spec.m * kappa)?;
        row.analytic_rate = analytic_rate(alg.preset, alg.tuning, &fc);
        let realization = make_preset(alg.preset, &alg.params(&fc)?)?;
        let oracle = worst_case_rate_quadratic(&realization, &fc, &CurvatureGrid::default_for(&fc)?)?;
        let opts = RateOptions {
            ell: spec.ell,
            backend: spec.backend,
            solver: spec.solver.clone(),
            ..RateOptions::default()
        };
        Ok((certify_rate(&realization, &fc, &opts)?, oracle))
    };
    match run() {
        Ok((outcome, oracle)) => {
            row.oracle_rate = oracle;
            match outcome {
                RateOutcome::Certified(c) => {
                    row.certified_rate = c.r_upper;
                    row.certified = true;
                    row.status = "certified".into();
                }
                RateOutcome::NoCertificate { .. } => row.status = "no-certificate".into(),
                RateOutcome::Unknown { .. } => row.status = "unknown".into(),
            }
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// One row per `(κ, algorithm)`, ordered by κ then by algorithm list order.
pub fn sweep_rate(spec: &SweepSpec) -> Result<Vec<RateRow>> {
    spec.validate()?;
    let cells: Vec<(f64, TunedAlgorithm)> = spec
        .kappas
        .iter()
        .flat_map(|&k| spec.algorithms.iter().map(move |&a| (k, a)))
        .collect();
    let pool = build_pool(spec.jobs)?;
    Ok(pool.install(|| cells.par_iter().map(|&(k, a)| rate_row(k, a, spec)).collect()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn rate_rows_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("kappa,algorithm,tuning,certified_rate,oracle_rate,analytic_rate,certified,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.kappa,
            r.algorithm,
            r.tuning,
            r.certified_rate,
            r.oracle_rate,
            fmt_opt(r.analytic_rate),
            r.certified,
            csv_field(&r.status)
        );
    }
    out
}

/// Gnuplot script plotting certified rates from `csv_path` against κ.
pub fn rate_gnuplot(csv_path: &str, algorithms: &[String]) -> String {
    let mut s = format!(
        "set datafile separator ','\nset logscale x\nset xlabel 'kappa'\nset ylabel '1 - rate'\nset logscale y\nset key left bottom\nfile = '{csv_path}'\nplot \\\n"
    );
    let parts: Vec<String> = algorithms
        .iter()
        .map(|a| format!("  file using 1:(strcol(2) eq '{a}' ? 1 - $4 : NaN) with linespoints title '{a}'"))
        .collect();
    s.push_str(&parts.join(", \\\n"));
    s.push('\n');
    s
}

/// Settings of the trade-off sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffSpec {
    pub schema_version: u32,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "default_tradeoff_l")]
    pub l: f64,
    /// GD step sizes; empty means [`default_gd_alphas`].
    #[serde(default)]
    pub gd_alphas: Vec<f64>,
    #[serde(default = "default_tradeoff_presets")]
    pub presets: Vec<TunedAlgorithm>,
    #[serde(default = "default_rate_ell")]
    pub ell_rate: usize,
    #[serde(default = "default_sens_ell")]
    pub ell_sens: usize,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one_usize")]
    pub d: usize,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_tradeoff_l() -> f64 {
    8.0
}

fn one_usize() -> usize {
    1
}

fn default_tradeoff_presets() -> Vec<TunedAlgorithm> {
    TunedAlgorithm::standard()
        .into_iter()
        .filter(|a| a.preset != Preset::GD)
        .collect()
}

/// `2/L · k/24` for `k = 1..24`, together with `2/(L+m)` and `0.05` when
/// they lie in `(0, 2/L]`.
pub fn default_gd_alphas(fc: &FunctionClass) -> Vec<f64> {
    let top = 2.0 / fc.l;
    let mut v: Vec<f64> = (1..=24).map(|k| top * k as f64 / 24.0).collect();
    v.extend([2.0 / (fc.l + fc.m), 0.05].into_iter().filter(|&a| a > 0.0 && a <= top));
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    v
}

impl TradeoffSpec {
    pub fn new(m: f64, l: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            m,
            l,
            gd_alphas: Vec::new(),
            presets: default_tradeoff_presets(),
            ell_rate: DEFAULT_RATE_ELL,
            ell_sens: DEFAULT_SENSITIVITY_ELL,
            sigma: 1.0,
            d: 1,
            backend: BackendKind::default(),
            solver: SolverSettings::default(),
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<FunctionClass> {
        check_schema(self.schema_version)?;
        let fc = FunctionClass::new(self.m, self.l)?;
        if let Some(a) = self.gd_alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!("step size {a} must be positive")));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) || self.d == 0 {
            return Err(Error::InvalidParameter("need sigma >= 0 and d >= 1".into()));
        }
        Ok(fc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub algorithm: String,
    pub tuning: Tuning,
    pub params: Params,
    /// 1.0 without a rate certificate.
    pub certified_rate: f64,
    /// `+∞` without a sensitivity certificate.
    pub certified_gamma: f64,
    pub rate_certified: bool,
    pub gamma_certified: bool,
    pub oracle_rate: f64,
    /// `+∞` when some quadratic mode is not asymptotically stable.
    pub oracle_gamma: f64,
    pub status: String,
}

impl TradeoffRow {
    /// Both coordinates no worse and at least one strictly better.
    pub fn dominates(&self, other: &TradeoffRow) -> bool {
        let no_worse = self.certified_rate <= other.certified_rate && self.certified_gamma <= other.certified_gamma;
        let better = self.certified_rate < other.certified_rate || self.certified_gamma < other.certified_gamma;
        no_worse && better
    }

    pub fn alpha(&self) -> Option<f64> {
        self.params.get("alpha").copied()
    }
}

fn tradeoff_row(
    label: String,
    preset: Preset,
    tuning: Tuning,
    params: Params,
    fc: &FunctionClass,
    spec: &TradeoffSpec,
) -> TradeoffRow {
    let mut row = TradeoffRow {
        algorithm: label,
        tuning,
        params: params.clone(),
        certified_rate: 1.0,
        certified_gamma: f64::INFINITY,
        rate_certified: false,
        gamma_certified: false,
        oracle_rate: f64::NAN,
        oracle_gamma: f64::INFINITY,
        status: String::new(),
    };
    let mut run = || -> Result<()> {
        let alg = make_preset(preset, &params)?;
        let grid = CurvatureGrid::default_for(fc)?;
        row.oracle_rate = worst_case_rate_quadratic(&alg, fc, &grid)?;
        if row.oracle_rate < 1.0 {
            row.oracle_gamma = quadratic_sensitivity(&alg, fc, spec.sigma, spec.d, &grid).unwrap_or(f64::INFINITY);
        }
        let ropts = RateOptions {
            ell: spec.ell_rate,
            backend: spec.backend,
            solver: spec.solver.clone(),
            ..RateOptions::default()
        };
        if let RateOutcome::Certified(c) = certify_rate(&alg, fc, &ropts)? {
            row.certified_rate = c.r_upper;
            row.rate_certified = true;
        }
        let sopts = SensitivityOptions {
            ell: spec.ell_sens,
            backend: spec.backend,
            solver: spec.solver.clone(),
            ..SensitivityOptions::default()
        };
        if let SensitivityOutcome::Certified(c) = certify_sensitivity(&alg, fc, spec.sigma, spec.d, &sopts)? {
            row.certified_gamma = c.gamma;
            row.gamma_certified = true;
        }
        Ok(())
    };
    row.status = match run() {
        Ok(()) => match (row.rate_certified, row.gamma_certified) {
            (true, true) => "certified".into(),
            (true, false) => "rate-only".into(),
            (false, true) => "gamma-only".into(),
            (false, false) => "no-certificate".into(),
        },
        Err(e) => format!("error: {e}"),
    };
    row
}

/// GD rows in increasing step size, then the preset rows.
pub fn tradeoff(spec: &TradeoffSpec) -> Result<Vec<TradeoffRow>> {
    let fc = spec.validate()?;
    let alphas = if spec.gd_alphas.is_empty() {
        default_gd_alphas(&fc)
    } else {
        spec.gd_alphas.clone()
    };
    let mut cells: Vec<(String, Preset, Tuning, Params)> = alphas
        .iter()
        .map(|&a| {
            (
                "GD".to_string(),
                Preset::GD,
                Tuning::Manual,
                params_from(&[("alpha", a)]),
            )
        })
        .collect();
    for p in &spec.presets {
        cells.push((p.label(), p.preset, p.tuning, p.params(&fc)?));
    }
    let pool = build_pool(spec.jobs)?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|(label, preset, tuning, params)| {
                tradeoff_row(label.clone(), *preset, *tuning, params.clone(), &fc, spec)
            })
            .collect()
    }))
}

pub fn tradeoff_csv(rows: &[TradeoffRow]) -> String {
    let mut out = String::from(
        "algorithm,tuning,alpha,beta,certified_rate,certified_gamma,oracle_rate,oracle_gamma,rate_certified,gamma_certified,status\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.tuning,
            fmt_opt(r.alpha()),
            fmt_opt(r.params.get("beta").copied()),
            r.certified_rate,
            r.certified_gamma,
            r.oracle_rate,
            r.oracle_gamma,
            r.rate_certified,
            r.gamma_certified,
            csv_field(&r.status)
        );
    }
    out
}

pub fn tradeoff_gnuplot(csv_path: &str) -> String {
    format!(
        "set datafile separator ','\nset xlabel 'certified rate'\nset ylabel 'certified gamma'\nset logscale y\nfile = '{csv_path}'\n\
         plot file using (strcol(1) eq 'GD' ? $5 : NaN):6 with linespoints title 'GD', \\\n  \
         file using (strcol(1) ne 'GD' ? $5 : NaN):6:1 with labels point pt 7 offset 1,1 notitle\n"
    )
}
