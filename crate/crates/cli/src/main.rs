//! `lyapcert`: certify convergence rates and noise sensitivities of
//! first-order methods from the command line.
//!
//! Exit codes: 0 on success or certified, 2 when no certificate (or a failed
//! check) results, 1 on any error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lyapcert::algomodel::{analytic_rate, tune};
use lyapcert::interp::{interpolation_check, InterpPoint, DEFAULT_INTERP_TOL};
use lyapcert::lmi::{assemble_rate_lmi, assemble_sensitivity_lmi};
use lyapcert::quadoracle::{
    quadratic_sensitivity, sensitivity_curvature, worst_case_curvature, worst_case_rate_quadratic, CurvatureGrid,
    DEFAULT_GRID_POINTS,
};
use lyapcert::sim::{self, NoiseDistribution, NoiseModel, ProblemInstance};
use lyapcert::sweep::{self, SweepSpec, TradeoffSpec, TunedAlgorithm, SCHEMA_VERSION};
use lyapcert::{
    build_lifted, certify_rate, certify_sensitivity, replay_certificate, AlgorithmRealization, AlgorithmSpec,
    BackendKind, Certificate, FunctionClass, Params, Preset, RateOptions, RateOutcome, SensitivityOptions,
    SensitivityOutcome, SolverSettings, Tuning,
};

const EXIT_NO_CERTIFICATE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "lyapcert", version, about = "Lyapunov certificates for first-order methods")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand; each can be set through a
/// `LYAPCERT_*` environment variable.
#[derive(Args, Debug)]
struct Common {
    /// Algorithm family.
    #[arg(long, global = true, env = "LYAPCERT_PRESET")]
    preset: Option<Preset>,
    /// JSON algorithm description (`{"preset":..,"params":..}` or `{"custom":{"A":..,"B":..,"C":..}}`).
    #[arg(
        long,
        global = true,
        env = "LYAPCERT_CUSTOM",
        value_name = "FILE",
        conflicts_with = "preset"
    )]
    custom: Option<PathBuf>,
    /// Tuning rule; defaults to manual when parameters are given, quadratic-optimal otherwise.
    #[arg(long, global = true, env = "LYAPCERT_TUNE")]
    tune: Option<Tuning>,
    #[arg(long, global = true, env = "LYAPCERT_ALPHA", allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, env = "LYAPCERT_BETA", allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, global = true, env = "LYAPCERT_GAMMA", allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Strong convexity parameter.
    #[arg(long, global = true, env = "LYAPCERT_M")]
    m: Option<f64>,
    /// Smoothness parameter.
    #[arg(long = "L", global = true, env = "LYAPCERT_L")]
    l: Option<f64>,
    /// Lifting memory.
    #[arg(long, global = true, env = "LYAPCERT_ELL")]
    ell: Option<usize>,
    /// Noise standard deviation per coordinate.
    #[arg(long, global = true, env = "LYAPCERT_SIGMA")]
    sigma: Option<f64>,
    /// Problem dimension.
    #[arg(long, global = true, env = "LYAPCERT_D")]
    d: Option<usize>,
    /// SDP backend (ipm or barrier).
    #[arg(long, global = true, env = "LYAPCERT_SOLVER")]
    solver: Option<BackendKind>,
    /// Solver accuracy.
    #[arg(long, global = true, env = "LYAPCERT_TOL")]
    tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, env = "LYAPCERT_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "LYAPCERT_SEED")]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "LYAPCERT_JOBS")]
    jobs: Option<usize>,
    /// Also write a gnuplot script next to the output file.
    #[arg(long, global = true, env = "LYAPCERT_GNUPLOT")]
    gnuplot: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bisect for the smallest certifiable convergence rate.
    CertifyRate {
        #[arg(long, default_value_t = lyapcert::certify::DEFAULT_BISECT_TOL)]
        bisect_tol: f64,
        /// Write the lifted realization as JSON.
        #[arg(long, value_name = "FILE")]
        dump_lifted: Option<PathBuf>,
        /// Write the rate LMI at the certified (or upper) rate as JSON.
        #[arg(long, value_name = "FILE")]
        dump_lmi: Option<PathBuf>,
    },
    /// Certify an upper bound on the noise sensitivity.
    CertifySens {
        #[arg(long, value_name = "FILE")]
        dump_lifted: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        dump_lmi: Option<PathBuf>,
    },
    /// Check a stored certificate against its own algorithm and class.
    Replay {
        certificate: PathBuf,
        #[arg(long, default_value_t = lyapcert::certify::DEFAULT_REPLAY_TOL)]
        replay_tol: f64,
    },
    /// Certified, quadratic and closed-form rates over a κ grid (CSV).
    SweepRate {
        /// JSON sweep configuration with `schema_version`.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Explicit comma-separated κ values.
        #[arg(long, value_delimiter = ',')]
        kappas: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        kappa_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        kappa_max: f64,
        #[arg(long, default_value_t = 13)]
        kappa_points: usize,
    },
    /// Certified rate against certified sensitivity (CSV).
    Tradeoff {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Comma-separated GD step sizes; a default grid over (0, 2/L] otherwise.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
    },
    /// Simulate the algorithm on a quadratic or log-cosh objective (CSV trace).
    Simulate {
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Comma-separated starting point; all ones when absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        /// Comma-separated Hessian eigenvalues of a diagonal quadratic.
        #[arg(long, value_delimiter = ',')]
        curvatures: Vec<f64>,
        #[arg(long, value_parser = ["quadratic", "log-cosh"], default_value = "quadratic")]
        objective: String,
        #[arg(long, default_value = "gaussian")]
        noise: NoiseDistribution,
    },
    /// Check a JSON list of `{y, u, f}` triples for interpolability.
    InterpCheck {
        points: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INTERP_TOL)]
        interp_tol: f64,
    },
    /// Worst-case rate over quadratics with curvature in [m, L].
    OracleRate {
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
    },
    /// Worst-case noise sensitivity over quadratics with curvature in [m, L].
    OracleSens {
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
    },
    /// GD, HB and FG on a two-dimensional quadratic: steps to 1e-6.
    Fig1 {
        /// Also write every trajectory as CSV.
        #[arg(long, value_name = "FILE")]
        trajectories: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let c = &cli.common;
    match &cli.command {
        Command::CertifyRate {
            bisect_tol,
            dump_lifted,
            dump_lmi,
        } => cmd_certify_rate(c, *bisect_tol, dump_lifted.as_deref(), dump_lmi.as_deref()),
        Command::CertifySens { dump_lifted, dump_lmi } => {
            cmd_certify_sens(c, dump_lifted.as_deref(), dump_lmi.as_deref())
        }
        Command::Replay {
            certificate,
            replay_tol,
        } => cmd_replay(c, certificate, *replay_tol),
        Command::SweepRate {
            config,
            kappas,
            kappa_min,
            kappa_max,
            kappa_points,
        } => {
            let mut spec = match config {
                Some(path) => read_json::<SweepSpec>(path)?,
                None => {
                    let grid = if kappas.is_empty() {
                        sweep::log_grid(*kappa_min, *kappa_max, *kappa_points)
                    } else {
                        kappas.clone()
                    };
                    SweepSpec::new(grid)
                }
            };
            if let Some(m) = c.m {
                spec.m = m;
            }
            if let Some(ell) = c.ell {
                spec.ell = ell;
            }
            apply_solver(c, &mut spec.backend, &mut spec.solver);
            spec.jobs = c.jobs.or(spec.jobs);
            let rows = sweep::sweep_rate(&spec)?;
            let labels: Vec<String> = spec.algorithms.iter().map(TunedAlgorithm::label).collect();
            emit(c.out.as_deref(), &sweep::rate_rows_csv(&rows))?;
            if c.gnuplot {
                write_gnuplot(c.out.as_deref(), |csv| sweep::rate_gnuplot(csv, &labels))?;
            }
            Ok(0)
        }
        Command::Tradeoff { config, alphas } => {
            let mut spec = match config {
                Some(path) => read_json::<TradeoffSpec>(path)?,
                None => TradeoffSpec::new(1.0, 8.0),
            };
            if let Some(m) = c.m {
                spec.m = m;
            }
            if let Some(l) = c.l {
                spec.l = l;
            }
            if !alphas.is_empty() {
                spec.gd_alphas = alphas.clone();
            }
            if let Some(ell) = c.ell {
                spec.ell_sens = ell;
            }
            if let Some(s) = c.sigma {
                spec.sigma = s;
            }
            if let Some(d) = c.d {
                spec.d = d;
            }
            apply_solver(c, &mut spec.backend, &mut spec.solver);
            spec.jobs = c.jobs.or(spec.jobs);
            let rows = sweep::tradeoff(&spec)?;
            emit(c.out.as_deref(), &sweep::tradeoff_csv(&rows))?;
            if c.gnuplot {
                write_gnuplot(c.out.as_deref(), sweep::tradeoff_gnuplot)?;
            }
            Ok(0)
        }
        Command::Simulate {
            steps,
            x0,
            curvatures,
            objective,
            noise,
        } => cmd_simulate(c, *steps, x0, curvatures, objective, *noise),
        Command::InterpCheck { points, interp_tol } => {
            let fc = function_class(c)?;
            let pts: Vec<InterpPoint> = read_json(points)?;
            let report = interpolation_check(&pts, &fc, *interp_tol)?;
            emit(c.out.as_deref(), &to_json(&report)?)?;
            if !report.interpolable {
                let (i, j) = report.worst_pair;
                eprintln!("not interpolable: pair ({i}, {j}) has q = {:e}", report.worst_value);
                return Ok(EXIT_NO_CERTIFICATE);
            }
            Ok(0)
        }
        Command::OracleRate { grid_points } => {
            let (alg, fc, spec, _) = algorithm(c)?;
            let grid = CurvatureGrid::uniform(&fc, *grid_points)?;
            let report = OracleReport {
                algorithm: spec,
                fc,
                rate: worst_case_rate_quadratic(&alg, &fc, &grid)?,
                worst_curvature: worst_case_curvature(&alg, &fc, &grid)?,
                sigma: None,
                d: None,
                gamma: None,
            };
            emit(c.out.as_deref(), &to_json(&report)?)?;
            Ok(0)
        }
        Command::OracleSens { grid_points } => {
            let (alg, fc, spec, _) = algorithm(c)?;
            let grid = CurvatureGrid::uniform(&fc, *grid_points)?;
            let (sigma, d) = (c.sigma.unwrap_or(1.0), c.d.unwrap_or(1));
            let report = OracleReport {
                algorithm: spec,
                fc,
                rate: worst_case_rate_quadratic(&alg, &fc, &grid)?,
                worst_curvature: sensitivity_curvature(&alg, &fc, &grid)?,
                sigma: Some(sigma),
                d: Some(d),
                gamma: Some(quadratic_sensitivity(&alg, &fc, sigma, d, &grid)?),
            };
            emit(c.out.as_deref(), &to_json(&report)?)?;
            Ok(0)
        }
        Command::Fig1 { trajectories } => {
            let res = sim::fig1_experiment()?;
            emit(c.out.as_deref(), &res.summary_csv())?;
            if let Some(path) = trajectories {
                fs::write(path, res.trajectories_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct OracleReport {
    algorithm: AlgorithmSpec,
    fc: FunctionClass,
    rate: f64,
    worst_curvature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

fn cmd_certify_rate(c: &Common, bisect_tol: f64, dump_lifted: Option<&Path>, dump_lmi: Option<&Path>) -> Result<u8> {
    let (alg, fc, _, analytic) = algorithm(c)?;
    let mut opts = RateOptions::with_ell(c.ell.unwrap_or(lyapcert::certify::DEFAULT_RATE_ELL));
    opts.bisect_tol = bisect_tol;
    apply_solver(c, &mut opts.backend, &mut opts.solver);
    let ls = build_lifted(&alg, opts.ell);
    if let Some(path) = dump_lifted {
        write_file(path, &to_json(&ls)?)?;
    }
    let outcome = certify_rate(&alg, &fc, &opts)?;
    if let Some(path) = dump_lmi {
        let r = outcome.r_upper().unwrap_or(opts.r_max);
        write_file(path, &to_json(&assemble_rate_lmi(&ls, r, &fc)?.debug_dump())?)?;
    }
    match outcome {
        RateOutcome::Certified(cert) => {
            match analytic {
                Some(a) => eprintln!("certified rate {:.6} (closed form {a:.6})", cert.r_upper),
                None => eprintln!("certified rate {:.6}", cert.r_upper),
            }
            emit(c.out.as_deref(), &to_json(&Certificate::Rate(*cert))?)?;
            Ok(0)
        }
        other => {
            eprintln!("no rate certificate at ell = {}", opts.ell);
            emit(c.out.as_deref(), &to_json(&other)?)?;
            Ok(EXIT_NO_CERTIFICATE)
        }
    }
}

fn cmd_certify_sens(c: &Common, dump_lifted: Option<&Path>, dump_lmi: Option<&Path>) -> Result<u8> {
    let (alg, fc, _, _) = algorithm(c)?;
    let mut opts = SensitivityOptions::with_ell(c.ell.unwrap_or(lyapcert::certify::DEFAULT_SENSITIVITY_ELL));
    apply_solver(c, &mut opts.backend, &mut opts.solver);
    let ls = build_lifted(&alg, opts.ell);
    if let Some(path) = dump_lifted {
        write_file(path, &to_json(&ls)?)?;
    }
    if let Some(path) = dump_lmi {
        write_file(path, &to_json(&assemble_sensitivity_lmi(&ls, &fc)?.debug_dump())?)?;
    }
    let (sigma, d) = (c.sigma.unwrap_or(1.0), c.d.unwrap_or(1));
    match certify_sensitivity(&alg, &fc, sigma, d, &opts)? {
        SensitivityOutcome::Certified(cert) => {
            eprintln!("certified sensitivity {:.6}", cert.gamma);
            emit(c.out.as_deref(), &to_json(&Certificate::Sensitivity(*cert))?)?;
            Ok(0)
        }
        other => {
            eprintln!("no sensitivity certificate at ell = {}", opts.ell);
            emit(c.out.as_deref(), &to_json(&other)?)?;
            Ok(EXIT_NO_CERTIFICATE)
        }
    }
}

fn cmd_replay(c: &Common, path: &Path, replay_tol: f64) -> Result<u8> {
    let mut cert: Certificate = read_json(path)?;
    match &mut cert {
        Certificate::Rate(r) => r.tolerance = replay_tol,
        Certificate::Sensitivity(s) => s.tolerance = replay_tol,
    }
    let alg = cert.algorithm().realize()?;
    let fc = *cert.fc();
    let report = replay_certificate(&cert, &alg, &fc)?;
    emit(c.out.as_deref(), &to_json(&report)?)?;
    if report.pass {
        eprintln!("certificate replays (worst residual {:e})", report.worst());
        Ok(0)
    } else {
        eprintln!("certificate fails replay (worst residual {:e})", report.worst());
        Ok(EXIT_NO_CERTIFICATE)
    }
}

fn cmd_simulate(
    c: &Common,
    steps: usize,
    x0: &[f64],
    curvatures: &[f64],
    objective: &str,
    dist: NoiseDistribution,
) -> Result<u8> {
    let (alg, fc, _, _) = algorithm(c)?;
    let dim = match (c.d, x0.len(), curvatures.len()) {
        (Some(d), _, _) => d,
        (None, n, _) if n > 0 => n,
        (None, _, n) if n > 0 => n,
        _ => 2,
    };
    let x0 = if x0.is_empty() { vec![1.0; dim] } else { x0.to_vec() };
    if x0.len() != dim {
        bail!("x0 has {} entries but d = {dim}", x0.len());
    }
    let y_star = vec![0.0; dim];
    let inst = match objective {
        "log-cosh" => ProblemInstance::log_cosh(y_star, fc)?,
        _ => {
            let q = if curvatures.is_empty() {
                // Spread the eigenvalues over [m, L].
                (0..dim)
                    .map(|i| {
                        if dim == 1 {
                            fc.l
                        } else {
                            fc.m + (fc.l - fc.m) * i as f64 / (dim - 1) as f64
                        }
                    })
                    .collect()
            } else {
                curvatures.to_vec()
            };
            ProblemInstance::diagonal(&q, y_star, fc)?
        }
    };
    let noise = match c.sigma {
        Some(s) if s > 0.0 => Some(NoiseModel::new(s, dist, c.seed.unwrap_or(0))?),
        _ => None,
    };
    let trace = sim::run(&alg, &inst, &x0, steps, noise.as_ref())?;
    if trace.diverged {
        eprintln!("trajectory diverged after {} steps", trace.len() - 1);
    } else if let Some(r) = trace.empirical_rate() {
        eprintln!("empirical rate {r:.6}");
    }
    emit(c.out.as_deref(), &trace.to_csv())?;
    Ok(0)
}

/// The algorithm, its class, its JSON description and the closed-form rate
/// of its tuning when known.
fn algorithm(c: &Common) -> Result<(AlgorithmRealization, FunctionClass, AlgorithmSpec, Option<f64>)> {
    let fc = function_class(c)?;
    if let Some(path) = &c.custom {
        let spec: AlgorithmSpec = read_json(path)?;
        let alg = spec.realize()?;
        return Ok((alg, fc, spec, None));
    }
    let preset = c
        .preset
        .ok_or_else(|| anyhow!("either --preset or --custom is required"))?;
    let mut manual = Params::new();
    for (name, v) in [("alpha", c.alpha), ("beta", c.beta), ("gamma", c.gamma)] {
        if let Some(v) = v {
            manual.insert(name.to_string(), v);
        }
    }
    let tuning = c.tune.unwrap_or(if manual.is_empty() {
        default_tuning(preset)
    } else {
        Tuning::Manual
    });
    if tuning != Tuning::Manual && !manual.is_empty() {
        bail!("--alpha/--beta/--gamma require --tune manual");
    }
    let params = tune(preset, tuning, &fc, &manual)?;
    let alg = lyapcert::make_preset(preset, &params)?;
    let spec = alg.spec();
    Ok((alg, fc, spec, analytic_rate(preset, tuning, &fc)))
}

fn default_tuning(preset: Preset) -> Tuning {
    match preset {
        Preset::TMM => Tuning::TripleMomentum,
        _ => Tuning::QuadraticOptimal,
    }
}

fn function_class(c: &Common) -> Result<FunctionClass> {
    let l = c.l.ok_or_else(|| anyhow!("--L is required"))?;
    Ok(FunctionClass::new(c.m.unwrap_or(1.0), l)?)
}

fn apply_solver(c: &Common, backend: &mut BackendKind, settings: &mut SolverSettings) {
    if let Some(b) = c.solver {
        *backend = b;
    }
    if let Some(t) = c.tol {
        settings.tol = t;
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(v) = value.get("schema_version").and_then(serde_json::Value::as_u64) {
        if v != u64::from(SCHEMA_VERSION) {
            bail!(
                "{}: unsupported schema_version {v}, expected {SCHEMA_VERSION}",
                path.display()
            );
        }
    }
    serde_json::from_value(value).with_context(|| format!("invalid contents of {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

/// Writes `<out>.gp` next to the CSV; requires `--out`.
fn write_gnuplot(out: Option<&Path>, script: impl FnOnce(&str) -> String) -> Result<()> {
    let out = out.ok_or_else(|| anyhow!("--gnuplot needs --out so that the script can refer to the data file"))?;
    let mut gp = out.as_os_str().to_owned();
    gp.push(".gp");
    let csv = out
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    write_file(Path::new(&gp), &script(&csv))
}
