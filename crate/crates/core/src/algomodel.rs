//! State-space realizations of first-order methods and their standard tunings.
//!
//! Every algorithm is a SISO system `G = (A, B, C)` acting on row-vector
//! signals: `ξ_{k+1} = A ξ_k + B (u_k + w_k)`, `y_k = C ξ_k`, `u_k = ∇f(y_k)`.
//! The state `ξ_k` is an `n × d` matrix, one column per coordinate of the
//! domain, so the realization never depends on `d`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Named real tuning parameters (`alpha`, `beta`, ...).
pub type Params = BTreeMap<String, f64>;

/// The class of `L`-smooth, `m`-strongly convex functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl FunctionClass {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        let fc = Self { m, l };
        fc.validate()?;
        Ok(fc)
    }

    /// Class with `m = 1` and the given condition number.
    pub fn with_kappa(kappa: f64) -> Result<Self> {
        Self::new(1.0, kappa)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.l.is_finite()) {
            return Err(Error::InvalidClass(format!(
                "non-finite parameters m = {}, L = {}",
                self.m, self.l
            )));
        }
        if self.m <= 0.0 {
            return Err(Error::InvalidClass(format!("m = {} must be positive", self.m)));
        }
        if self.l < self.m {
            return Err(Error::InvalidClass(format!(
                "L = {} must be at least m = {}",
                self.l, self.m
            )));
        }
        Ok(())
    }

    /// Condition number `L / m`.
    pub fn kappa(&self) -> f64 {
        self.l / self.m
    }
}

/// Built-in algorithm families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    /// Gradient descent.
    GD,
    /// Polyak's heavy ball.
    HB,
    /// Nesterov's fast gradient method.
    FG,
    /// Triple momentum method.
    TMM,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::GD, Preset::HB, Preset::FG, Preset::TMM];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::GD => "GD",
            Preset::HB => "HB",
            Preset::FG => "FG",
            Preset::TMM => "TMM",
        }
    }

    fn required_params(&self) -> &'static [&'static str] {
        match self {
            Preset::GD => &["alpha"],
            Preset::HB | Preset::FG => &["alpha", "beta"],
            Preset::TMM => &["alpha", "beta", "gamma"],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GD" => Ok(Preset::GD),
            "HB" => Ok(Preset::HB),
            "FG" => Ok(Preset::FG),
            "TMM" => Ok(Preset::TMM),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

/// A linear time-invariant algorithm `G = (A, B, C)` together with the
/// direction `v` of its fixed points (`A v = v`, `C v = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmRealization {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    fixed_direction: DVector<f64>,
    params: Params,
    label: String,
    preset: Option<Preset>,
}

const FIXED_POINT_TOL: f64 = 1e-9;

impl AlgorithmRealization {
    /// User-supplied realization. When `fixed_direction` is `None` the
    /// all-ones vector is tried.
    pub fn custom(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        fixed_direction: Option<DVector<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        let v = fixed_direction.unwrap_or_else(|| DVector::from_element(n, 1.0));
        let alg = Self {
            a,
            b,
            c,
            fixed_direction: v,
            params: Params::new(),
            label: "custom".to_string(),
            preset: None,
        };
        alg.validate()?;
        Ok(alg)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if n == 0 {
            return Err(Error::InvalidRealization("state dimension is zero".into()));
        }
        if self.a.ncols() != n {
            return Err(Error::InvalidRealization(format!(
                "A must be square, got {}x{}",
                n,
                self.a.ncols()
            )));
        }
        if self.b.shape() != (n, 1) {
            return Err(Error::InvalidRealization(format!(
                "B must be {n}x1, got {}x{}",
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        if self.c.shape() != (1, n) {
            return Err(Error::InvalidRealization(format!(
                "C must be 1x{n}, got {}x{}",
                self.c.nrows(),
                self.c.ncols()
            )));
        }
        if self.fixed_direction.len() != n {
            return Err(Error::InvalidRealization(format!(
                "fixed-point direction has length {}, expected {n}",
                self.fixed_direction.len()
            )));
        }
        let all_finite = self
            .a
            .iter()
            .chain(self.b.iter())
            .chain(self.c.iter())
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidRealization("non-finite entry".into()));
        }
        let v = &self.fixed_direction;
        let drift = (&self.a * v - v).amax();
        let out = (&self.c * v)[0];
        if drift > FIXED_POINT_TOL * (1.0 + v.amax()) || (out - 1.0).abs() > FIXED_POINT_TOL {
            return Err(Error::InvalidRealization(format!(
                "no fixed point along the declared direction: |Av - v| = {drift:.3e}, Cv = {out}"
            )));
        }
        Ok(())
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn preset(&self) -> Option<Preset> {
        self.preset
    }

    pub fn fixed_direction(&self) -> &DVector<f64> {
        &self.fixed_direction
    }

    /// Fixed point of the closed loop for a function minimized at `y_star`.
    pub fn fixed_point(&self, y_star: &[f64], f_star: f64) -> FixedPoint {
        let d = y_star.len();
        let y = DMatrix::from_row_slice(1, d, y_star);
        FixedPoint {
            xi_star: &self.fixed_direction * &y,
            y_star: y,
            u_star: DMatrix::zeros(1, d),
            f_star,
        }
    }

    /// Spectral radius of `A`.
    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    /// JSON-serializable description.
    pub fn spec(&self) -> AlgorithmSpec {
        match self.preset {
            Some(preset) => AlgorithmSpec::Preset {
                preset,
                params: self.params.clone(),
            },
            None => AlgorithmSpec::Custom {
                custom: CustomRealization {
                    a: rows_of(&self.a),
                    b: rows_of(&self.b),
                    c: rows_of(&self.c),
                    v: Some(self.fixed_direction.iter().copied().collect()),
                    label: Some(self.label.clone()),
                },
            },
        }
    }
}

/// Build a preset realization from its tuning parameters.
pub fn make_preset(preset: Preset, params: &Params) -> Result<AlgorithmRealization> {
    for &name in preset.required_params() {
        match params.get(name) {
            None => {
                return Err(Error::MissingParameter {
                    preset: preset.to_string(),
                    param: name.to_string(),
                })
            }
            Some(v) if !v.is_finite() => return Err(Error::InvalidParameter(format!("{name} = {v} is not finite"))),
            Some(_) => {}
        }
    }
    let alpha = params["alpha"];
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }

    let (a, b, c) = match preset {
        Preset::GD => (
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, -alpha),
            DMatrix::from_element(1, 1, 1.0),
        ),
        Preset::HB | Preset::FG | Preset::TMM => {
            let beta = params["beta"];
            let a = DMatrix::from_row_slice(2, 2, &[1.0 + beta, -beta, 1.0, 0.0]);
            let b = DMatrix::from_row_slice(2, 1, &[-alpha, 0.0]);
            let c = match preset {
                Preset::HB => DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                Preset::FG => DMatrix::from_row_slice(1, 2, &[1.0 + beta, -beta]),
                _ => {
                    let gamma = params["gamma"];
                    DMatrix::from_row_slice(1, 2, &[1.0 + gamma, -gamma])
                }
            };
            (a, b, c)
        }
    };

    let n = a.nrows();
    let alg = AlgorithmRealization {
        a,
        b,
        c,
        fixed_direction: DVector::from_element(n, 1.0),
        params: params.clone(),
        label: preset.to_string(),
        preset: Some(preset),
    };
    alg.validate()?;
    Ok(alg)
}

pub fn params_from(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Tunings that minimize the worst-case rate over quadratics in the class.
pub fn tune_quadratic_optimal(preset: Preset, fc: &FunctionClass) -> Result<Params> {
    fc.validate()?;
    let (m, l, kappa) = (fc.m, fc.l, fc.kappa());
    match preset {
        Preset::GD => Ok(params_from(&[("alpha", 2.0 / (l + m))])),
        Preset::HB => {
            let sk = kappa.sqrt();
            let alpha = 4.0 / (l.sqrt() + m.sqrt()).powi(2);
            let beta = ((sk - 1.0) / (sk + 1.0)).powi(2);
            Ok(params_from(&[("alpha", alpha), ("beta", beta)]))
        }
        Preset::FG => {
            let s = (3.0 * kappa + 1.0).sqrt();
            Ok(params_from(&[
                ("alpha", 4.0 / (3.0 * l + m)),
                ("beta", (s - 2.0) / (s + 2.0)),
            ]))
        }
        Preset::TMM => Err(Error::InvalidParameter(
            "no quadratic-optimal tuning is defined for TMM; use tune_triple_momentum".into(),
        )),
    }
}

/// Nesterov's estimating-sequences tuning of the fast gradient method.
pub fn tune_fg_estimating_sequences(fc: &FunctionClass) -> Result<Params> {
    fc.validate()?;
    let (sm, sl) = (fc.m.sqrt(), fc.l.sqrt());
    Ok(params_from(&[("alpha", 1.0 / fc.l), ("beta", (sl - sm) / (sl + sm))]))
}

/// Standard triple momentum tuning with target rate `ρ = 1 − 1/√κ`
/// (Van Scoy, Freeman and Lynch, 2017). Not derived here; the certified
/// rate of the resulting preset is checked by the acceptance suite.
pub fn tune_triple_momentum(fc: &FunctionClass) -> Result<Params> {
    fc.validate()?;
    let rho = 1.0 - 1.0 / fc.kappa().sqrt();
    let alpha = (1.0 + rho) / fc.l;
    let beta = rho * rho / (2.0 - rho);
    let gamma = rho * rho / ((1.0 + rho) * (2.0 - rho));
    let delta = rho * rho / (1.0 - rho * rho);
    Ok(params_from(&[
        ("alpha", alpha),
        ("beta", beta),
        ("gamma", gamma),
        ("delta", delta),
    ]))
}

/// Named tuning rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tuning {
    QuadraticOptimal,
    EstimatingSequences,
    TripleMomentum,
    /// Parameters given explicitly.
    Manual,
}

impl Tuning {
    pub fn name(&self) -> &'static str {
        match self {
            Tuning::QuadraticOptimal => "quadratic-optimal",
            Tuning::EstimatingSequences => "estimating-sequences",
            Tuning::TripleMomentum => "triple-momentum",
            Tuning::Manual => "manual",
        }
    }
}

impl fmt::Display for Tuning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tuning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "quadratic-optimal" | "quad-opt" => Ok(Tuning::QuadraticOptimal),
            "estimating-sequences" | "nesterov" => Ok(Tuning::EstimatingSequences),
            "triple-momentum" | "tmm" => Ok(Tuning::TripleMomentum),
            "manual" => Ok(Tuning::Manual),
            other => Err(Error::InvalidParameter(format!("unknown tuning `{other}`"))),
        }
    }
}

/// Parameters of `preset` under `tuning`; `manual` supplies them for
/// [`Tuning::Manual`].
pub fn tune(preset: Preset, tuning: Tuning, fc: &FunctionClass, manual: &Params) -> Result<Params> {
    match (tuning, preset) {
        (Tuning::QuadraticOptimal, _) => tune_quadratic_optimal(preset, fc),
        (Tuning::EstimatingSequences, Preset::FG) => tune_fg_estimating_sequences(fc),
        (Tuning::TripleMomentum, Preset::TMM) => tune_triple_momentum(fc),
        (Tuning::Manual, _) => Ok(manual.clone()),
        (t, p) => Err(Error::InvalidParameter(format!("tuning {t} does not apply to {p}"))),
    }
}

/// Closed-form rate of a tuned preset, when one is known.
pub fn analytic_rate(preset: Preset, tuning: Tuning, fc: &FunctionClass) -> Option<f64> {
    let formula = match (preset, tuning) {
        (Preset::GD, Tuning::QuadraticOptimal) => RateFormula::Gd,
        (Preset::HB, Tuning::QuadraticOptimal) => RateFormula::Hb,
        (Preset::FG, Tuning::QuadraticOptimal) => RateFormula::Fg,
        (Preset::FG, Tuning::EstimatingSequences) => RateFormula::FgStar,
        (Preset::TMM, Tuning::TripleMomentum) => RateFormula::Tmm,
        _ => return None,
    };
    quadratic_rate_formula(formula, fc).ok()
}

/// Closed-form rate expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateFormula {
    /// GD with its quadratic-optimal tuning.
    Gd,
    /// HB with its quadratic-optimal tuning.
    Hb,
    /// FG with its quadratic-optimal tuning.
    Fg,
    /// FG with the estimating-sequences tuning.
    FgStar,
    /// Triple momentum.
    Tmm,
}

pub fn quadratic_rate_formula(formula: RateFormula, fc: &FunctionClass) -> Result<f64> {
    fc.validate()?;
    let kappa = fc.kappa();
    let sk = kappa.sqrt();
    Ok(match formula {
        RateFormula::Gd => (kappa - 1.0) / (kappa + 1.0),
        RateFormula::Hb => (sk - 1.0) / (sk + 1.0),
        RateFormula::Fg => {
            let s = (3.0 * kappa + 1.0).sqrt();
            (s - 2.0) / s
        }
        RateFormula::FgStar => (1.0 - (fc.m / fc.l).sqrt()).sqrt(),
        RateFormula::Tmm => 1.0 - 1.0 / sk,
    })
}

/// Fixed point `(ξ⋆, y⋆, u⋆, f⋆)` of the closed loop; `u⋆` is identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub xi_star: DMatrix<f64>,
    pub y_star: DMatrix<f64>,
    pub u_star: DMatrix<f64>,
    pub f_star: f64,
}

/// JSON description of an algorithm:
/// `{"preset": "FG", "params": {"alpha": .., "beta": ..}}` or
/// `{"custom": {"A": [[..]], "B": [[..]], "C": [[..]]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmSpec {
    Preset { preset: Preset, params: Params },
    Custom { custom: CustomRealization },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomRealization {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    /// Fixed-point direction; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl AlgorithmSpec {
    pub fn realize(&self) -> Result<AlgorithmRealization> {
        match self {
            AlgorithmSpec::Preset { preset, params } => make_preset(*preset, params),
            AlgorithmSpec::Custom { custom } => {
                let a = matrix_from_rows(&custom.a, "A")?;
                let b = matrix_from_rows(&custom.b, "B")?;
                let c = matrix_from_rows(&custom.c, "C")?;
                let v = custom.v.as_ref().map(|v| DVector::from_column_slice(v));
                let alg = AlgorithmRealization::custom(a, b, c, v)?;
                Ok(match &custom.label {
                    Some(label) => alg.with_label(label.clone()),
                    None => alg,
                })
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!("matrix {name} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fc(m: f64, l: f64) -> FunctionClass {
        FunctionClass::new(m, l).unwrap()
    }

    #[test]
    fn function_class_rejects_bad_parameters() {
        assert!(FunctionClass::new(0.0, 1.0).is_err());
        assert!(FunctionClass::new(2.0, 1.0).is_err());
        assert!(FunctionClass::new(1.0, f64::NAN).is_err());
        assert_eq!(fc(2.0, 10.0).kappa(), 5.0);
    }

    #[test]
    fn gd_table_entry() {
        let alg = make_preset(Preset::GD, &params_from(&[("alpha", 0.1)])).unwrap();
        assert_eq!(alg.a(), &DMatrix::from_element(1, 1, 1.0));
        assert_eq!(alg.b(), &DMatrix::from_element(1, 1, -0.1));
        assert_eq!(alg.c(), &DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn fg_table_entry() {
        let alg = make_preset(Preset::FG, &params_from(&[("alpha", 0.1), ("beta", 0.5)])).unwrap();
        assert_eq!(alg.a(), &DMatrix::from_row_slice(2, 2, &[1.5, -0.5, 1.0, 0.0]));
        assert_eq!(alg.b(), &DMatrix::from_row_slice(2, 1, &[-0.1, 0.0]));
        assert_eq!(alg.c(), &DMatrix::from_row_slice(1, 2, &[1.5, -0.5]));
    }

    #[test]
    fn hb_without_momentum() {
        let alg = make_preset(Preset::HB, &params_from(&[("alpha", 0.1), ("beta", 0.0)])).unwrap();
        assert_eq!(alg.a(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]));
        assert_eq!(alg.b(), &DMatrix::from_row_slice(2, 1, &[-0.1, 0.0]));
        assert_eq!(alg.c(), &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn hb_and_fg_share_dynamics() {
        let p = params_from(&[("alpha", 0.3), ("beta", 0.7)]);
        let hb = make_preset(Preset::HB, &p).unwrap();
        let fg = make_preset(Preset::FG, &p).unwrap();
        assert_eq!(hb.a(), fg.a());
        assert_eq!(hb.b(), fg.b());
        assert_ne!(hb.c(), fg.c());
    }

    #[test]
    fn preset_errors() {
        assert!(matches!("XYZ".parse::<Preset>(), Err(Error::UnknownPreset(_))));
        assert!(matches!(
            make_preset(Preset::HB, &params_from(&[("alpha", 0.1)])),
            Err(Error::MissingParameter { .. })
        ));
        assert!(matches!(
            make_preset(Preset::GD, &params_from(&[("alpha", 0.0)])),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            make_preset(Preset::GD, &params_from(&[("alpha", -1.0)])),
            Err(Error::InvalidParameter(_))
        ));
        assert!(make_preset(Preset::TMM, &params_from(&[("alpha", 0.1), ("beta", 0.1)])).is_err());
    }

    #[test]
    fn quadratic_optimal_tunings() {
        let p = tune_quadratic_optimal(Preset::GD, &fc(1.0, 10.0)).unwrap();
        assert_abs_diff_eq!(p["alpha"], 2.0 / 11.0, epsilon = 1e-15);

        let p = tune_quadratic_optimal(Preset::HB, &fc(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p["alpha"], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p["beta"], 0.0, epsilon = 1e-15);

        let p = tune_quadratic_optimal(Preset::FG, &fc(1.0, 10.0)).unwrap();
        assert_abs_diff_eq!(p["alpha"], 4.0 / 31.0, epsilon = 1e-15);
        let s = 31f64.sqrt();
        assert_abs_diff_eq!(p["beta"], (s - 2.0) / (s + 2.0), epsilon = 1e-15);
        assert_abs_diff_eq!(p["beta"], 0.471442, epsilon = 1e-6);

        assert!(tune_quadratic_optimal(Preset::TMM, &fc(1.0, 10.0)).is_err());
    }

    #[test]
    fn estimating_sequences_tuning() {
        let p = tune_fg_estimating_sequences(&fc(1.0, 10.0)).unwrap();
        assert_abs_diff_eq!(p["alpha"], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p["beta"], 0.51949, epsilon = 1e-5);

        let p = tune_fg_estimating_sequences(&fc(1.0, 1.0)).unwrap();
        assert_eq!((p["alpha"], p["beta"]), (1.0, 0.0));

        let p = tune_fg_estimating_sequences(&fc(4.0, 16.0)).unwrap();
        assert_abs_diff_eq!(p["alpha"], 1.0 / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p["beta"], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rate_formulas() {
        let k10 = fc(1.0, 10.0);
        assert_abs_diff_eq!(
            quadratic_rate_formula(RateFormula::Gd, &k10).unwrap(),
            9.0 / 11.0,
            epsilon = 1e-15
        );
        assert_eq!(quadratic_rate_formula(RateFormula::Hb, &fc(1.0, 1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            quadratic_rate_formula(RateFormula::FgStar, &k10).unwrap(),
            0.82690,
            epsilon = 1e-5
        );
    }

    #[test]
    fn rate_formulas_are_monotone_in_kappa() {
        let formulas = [
            RateFormula::Gd,
            RateFormula::Hb,
            RateFormula::Fg,
            RateFormula::FgStar,
            RateFormula::Tmm,
        ];
        for f in formulas {
            let mut prev = -1.0;
            for i in 0..200 {
                let kappa = 1.0 + 0.37 * i as f64 * (1.0 + i as f64);
                let r = quadratic_rate_formula(f, &FunctionClass::with_kappa(kappa).unwrap()).unwrap();
                assert!((0.0..1.0).contains(&r), "{f:?} at {kappa}: {r}");
                assert!(r >= prev, "{f:?} not monotone at kappa = {kappa}");
                prev = r;
            }
        }
    }

    #[test]
    fn tuned_presets_have_consistent_fixed_points() {
        for kappa in [1.0, 1.5, 10.0, 100.0] {
            let fc = FunctionClass::with_kappa(kappa).unwrap();
            let mut algs = vec![
                make_preset(Preset::GD, &tune_quadratic_optimal(Preset::GD, &fc).unwrap()).unwrap(),
                make_preset(Preset::HB, &tune_quadratic_optimal(Preset::HB, &fc).unwrap()).unwrap(),
                make_preset(Preset::FG, &tune_quadratic_optimal(Preset::FG, &fc).unwrap()).unwrap(),
                make_preset(Preset::FG, &tune_fg_estimating_sequences(&fc).unwrap()).unwrap(),
            ];
            algs.push(make_preset(Preset::TMM, &tune_triple_momentum(&fc).unwrap()).unwrap());
            for alg in algs {
                let ones = DVector::from_element(alg.n(), 1.0);
                assert_abs_diff_eq!((alg.a() * &ones - &ones).amax(), 0.0, epsilon = 1e-15);
                assert_abs_diff_eq!((alg.c() * &ones)[0], 1.0, epsilon = 1e-15);
                assert!(alg.spectral_radius() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn tmm_parameters() {
        let p = tune_triple_momentum(&FunctionClass::with_kappa(100.0).unwrap()).unwrap();
        let rho: f64 = 0.9;
        assert_abs_diff_eq!(p["alpha"], 1.9 / 100.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p["beta"], 0.81 / 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p["gamma"], 0.81 / (1.9 * 1.1), epsilon = 1e-15);
        assert_abs_diff_eq!(p["delta"], rho * rho / (1.0 - rho * rho), epsilon = 1e-14);
    }

    #[test]
    fn custom_realization_fixed_point_checks() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[-0.1, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(AlgorithmRealization::custom(a.clone(), b.clone(), c.clone(), None).is_ok());

        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 1.0, 0.0]);
        assert!(AlgorithmRealization::custom(bad, b.clone(), c.clone(), None).is_err());

        // scaled direction: A v = v with C v = 1 for v = (2, 2) requires C = (0.5, 0)
        let c_half = DMatrix::from_row_slice(1, 2, &[0.5, 0.0]);
        let v = DVector::from_column_slice(&[2.0, 2.0]);
        assert!(AlgorithmRealization::custom(a.clone(), b.clone(), c_half, Some(v)).is_ok());

        assert!(AlgorithmRealization::custom(a, DMatrix::zeros(1, 1), c, None).is_err());
    }

    #[test]
    fn fixed_point_is_consistent() {
        let fc = FunctionClass::with_kappa(10.0).unwrap();
        let alg = make_preset(Preset::FG, &tune_quadratic_optimal(Preset::FG, &fc).unwrap()).unwrap();
        let fp = alg.fixed_point(&[1.0, -2.0, 3.0], 0.5);
        assert_eq!(fp.xi_star.shape(), (2, 3));
        assert!(fp.u_star.iter().all(|&u| u == 0.0));
        assert!((alg.a() * &fp.xi_star + alg.b() * &fp.u_star - &fp.xi_star).amax() < 1e-14);
        assert!((alg.c() * &fp.xi_star - &fp.y_star).amax() < 1e-14);
    }

    #[test]
    fn json_descriptions() {
        let spec: AlgorithmSpec =
            AlgorithmSpec::from_json(r#"{"preset": "FG", "params": {"alpha": 0.1, "beta": 0.5}}"#).unwrap();
        let alg = spec.realize().unwrap();
        assert_eq!(alg.preset(), Some(Preset::FG));
        assert_eq!(alg.spec(), spec);

        let spec = AlgorithmSpec::from_json(r#"{"custom": {"A": [[1]], "B": [[-0.2]], "C": [[1]]}}"#).unwrap();
        let alg = spec.realize().unwrap();
        assert_eq!(alg.label(), "custom");
        let again = alg.spec().realize().unwrap();
        assert_eq!(again.a(), alg.a());

        assert!(
            AlgorithmSpec::from_json(r#"{"custom": {"A": [[1, 0], [1]], "B": [[0]], "C": [[1]]}}"#)
                .unwrap()
                .realize()
                .is_err()
        );
        assert!(AlgorithmSpec::from_json(r#"{"preset": "NOPE", "params": {}}"#).is_err());
    }

    #[test]
    fn tuning_names_round_trip() {
        for t in [
            Tuning::QuadraticOptimal,
            Tuning::EstimatingSequences,
            Tuning::TripleMomentum,
            Tuning::Manual,
        ] {
            assert_eq!(t.name().parse::<Tuning>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
        }
        assert_eq!("quad_opt".parse::<Tuning>().unwrap(), Tuning::QuadraticOptimal);
        assert!("fastest".parse::<Tuning>().is_err());
    }

    #[test]
    fn tune_dispatch() {
        let fc = FunctionClass::with_kappa(10.0).unwrap();
        let manual = params_from(&[("alpha", 0.05)]);
        assert_eq!(tune(Preset::GD, Tuning::Manual, &fc, &manual).unwrap(), manual);
        assert_eq!(
            tune(Preset::FG, Tuning::EstimatingSequences, &fc, &Params::new()).unwrap(),
            tune_fg_estimating_sequences(&fc).unwrap()
        );
        assert!(tune(Preset::GD, Tuning::EstimatingSequences, &fc, &Params::new()).is_err());
        assert!(tune(Preset::HB, Tuning::TripleMomentum, &fc, &Params::new()).is_err());
        assert!(tune(Preset::TMM, Tuning::QuadraticOptimal, &fc, &Params::new()).is_err());
    }

    #[test]
    fn analytic_rates() {
        let fc = FunctionClass::with_kappa(100.0).unwrap();
        assert_abs_diff_eq!(
            analytic_rate(Preset::GD, Tuning::QuadraticOptimal, &fc).unwrap(),
            99.0 / 101.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            analytic_rate(Preset::TMM, Tuning::TripleMomentum, &fc).unwrap(),
            0.9,
            epsilon = 1e-15
        );
        assert!(analytic_rate(Preset::GD, Tuning::Manual, &fc).is_none());
    }
}
