use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid function class: {0}")]
    InvalidClass(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("missing parameter `{param}` for preset {preset}")]
    MissingParameter { preset: String, param: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid realization: {0}")]
    InvalidRealization(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("multiplier entry ({i}, {j}) is negative: {value}")]
    NegativeMultiplier { i: usize, j: usize, value: f64 },

    #[error("system is unstable: spectral radius {radius} >= 1{}", at.map(|q| format!(" at curvature q = {q}")).unwrap_or_default())]
    Unstable { radius: f64, at: Option<f64> },

    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("no feasible certificate: {0}")]
    Infeasible(String),

    #[error("certificate does not match the problem: {0}")]
    CertificateMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
