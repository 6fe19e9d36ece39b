//! Worst-case convergence rate and gradient-noise sensitivity certificates
//! for first-order optimization algorithms on smooth strongly convex
//! functions.
//!
//! An algorithm is modelled as a linear time-invariant system in feedback
//! with the gradient. Lifting the state with a short history of outputs,
//! gradients and function values, and combining the pairwise interpolation
//! inequalities of the function class, reduces certification to small
//! linear matrix inequalities that are solved by the in-process
//! semidefinite programming backends in [`sdp`].
//!
//! The quadratic subclass admits an exact eigenvalue analysis
//! ([`quadoracle`]) and the dynamics can be simulated directly ([`sim`]);
//! both serve as independent checks on the certified bounds.

pub mod algomodel;
pub mod certify;
pub mod error;
pub mod interp;
pub mod lifting;
mod linalg;
pub mod lmi;
pub mod quadoracle;
pub mod sdp;
pub mod sim;
pub mod sweep;

pub use algomodel::{
    make_preset, AlgorithmRealization, AlgorithmSpec, FixedPoint, FunctionClass, Params, Preset, Tuning,
};
pub use certify::{
    certify_rate, certify_sensitivity, replay_certificate, Certificate, RateCertificate, RateOptions, RateOutcome,
    SensitivityCertificate, SensitivityOptions, SensitivityOutcome,
};
pub use error::{Error, Result};
pub use lifting::{build_lifted, LiftedSystem};
pub use sdp::{BackendKind, SolveStatus, SolverSettings};

/// Version string embedded in serialized certificates.
pub const TOOL_VERSION: &str = concat!("lyapcert ", env!("CARGO_PKG_VERSION"));
