//! Collective-spin dynamics and metrology in the permutation-symmetric
//! (Dicke) basis.
//!
//! The crate simulates N two-level atoms restricted to the maximal-spin
//! subspace |j = N/2, m⟩, evolving under driven Dicke, one-axis-twisting
//! and two-axis-countertwisting Hamiltonians with optional collective
//! dissipation. On top of the dynamics it provides quantum Fisher
//! information matrices with optimal-generator extraction, a Bayesian
//! phase-estimation protocol, and the derivation of effective cavity
//! parameters for a vertical-cavity realization.
//!
//! Conventions used throughout:
//! - ħ = 1, all frequencies are angular (rad/s);
//! - the Dicke basis is ordered by ascending m, so index 0 is m = −j;
//! - states are immutable after construction and safe to share across
//!   threads.

pub mod algebra;
mod band;
pub mod bayes;
pub mod cavity;
pub mod config;
pub mod metrology;
pub mod model;
pub mod propagate;
pub mod scenario;

pub use algebra::{CollectiveOperator, DickeState, OperatorKind};
pub use bayes::{PhasePosterior, ProtocolResult};
pub use cavity::{CavityParams, LabInputs};
pub use metrology::QfimResult;
pub use model::{ModelFamily, ModelSpec};
pub use propagate::{StepControl, Trajectory};

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} ({context})")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid model or operator parameters: {0}")]
    InvalidParameter(String),

    #[error(
        "step size {dt:.3e} s exceeds the resolution bound {limit:.3e} s \
         for the fastest frequency {omega_fast:.3e} rad/s"
    )]
    StepTooLarge {
        dt: f64,
        limit: f64,
        omega_fast: f64,
    },

    #[error("numerical invariant violated at t = {t:.6e} s: {detail}")]
    InvariantViolation { t: f64, detail: String },

    #[error("posterior degenerated (all weights underflowed) after {measurements} measurements")]
    DegeneratePosterior { measurements: u64 },

    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
