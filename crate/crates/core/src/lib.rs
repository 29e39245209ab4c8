//! Separatrix crossing in perturbed one-degree-of-freedom Hamiltonian systems:
//! coefficients of the near-separatrix expansions, asymptotic jump formulas for
//! slow variables, slow time and adiabatic invariants, and the direct numerical
//! experiments that check them.

pub mod averaging;
pub mod coeffs;
pub mod exprdsl;
pub mod jump;
pub mod model;
pub mod numeric;
pub mod ode;
pub mod portrait;
pub mod simulate;

use thiserror::Error as ThisError;

#[derive(Debug, Clone, ThisError)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] exprdsl::ExprError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("outside the phase-space box: {0}")]
    BoxExit(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("Newton iteration did not converge: {0}")]
    NewtonFailed(String),
    #[error("critical point at ({p}, {q}) is not a saddle")]
    NotASaddle { p: f64, q: f64 },
    #[error("separatrix topology: {0}")]
    Topology(String),
    #[error("point lies on the separatrix (E = {0:e})")]
    OnSeparatrix(f64),
    #[error("root solve failed: {0}")]
    RootSolve(String),
    #[error("orbit did not return to its section: {0}")]
    NoReturn(String),
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("averaged solution: {0}")]
    Averaging(String),
    #[error("pseudo-phase outside the validity window: {0}")]
    InvalidPseudoPhase(String),
    #[error("gamma function argument must be positive, got {0}")]
    GammaDomain(f64),
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("measurement suspect: {0}")]
    MeasurementSuspect(String),
    #[error("trajectory was not captured: {0}")]
    NotCaptured(String),
    #[error("section conventions differ: {0}")]
    SectionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
