//! Error type shared by all modules.

use thiserror::Error;

/// Failures raised by the numerical routines and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("radius {rho} outside tabulated range [0, {max}]")]
    OutOfRange { rho: f64, max: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("imaginary residue {ratio:.3e} relative to real part exceeds 1e-8")]
    ImaginaryResidue { ratio: f64 },

    #[error("density minimum {min:.3e} below -1e-8; grid too coarse")]
    NegativeDensity { min: f64 },

    #[error("tail mass {mass:.3e} beyond the domain exceeds the limit {limit:.3e}")]
    TailMass { mass: f64, limit: f64 },

    #[error("marginal likelihood {value:.3e} at the conditioning point is effectively zero")]
    ZeroMarginal { value: f64 },

    #[error("support mismatch: p carries mass where q vanishes")]
    SupportMismatch,

    #[error("no normalization constant in [1e-3, 1e3] matches the target (needed {kappa:.3e})")]
    CalibrationFailure { kappa: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("potential integral does not stabilize (increment ratio {ratio:.3})")]
    DivergentPotential { ratio: f64 },

    #[error("ambiguous growth of the criterion integrals (r2 {r2:.4})")]
    AmbiguousGrowth { r2: f64 },

    #[error("numerical verdict {numeric} disagrees with the analytic rule {analytic}")]
    ClassificationMismatch { numeric: String, analytic: String },

    #[error("potential requested at the origin for a finite case")]
    ZeroPoint,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("absolute continuity violated at atom {0}")]
    AbsoluteContinuity(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
