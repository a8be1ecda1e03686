//! Dirichlet forms, Kullback–Leibler Bayes-risk differences and recurrence
//! checks for location families driven by symmetric Lévy laws.
//!
//! The numeric core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for everyday use. Densities live on a
//! periodic grid ([`spectral_core::GridSpec`]) and all operators act
//! through FFT multipliers.
//!
//! Module map:
//! - [`levy_model`]: exponents `ψ`, characteristic functions, model specs.
//! - [`spectral_core`]: grids, fields and the FFT plan.
//! - [`density`]: transition densities, priors, marginals and predictives.
//! - [`dirichlet`]: Dirichlet forms and calibration of the constant `κ`.
//! - [`risk`]: KL risks, Bayes-risk differences and their identity with the form.
//! - [`variational`]: Donsker–Varadhan bounds, rate-function probes, chain rule.
//! - [`blyth`]: killed resolvents, Blyth prior sequences, transient lower bounds.
//! - [`classify`]: recurrence verdicts and potential densities.
//! - [`paths`]: samplers and return statistics.
//! - [`cli`]: the experiment driver behind the `levy-dirichlet` binary.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blyth;
pub mod classify;
pub mod cli;
pub mod density;
pub mod dirichlet;
pub mod error;
pub mod levy_model;
pub mod paths;
pub mod quad;
pub mod risk;
pub mod scalar;
pub mod spectral_core;
pub mod variational;

pub use error::{Error, Result};
pub use scalar::Real;

/// Grid over `f64`.
pub type Grid = spectral_core::GridSpec<f64>;
/// Field over `f64`.
pub type GridField = spectral_core::Field<f64>;
/// Lévy exponent over `f64`.
pub type Exponent = levy_model::LevyExponent<f64>;
/// Location model over `f64`.
pub type Model = levy_model::ModelSpec<f64>;
/// Prior over `f64`.
pub type Prior = density::PriorSpec<f64>;

/// Grid over `f32`.
pub type Grid32 = spectral_core::GridSpec<f32>;
/// Field over `f32`.
pub type GridField32 = spectral_core::Field<f32>;
/// Lévy exponent over `f32`.
pub type Exponent32 = levy_model::LevyExponent<f32>;
/// Location model over `f32`.
pub type Model32 = levy_model::ModelSpec<f32>;
/// Prior over `f32`.
pub type Prior32 = density::PriorSpec<f32>;
