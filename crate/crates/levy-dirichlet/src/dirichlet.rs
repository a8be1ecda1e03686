//! Dirichlet forms in the Fourier domain, the Gaussian bridge and the
//! normalization constant κ.
//!
//! `E(f,f) = ∫|f̂(z)|²ψ(z)dz` is evaluated as `Σ|f̂_k|²ψ(z_k)Δz^d`. The
//! Bayes-risk identity holds only up to a convention-dependent constant,
//! which is calibrated once on the Gaussian/Gaussian case where the risk
//! difference has a closed form, then frozen.

use crate::density::{marginal, PriorSpec};
use crate::error::{Error, Result};
use crate::levy_model::{ExponentKind, LevyExponent, ModelSpec};
use crate::quad;
use crate::scalar::{lit, pairwise_sum, to_f64, Real};
use crate::spectral_core::{Field, GridSpec, SpectralPlan};
use serde::{Deserialize, Serialize};

/// Treatment of the zero-frequency bin of a generator symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroMode {
    /// `ψ(0) = 0`: the torus generator, which annihilates constants.
    Periodic,
    /// The zero bin carries `1/⟨1/(κψ)⟩_cell`, the harmonic mean of the
    /// continuum symbol over the zero cell, whenever that average is finite.
    /// The torus then inherits the continuum potential at low frequency;
    /// recurrent exponents keep `0`.
    ContinuumCell,
}

/// Spectral symbol `time_scale·ψ` in FFT order with the zero bin chosen by
/// `mode`.
pub fn generator_symbol<T: Real>(
    exponent: &LevyExponent<T>,
    time_scale: T,
    grid: &GridSpec<T>,
    mode: ZeroMode,
) -> Result<Vec<T>> {
    check_dims(exponent, grid)?;
    let mut sym: Vec<T> = (0..grid.len())
        .map(|k| Ok(time_scale * exponent.psi_radial(grid.frequency_norm(k))?))
        .collect::<Result<_>>()?;
    if mode == ZeroMode::ContinuumCell {
        if let Some(avg) = zero_cell_average(exponent, grid, |p| 1.0 / p)? {
            sym[0] = lit::<T>(1.0 / avg) * time_scale;
        }
    }
    Ok(sym)
}

fn check_dims<T: Real>(exponent: &LevyExponent<T>, grid: &GridSpec<T>) -> Result<()> {
    if exponent.d != grid.d {
        Err(Error::GridMismatch)
    } else {
        Ok(())
    }
}

/// True when `1/ψ` is integrable at the origin, i.e. `d` exceeds the
/// index of the exponent at zero.
pub fn inverse_integrable<T: Real>(exponent: &LevyExponent<T>) -> bool {
    (exponent.d as f64) > to_f64(exponent.index()) + 1e-12
}

/// Average of `h(ψ(z))` over the zero cell `[−Δz/2, Δz/2]^d`, or `None`
/// when `h` is `1/ψ`-like and the exponent is not integrable at the origin.
///
/// The cube is split into `2d` pyramids with apex at the origin; each
/// pyramid is integrated radially from the apex, which absorbs the
/// singularity of `h` at `z = 0`.
pub fn zero_cell_average<T: Real>(
    exponent: &LevyExponent<T>,
    grid: &GridSpec<T>,
    h: impl Fn(f64) -> f64 + Copy,
) -> Result<Option<f64>> {
    let singular = !h(1e-300).is_finite() || h(1e-300) > 1e200;
    if singular && !inverse_integrable(exponent) {
        return Ok(None);
    }
    let d = exponent.d;
    let r0 = to_f64(grid.dz()) / 2.0;
    let psi = |rho: f64| to_f64(exponent.psi_radial(lit(rho)).unwrap_or_else(|_| T::infinity()));
    // Integral over s ∈ (0,1] of s^{d−1} h(ψ(s|p|)) with s = e^{−u}.
    let ray = |pn: f64| {
        quad::integrate_to_infinity(
            |u| {
                let s = (-u).exp();
                let v = (-(d as f64) * u).exp() * h(psi(s * pn));
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1e-14,
            1e-10,
        )
    };
    let face = match d {
        1 => ray(r0),
        2 => quad::integrate(|a| ray((r0 * r0 + a * a).sqrt()), 0.0, r0, 1e-14, 1e-9),
        _ => quad::integrate(
            |a| quad::integrate(|b| ray((r0 * r0 + a * a + b * b).sqrt()), 0.0, r0, 1e-14, 1e-8),
            0.0,
            r0,
            1e-14,
            1e-8,
        ),
    };
    let faces = (2 * d) as f64 * 2f64.powi(d as i32 - 1);
    let total = faces * r0 * face;
    Ok(Some(total / (2.0 * r0).powi(d as i32)))
}

/// `time_scale·Σ|f̂(z_k)|²ψ(z_k)Δz^d` with the torus convention `ψ(0) = 0`.
pub fn dirichlet_form<T: Real>(f: &Field<T>, exponent: &LevyExponent<T>, time_scale: T) -> Result<T> {
    let sym = generator_symbol(exponent, time_scale, &f.grid, ZeroMode::Periodic)?;
    dirichlet_form_with_symbol(f, &sym)
}

/// `Σ|f̂(z_k)|² m_k Δz^d` for a precomputed symbol `m`.
pub fn dirichlet_form_with_symbol<T: Real>(f: &Field<T>, symbol: &[T]) -> Result<T> {
    if symbol.len() != f.values.len() {
        return Err(Error::GridMismatch);
    }
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field passed to the Dirichlet form".into()));
    }
    let plan = SpectralPlan::new(f.grid);
    let power = plan.power(&f.values);
    let terms: Vec<T> = power.iter().zip(symbol).map(|(&p, &m)| p * m).collect();
    Ok(pairwise_sum(&terms) * f.grid.dual_cell())
}

/// `scale·∫‖∇f‖²dx` by spectral differentiation.
pub fn dirichlet_form_gradient<T: Real>(f: &Field<T>, scale: T) -> Result<T> {
    let sym: Vec<T> = (0..f.grid.len())
        .map(|k| {
            let r = f.grid.frequency_norm(k);
            scale * r * r
        })
        .collect();
    dirichlet_form_with_symbol(f, &sym)
}

/// Closed-form Gaussian Bayes-risk difference between the uniform-prior and
/// the `N(0, τ²I)`-prior predictive densities for the `N(θ, vI)` model:
/// `2∫_{v/2}^{v} d/(4(v′+τ²)) dv′ = (d/2)·ln((v+τ²)/(v/2+τ²))`.
pub fn bgx_bridge<T: Real>(v: T, tau2: T, d: usize) -> T {
    let half = lit::<T>(0.5);
    lit::<T>(d as f64) * half * ((v + tau2) / (half * v + tau2)).ln()
}

/// Result of [`calibrate_normalization`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration<T> {
    pub kappa: T,
    pub target: T,
    pub form: T,
    pub v: T,
    pub tau2: T,
}

/// Finds κ with `κ·E(√M^π, √M^π) = bgx_bridge(v, τ², 1)` for the `d=1`
/// Gaussian model of variance `v` and the `N(0, τ²)` prior on `grid`.
pub fn calibrate_normalization<T: Real>(v: T, tau2: T, grid: &GridSpec<T>) -> Result<Calibration<T>> {
    if grid.d != 1 {
        return Err(Error::InvalidParameter("calibration runs on a one-dimensional grid".into()));
    }
    let exponent = LevyExponent::gaussian(1, v)?;
    let model = ModelSpec::centered(exponent.clone());
    let m = marginal(&model, &PriorSpec::gaussian(1, tau2), grid)?;
    let root = m.map(|x| x.max(T::zero()).sqrt());
    let form = dirichlet_form(&root, &exponent, T::one())?;
    let target = bgx_bridge(v, tau2, 1);
    let kappa = target / form;
    let k = to_f64(kappa);
    if !(1e-3..=1e3).contains(&k) || !k.is_finite() {
        return Err(Error::CalibrationFailure { kappa: k });
    }
    if to_f64(((kappa * form - target) / target).abs()) > 1e-3 {
        return Err(Error::CalibrationFailure { kappa: k });
    }
    Ok(Calibration { kappa, target, form, v, tau2 })
}

/// κ from the reference configuration `v = τ² = 1` on the default grid.
pub fn reference_kappa<T: Real>() -> Result<T> {
    let grid = GridSpec::default_for(1, true)?;
    Ok(calibrate_normalization(T::one(), T::one(), &grid)?.kappa)
}

/// Forms of `f_n` and `f_{2n}` and whether they agree within 5%: the
/// operational test for membership in the form domain.
pub fn refinement_stable<T: Real>(
    build: impl Fn(&GridSpec<T>) -> Result<Field<T>>,
    exponent: &LevyExponent<T>,
    grid: &GridSpec<T>,
) -> Result<(T, T, bool)> {
    let e1 = dirichlet_form(&build(grid)?, exponent, T::one())?;
    let e2 = dirichlet_form(&build(&grid.refined())?, exponent, T::one())?;
    let stable = e1.is_finite() && e2.is_finite() && to_f64(((e2 - e1) / e1.max(T::min_positive_value())).abs()) < 0.05;
    Ok((e1, e2, stable))
}

/// Whether the exponent kind admits the Gaussian gradient identity.
pub fn is_gaussian<T: Real>(exponent: &LevyExponent<T>) -> bool {
    matches!(exponent.kind, ExponentKind::Gaussian)
}
