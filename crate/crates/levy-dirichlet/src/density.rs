//! Transition densities, priors, marginals and predictive densities.
//!
//! Grid computations treat the domain as a torus: convolution with the
//! time-`t` law is multiplication of the spectrum by `exp(−tψ)`. Closed
//! forms are used where they exist (Gaussian and Cauchy laws, conjugate
//! Gaussian and Cauchy priors); everything else goes through spectral
//! inversion with a negativity guard.

use crate::error::{Error, Result};
use crate::levy_model::{ExponentKind, LevyExponent, ModelSpec, PREDICTIVE_TIME};
use crate::quad;
use crate::scalar::{lit, to_f64, Real};
use crate::spectral_core::{check_grid, radial_symbol, Field, GridSpec, SpectralPlan};
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftDirection;
use std::f64::consts::PI;

/// Default upper bound on the probability mass a density may place outside
/// the computational box before a configuration is refused.
pub const TAIL_MASS_LIMIT: f64 = 0.15;

/// Clip threshold separating harmless ringing from grid failure.
pub const NEGATIVITY_THRESHOLD: f64 = 1e-8;

/// Marginal likelihood below which a posterior is refused.
pub const ZERO_MARGINAL: f64 = 1e-300;

/// A proper prior on the location parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec<T> {
    /// Isotropic Gaussian with variance `tau2` per axis.
    Gaussian { mean: Vec<T>, tau2: T },
    /// Isotropic multivariate Cauchy with scale `gamma`.
    Cauchy { mean: Vec<T>, gamma: T },
    /// Tabulated density on a grid.
    Grid(Field<T>),
}

impl<T: Real> PriorSpec<T> {
    /// Centered Gaussian prior.
    pub fn gaussian(d: usize, tau2: T) -> Self {
        Self::Gaussian { mean: vec![T::zero(); d], tau2 }
    }

    /// Centered Cauchy prior.
    pub fn cauchy(d: usize, gamma: T) -> Self {
        Self::Cauchy { mean: vec![T::zero(); d], gamma }
    }

    /// Grid prior; requires nonnegative values integrating to 1 within 1e−3.
    pub fn grid(field: Field<T>) -> Result<Self> {
        if field.values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidParameter("grid prior must be finite and nonnegative".into()));
        }
        let mass = to_f64(field.integral());
        if (mass - 1.0).abs() > 1e-3 {
            return Err(Error::InvalidParameter(format!("grid prior integrates to {mass}, not 1")));
        }
        Ok(Self::Grid(field))
    }

    /// Gaussian bump with variance `tau2` tabulated on `grid`.
    pub fn gaussian_grid(grid: GridSpec<T>, tau2: T) -> Result<Self> {
        Self::grid(gaussian_field(grid, &vec![T::zero(); grid.d], tau2).normalized()?)
    }

    /// The prior density sampled on `grid` and renormalized.
    pub fn to_field(&self, grid: &GridSpec<T>) -> Result<Field<T>> {
        match self {
            Self::Gaussian { mean, tau2 } => {
                positive(*tau2, "tau2")?;
                gaussian_field(*grid, mean, *tau2).normalized()
            }
            Self::Cauchy { mean, gamma } => {
                positive(*gamma, "gamma")?;
                cauchy_field(*grid, mean, *gamma).normalized()
            }
            Self::Grid(f) => {
                check_grid(&f.grid, grid)?;
                Ok(f.clone())
            }
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            Self::Gaussian { tau2, .. } => format!("gaussian(tau2={tau2})"),
            Self::Cauchy { gamma, .. } => format!("cauchy(gamma={gamma})"),
            Self::Grid(f) => format!("grid({})", f.grid.hash()),
        }
    }
}

fn positive<T: Real>(v: T, name: &str) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive")))
    }
}

fn dist2<T: Real>(x: &[T], m: &[T]) -> T {
    x.iter().zip(m).fold(T::zero(), |a, (&u, &v)| a + (u - v) * (u - v))
}

/// Isotropic normal density with variance `var` per axis.
pub fn gaussian_pdf<T: Real>(y: &[T], mean: &[T], var: T) -> T {
    let d = y.len() as f64;
    let norm = (T::TAU() * var).powf(lit(-d / 2.0));
    norm * (-dist2(y, mean) / (var + var)).exp()
}

/// Isotropic multivariate Cauchy density with scale `s`.
pub fn cauchy_pdf<T: Real>(y: &[T], mean: &[T], s: T) -> T {
    let d = y.len() as f64;
    let k = libm::tgamma((d + 1.0) / 2.0) / PI.powf((d + 1.0) / 2.0);
    lit::<T>(k) * s / (dist2(y, mean) + s * s).powf(lit((d + 1.0) / 2.0))
}

fn gaussian_field<T: Real>(grid: GridSpec<T>, mean: &[T], var: T) -> Field<T> {
    Field::from_fn(grid, |y| gaussian_pdf(y, mean, var))
}

fn cauchy_field<T: Real>(grid: GridSpec<T>, mean: &[T], s: T) -> Field<T> {
    Field::from_fn(grid, |y| cauchy_pdf(y, mean, s))
}

/// Probability that the time-`t` law (started at the origin) leaves the box
/// `[−L, L)^d`, by a union bound over axes. Stable laws other than Cauchy
/// use the leading tail asymptotic; tabulated exponents report zero.
pub fn tail_mass<T: Real>(exponent: &LevyExponent<T>, t: f64, l: f64) -> f64 {
    let d = exponent.d as f64;
    let s = t * to_f64(exponent.c);
    let per_axis = match &exponent.kind {
        ExponentKind::Gaussian => libm::erfc(l / (2.0 * s).sqrt()),
        ExponentKind::IsotropicStable { alpha } => {
            let a = to_f64(*alpha);
            if a == 1.0 {
                1.0 - 2.0 / PI * (l / s).atan()
            } else if a == 2.0 {
                libm::erfc(l / (2.0 * s.sqrt()))
            } else {
                2.0 * libm::tgamma(a) * (PI * a / 2.0).sin() / PI * s / l.powf(a)
            }
        }
        ExponentKind::TabulatedRadial(_) => 0.0,
    };
    (d * per_axis).min(1.0)
}

/// Fails with `TailMass` when the time-`t` law leaves the grid box with
/// probability above `limit`.
pub fn check_tail_mass<T: Real>(exponent: &LevyExponent<T>, t: f64, grid: &GridSpec<T>, limit: f64) -> Result<f64> {
    let mass = tail_mass(exponent, t, to_f64(grid.l));
    if mass > limit {
        Err(Error::TailMass { mass, limit })
    } else {
        Ok(mass)
    }
}

/// Spectral symbol `exp(−tψ)` in FFT order.
pub fn heat_symbol<T: Real>(exponent: &LevyExponent<T>, t: T, grid: &GridSpec<T>) -> Result<Vec<T>> {
    radial_symbol(grid, |r| Ok((-t * exponent.psi_radial(r)?).exp()))
}

/// Symbol `ψ` in FFT order.
pub fn psi_symbol<T: Real>(exponent: &LevyExponent<T>, grid: &GridSpec<T>) -> Result<Vec<T>> {
    radial_symbol(grid, |r| exponent.psi_radial(r))
}

/// Clips ringing above `−1e−8`, rejects deeper negativity, renormalizes.
pub fn clip_and_normalize<T: Real>(mut f: Field<T>) -> Result<Field<T>> {
    let min = f.min();
    if to_f64(min) < -NEGATIVITY_THRESHOLD {
        return Err(Error::NegativeDensity { min: to_f64(min) });
    }
    for v in &mut f.values {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    f.normalized()
}

/// Periodized density of the time-`t` law located at `x`, by spectral
/// inversion of the characteristic function (no clipping).
pub fn torus_density<T: Real>(exponent: &LevyExponent<T>, t: T, x: &[T], grid: &GridSpec<T>) -> Result<Field<T>> {
    if exponent.d != grid.d || x.len() != grid.d {
        return Err(Error::GridMismatch);
    }
    let plan = SpectralPlan::new(*grid);
    let mut buf: Vec<Complex<T>> = (0..grid.len())
        .map(|k| {
            let z = grid.frequency(k);
            let psi = exponent.psi_radial(z.iter().fold(T::zero(), |a, &v| a + v * v).sqrt())?;
            let phase = z.iter().zip(x).fold(T::zero(), |a, (&zz, &xx)| a + zz * xx);
            let idx = grid.unflatten(k);
            let odd = idx.iter().take(grid.d).sum::<usize>() % 2 == 1;
            let c = Complex::from_polar((-t * psi).exp(), phase);
            Ok(if odd { -c } else { c })
        })
        .collect::<Result<_>>()?;
    plan.transform(&mut buf, FftDirection::Forward);
    let scale = grid.dual_cell() / T::TAU().powi(grid.d as i32);
    Field::new(*grid, buf.iter().map(|c| c.re * scale).collect())
}

/// Density of `X_t` given `X_0 = θ` on the grid.
///
/// Gaussian and Cauchy laws use their closed forms; other exponents are
/// inverted spectrally and fail with `NegativeDensity` when the grid cannot
/// resolve them.
pub fn transition_density<T: Real>(model: &ModelSpec<T>, t: T, grid: &GridSpec<T>) -> Result<Field<T>> {
    positive(t, "time")?;
    if model.d() != grid.d {
        return Err(Error::GridMismatch);
    }
    let e = &model.exponent;
    let raw = match &e.kind {
        ExponentKind::Gaussian => gaussian_field(*grid, &model.theta, t * e.c),
        ExponentKind::IsotropicStable { alpha } if *alpha == T::one() => cauchy_field(*grid, &model.theta, t * e.c),
        _ => torus_density(e, t, &model.theta, grid)?,
    };
    clip_and_normalize(raw)
}

/// Uniform-prior predictive density: the time-2 law located at `x`.
pub fn predictive_uniform<T: Real>(model: &ModelSpec<T>, x: &[T], grid: &GridSpec<T>) -> Result<Field<T>> {
    transition_density(&model.at(x)?, lit(PREDICTIVE_TIME), grid)
}

/// Marginal density `M^π(x) = ∫p(x|θ)π(θ)dθ`.
pub fn marginal<T: Real>(model: &ModelSpec<T>, prior: &PriorSpec<T>, grid: &GridSpec<T>) -> Result<Field<T>> {
    let e = &model.exponent;
    check_tail_mass(e, 1.0, grid, TAIL_MASS_LIMIT)?;
    match (&e.kind, prior) {
        (ExponentKind::Gaussian, PriorSpec::Gaussian { mean, tau2 }) => {
            gaussian_field(*grid, mean, e.c + *tau2).normalized()
        }
        (ExponentKind::IsotropicStable { alpha }, PriorSpec::Cauchy { mean, gamma }) if *alpha == T::one() => {
            cauchy_field(*grid, mean, e.c + *gamma).normalized()
        }
        _ => marginal_on_torus(e, prior, grid),
    }
}

/// Marginal by grid convolution of the prior with the time-1 law.
pub fn marginal_on_torus<T: Real>(exponent: &LevyExponent<T>, prior: &PriorSpec<T>, grid: &GridSpec<T>) -> Result<Field<T>> {
    let pi = prior.to_field(grid)?;
    let m = heat_symbol(exponent, T::one(), grid)?;
    let plan = SpectralPlan::new(*grid);
    clip_and_normalize(Field::new(*grid, plan.apply_multiplier(&pi.values, &m))?)
}

/// Posterior predictive density `p̂^π(·|x)`.
pub fn posterior_predictive<T: Real>(
    model: &ModelSpec<T>,
    prior: &PriorSpec<T>,
    x: &[T],
    grid: &GridSpec<T>,
) -> Result<Field<T>> {
    let e = &model.exponent;
    if let (ExponentKind::Gaussian, PriorSpec::Gaussian { mean, tau2 }) = (&e.kind, prior) {
        let v = e.c;
        let post_var = v * *tau2 / (v + *tau2);
        let post_mean: Vec<T> = x.iter().zip(mean).map(|(&xi, &mi)| (*tau2 * xi + v * mi) / (v + *tau2)).collect();
        return gaussian_field(*grid, &post_mean, v + post_var).normalized();
    }
    let pi = prior.to_field(grid)?;
    let lik = match &e.kind {
        ExponentKind::Gaussian => gaussian_field(*grid, x, e.c),
        ExponentKind::IsotropicStable { alpha } if *alpha == T::one() => cauchy_field(*grid, x, e.c),
        _ => torus_density(e, T::one(), x, grid)?,
    };
    let w: Vec<T> = lik.values.iter().zip(&pi.values).map(|(&a, &b)| a.max(T::zero()) * b).collect();
    let mx = Field::new(*grid, w.clone())?.integral();
    if to_f64(mx) < ZERO_MARGINAL {
        return Err(Error::ZeroMarginal { value: to_f64(mx) });
    }
    let w: Vec<T> = w.iter().map(|&v| v / mx).collect();
    let m = heat_symbol(e, T::one(), grid)?;
    let plan = SpectralPlan::new(*grid);
    clip_and_normalize(Field::new(*grid, plan.apply_multiplier(&w, &m))?)
}

/// Time-1 and time-2 torus kernels plus the grid prior, shared by the
/// quadrature loops over conditioning points.
pub struct TorusModel<T: Real> {
    pub grid: GridSpec<T>,
    pub plan: SpectralPlan<T>,
    pub heat1: Vec<T>,
    pub prior: Vec<T>,
    pub marginal: Vec<T>,
    /// Time-1 kernel indexed by offset (FFT order): `k1[m] = p_1(m·Δx)`.
    pub k1: Vec<T>,
    /// Time-2 kernel indexed by offset.
    pub k2: Vec<T>,
}

fn offset_kernel<T: Real>(plan: &SpectralPlan<T>, symbol: &[T]) -> Vec<T> {
    let grid = plan.grid();
    let mut buf: Vec<Complex<T>> = symbol.iter().map(|&s| Complex::new(s, T::zero())).collect();
    plan.transform(&mut buf, FftDirection::Forward);
    let scale = grid.dual_cell() / T::TAU().powi(grid.d as i32);
    buf.iter().map(|c| (c.re * scale).max(T::zero())).collect()
}

fn closed_offsets<T: Real>(grid: &GridSpec<T>, pdf: impl Fn(&[T]) -> T) -> Vec<T> {
    let dx = grid.dx();
    let raw: Vec<T> = (0..grid.len())
        .map(|k| {
            let idx = grid.unflatten(k);
            let y: Vec<T> = (0..grid.d).map(|a| lit::<T>(grid.wrapped(idx[a]) as f64) * dx).collect();
            pdf(&y)
        })
        .collect();
    let total = crate::scalar::pairwise_sum(&raw) * grid.cell();
    raw.iter().map(|&v| v / total).collect()
}

impl<T: Real> TorusModel<T> {
    /// Prepares kernels for `exponent` and `prior` on `grid`.
    pub fn new(exponent: &LevyExponent<T>, prior: &PriorSpec<T>, grid: &GridSpec<T>) -> Result<Self> {
        let plan = SpectralPlan::new(*grid);
        let heat1 = heat_symbol(exponent, T::one(), grid)?;
        let heat2 = heat_symbol(exponent, lit(PREDICTIVE_TIME), grid)?;
        let k1 = offset_kernel(&plan, &heat1);
        // Closed-form laws keep their true tails; the spectral kernel is
        // clipped at the FFT noise floor.
        let k2 = match &exponent.kind {
            ExponentKind::Gaussian => closed_offsets(grid, |y| gaussian_pdf(y, &vec![T::zero(); grid.d], lit::<T>(PREDICTIVE_TIME) * exponent.c)),
            ExponentKind::IsotropicStable { alpha } if *alpha == T::one() => {
                closed_offsets(grid, |y| cauchy_pdf(y, &vec![T::zero(); grid.d], lit::<T>(PREDICTIVE_TIME) * exponent.c))
            }
            _ => offset_kernel(&plan, &heat2),
        };
        let prior = prior.to_field(grid)?.values;
        let marginal = clip_and_normalize(Field::new(*grid, plan.apply_multiplier(&prior, &heat1))?)?.values;
        Ok(Self { grid: *grid, plan, heat1, prior, marginal, k1, k2 })
    }

    /// Offset index of `x_i − θ_j` on the torus.
    pub fn offset(&self, i: usize, j: usize) -> usize {
        let n = self.grid.n;
        let (a, b) = (self.grid.unflatten(i), self.grid.unflatten(j));
        let mut idx = [0usize; 3];
        for ax in 0..self.grid.d {
            idx[ax] = (a[ax] + n - b[ax]) % n;
        }
        self.grid.flatten(&idx[..self.grid.d])
    }

    /// Posterior predictive at grid point `i` and its marginal likelihood.
    pub fn posterior_predictive_at(&self, i: usize) -> (Vec<T>, T) {
        let cell = self.grid.cell();
        let w: Vec<T> = (0..self.grid.len()).map(|j| self.k1[self.offset(i, j)] * self.prior[j]).collect();
        let mx = crate::scalar::pairwise_sum(&w) * cell;
        if !(mx > T::zero()) {
            return (vec![T::zero(); w.len()], mx);
        }
        let w: Vec<T> = w.iter().map(|&v| v / mx).collect();
        let pp = self.plan.apply_multiplier(&w, &self.heat1);
        let pp: Vec<T> = pp.iter().map(|&v| v.max(T::zero())).collect();
        let s = crate::scalar::pairwise_sum(&pp) * cell;
        (pp.iter().map(|&v| v / s).collect(), mx)
    }

    /// Uniform-prior predictive at grid point `i`.
    pub fn uniform_predictive_at(&self, i: usize) -> Vec<T> {
        (0..self.grid.len()).map(|y| self.k2[self.offset(y, i)]).collect()
    }
}

/// Sup-norm residual of `∫p̂^π(y|x)M^π(x)dx − M^π(y)` on the torus.
pub fn stationarity_residual<T: Real>(model: &ModelSpec<T>, prior: &PriorSpec<T>, grid: &GridSpec<T>) -> Result<T> {
    let tm = TorusModel::new(&model.exponent, prior, grid)?;
    let len = grid.len();
    let cell = grid.cell();
    const CHUNK: usize = 64;
    let chunks: Vec<Vec<T>> = (0..len)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|xs| {
            let mut acc = vec![T::zero(); len];
            for &i in xs {
                let (pp, _) = tm.posterior_predictive_at(i);
                let w = tm.marginal[i] * cell;
                for (a, p) in acc.iter_mut().zip(&pp) {
                    *a = *a + *p * w;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![T::zero(); len];
    for c in &chunks {
        for (t, v) in total.iter_mut().zip(c) {
            *t = *t + *v;
        }
    }
    Ok(total.iter().zip(&tm.marginal).fold(T::zero(), |a, (&s, &m)| a.max((s - m).abs())))
}

/// Pointwise density of the time-`t` law at distance `r` from its centre.
///
/// Closed forms for Gaussian and Cauchy laws in any dimension. Other stable
/// laws in `d ∈ {1, 3}` use the inversion integral along a rotated contour;
/// tabulated exponents in `d ∈ {1, 3}` use the real-line integral. Other
/// combinations are unsupported.
pub fn density_at<T: Real>(exponent: &LevyExponent<T>, t: f64, r: f64) -> Result<f64> {
    let d = exponent.d;
    let c = to_f64(exponent.c);
    let s = t * c;
    let r = r.abs();
    match &exponent.kind {
        ExponentKind::Gaussian => {
            Ok((2.0 * PI * s).powf(-(d as f64) / 2.0) * (-r * r / (2.0 * s)).exp())
        }
        ExponentKind::IsotropicStable { alpha } => {
            let a = to_f64(*alpha);
            if a == 1.0 {
                let k = libm::tgamma((d as f64 + 1.0) / 2.0) / PI.powf((d as f64 + 1.0) / 2.0);
                return Ok(k * s / (r * r + s * s).powf((d as f64 + 1.0) / 2.0));
            }
            if a == 2.0 {
                return Ok((4.0 * PI * s).powf(-(d as f64) / 2.0) * (-r * r / (4.0 * s)).exp());
            }
            // Self-similarity: p_t(r) = σ^{−d} p_1(r/σ) with σ = s^{1/α}.
            let sigma = s.powf(1.0 / a);
            let u = r / sigma;
            let std = standard_stable_density(a, d, u)?;
            Ok(std / sigma.powi(d as i32))
        }
        ExponentKind::TabulatedRadial(_) => {
            let psi = |z: f64| to_f64(exponent.psi_radial(lit(z)).unwrap_or_else(|_| T::infinity())) * t;
            radial_inversion(psi, d, r)
        }
    }
}

/// Density of the standard isotropic stable law (`ψ = ‖z‖^α`) at radius `u`.
fn standard_stable_density(a: f64, d: usize, u: f64) -> Result<f64> {
    // ∫_0^∞ z^m e^{izu − z^α} dz along z = s·e^{iφ}, with αφ < π/2 so that
    // the exponent keeps a positive real part and e^{izu} decays.
    let phi = if a < 1.0 { PI / 2.0 * 0.98 } else { PI / (2.0 * a) * 0.8 };
    let rot = Complex::from_polar(1.0, phi);
    let ray = |m: i32| -> Complex<f64> {
        let integrand = |s: f64, part: bool| -> f64 {
            if s == 0.0 {
                return 0.0;
            }
            let z = rot * s;
            let v = z.powi(m) * rot * (Complex::new(0.0, u) * z - z.powf(a)).exp();
            if part {
                v.re
            } else {
                v.im
            }
        };
        let re = quad::integrate_to_infinity(|s| integrand(s, true), 0.0, 1e-15, 1e-11);
        let im = quad::integrate_to_infinity(|s| integrand(s, false), 0.0, 1e-15, 1e-11);
        Complex::new(re, im)
    };
    match d {
        1 => Ok(ray(0).re / PI),
        3 => {
            if u == 0.0 {
                let v = libm::tgamma(3.0 / a) / a;
                Ok(v / (2.0 * PI * PI))
            } else {
                Ok(ray(1).im / (2.0 * PI * PI * u))
            }
        }
        _ => Err(Error::Unsupported(format!("pointwise stable density in d={d}"))),
    }
}

fn radial_inversion(psi: impl Fn(f64) -> f64, d: usize, r: f64) -> Result<f64> {
    let mut zmax = 1.0;
    while psi(zmax) < 40.0 {
        zmax *= 2.0;
        if zmax > 1e8 {
            return Err(Error::NonFinite("exponent does not grow; inversion integral diverges".into()));
        }
    }
    let f = |z: f64| -> f64 {
        let damp = (-psi(z)).exp();
        match d {
            1 => (z * r).cos() * damp,
            _ => {
                if r == 0.0 {
                    z * z * damp
                } else {
                    (z * r).sin() * z * damp
                }
            }
        }
    };
    let period = if r > 0.0 { PI / r } else { zmax };
    let pieces = ((zmax / period).ceil() as usize).clamp(1, 200_000);
    let h = zmax / pieces as f64;
    let total: f64 = (0..pieces).map(|k| quad::integrate(f, k as f64 * h, (k + 1) as f64 * h, 1e-16, 1e-12)).sum();
    match d {
        1 => Ok(total / PI),
        3 => Ok(if r == 0.0 { total / (2.0 * PI * PI) } else { total / (2.0 * PI * PI * r) }),
        _ => Err(Error::Unsupported(format!("pointwise tabulated density in d={d}"))),
    }
}
