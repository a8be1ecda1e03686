//! Kullback–Leibler risks of predictive densities, Bayes-risk differences
//! and the check that the difference equals a Dirichlet form.
//!
//! Quadrature runs on the torus grid for `d ≤ 2`; `d = 3` switches to Monte
//! Carlo over the observation with draws keyed by `(seed, index)`. Outer
//! sums over grid points are evaluated in parallel into a vector and reduced
//! pairwise, so results are bitwise reproducible.

use crate::density::{marginal, transition_density, PriorSpec, TorusModel};
use crate::dirichlet::dirichlet_form;
use crate::error::{Error, Result};
use crate::levy_model::{ModelSpec, PREDICTIVE_TIME};
use crate::paths::{sample_increment, stream_rng};
use crate::scalar::{lit, pairwise_sum, to_f64, Real};
use crate::spectral_core::{check_grid, Field, GridSpec, SpectralPlan};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

/// Minimum Monte Carlo sample count.
pub const MIN_SAMPLES: usize = 1000;

/// Mass below which a density value counts as outside the support.
const SUPPORT_FLOOR: f64 = 1e-12;

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

/// A risk value with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate<T> {
    pub value: T,
    /// Standard error; `0` for quadrature.
    pub std_error: T,
    pub method: Method,
    pub n_samples: usize,
    pub seed: Option<u64>,
    pub grid_hash: String,
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self { samples: 4000, seed: 0 }
    }
}

/// Quadrature for `d ≤ 2`, Monte Carlo for `d = 3`.
pub fn default_method(d: usize) -> Method {
    if d <= 2 {
        Method::Quadrature
    } else {
        Method::MonteCarlo
    }
}

/// Predictive density under evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictive<T> {
    /// Posterior predictive under the improper uniform prior.
    UniformBayes,
    /// Model density at the maximum-likelihood location `θ̂ = x`.
    PlugInMLE,
    /// Posterior predictive under a proper prior.
    ProperBayes(PriorSpec<T>),
}

fn kl_sum<T: Real>(p: &[T], q: &[T], cell: T) -> Result<T> {
    let floor = T::min_positive_value();
    let terms: Vec<T> = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            if !(a > T::zero()) {
                return Ok(T::zero());
            }
            if to_f64(b) < 1e-300 || b < floor {
                if to_f64(a) > SUPPORT_FLOOR {
                    return Err(Error::SupportMismatch);
                }
                return Ok(T::zero());
            }
            Ok(a * (a / b).ln())
        })
        .collect::<Result<_>>()?;
    Ok((pairwise_sum(&terms) * cell).max(T::zero()))
}

/// Raises spectrally computed density values to the FFT resolution floor
/// `64·ε·max q`; below it the values are rounding noise, not tails.
fn resolution_floor<T: Real>(q: &mut [T]) {
    let top = q.iter().fold(T::zero(), |a, &b| a.max(b));
    let floor = top * T::epsilon() * lit(64.0);
    q.iter_mut().for_each(|v| *v = v.max(floor));
}

/// `Δx^d·Σ p·log(p/q)` over the support of `p`.
pub fn kl_field<T: Real>(p: &Field<T>, q: &Field<T>) -> Result<T> {
    check_grid(&p.grid, &q.grid)?;
    kl_sum(&p.values, &q.values, p.grid.cell())
}

/// Reorders a grid-indexed field so that index `m` holds offset `m` from the
/// origin, in FFT order.
fn to_offsets<T: Real>(f: &Field<T>) -> Vec<T> {
    let shift = [-(f.grid.n as i64 / 2); 3];
    f.roll(&shift[..f.grid.d]).values
}

/// Table `KL(δ) = KL(p_1(·) ‖ q(· − δ))` over all grid offsets `δ` for an
/// equivariant predictive with kernel `q` (both in offset order).
fn shift_kl_table<T: Real>(grid: &GridSpec<T>, p: &[T], q: &[T]) -> Vec<T> {
    let cell = grid.cell();
    let floor = T::min_positive_value();
    let entropy_terms: Vec<T> = p.iter().map(|&a| if a > T::zero() { a * a.ln() } else { T::zero() }).collect();
    let h = pairwise_sum(&entropy_terms) * cell;
    let plan = SpectralPlan::new(*grid);
    let mut a: Vec<Complex<T>> = p.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let mut b: Vec<Complex<T>> = q.iter().map(|&v| Complex::new(v.max(floor).ln(), T::zero())).collect();
    plan.transform(&mut a, FftDirection::Forward);
    plan.transform(&mut b, FftDirection::Forward);
    let mut c: Vec<Complex<T>> = a.iter().zip(&b).map(|(x, y)| x * y.conj()).collect();
    plan.transform(&mut c, FftDirection::Inverse);
    let norm = lit::<T>(grid.len() as f64);
    c.iter().map(|v| (h - v.re / norm * cell).max(T::zero())).collect()
}

fn equivariant_kernel<T: Real>(model: &ModelSpec<T>, predictive: &Predictive<T>, grid: &GridSpec<T>) -> Result<Vec<T>> {
    let centered = ModelSpec::centered(model.exponent.clone());
    let t = match predictive {
        Predictive::UniformBayes => lit(PREDICTIVE_TIME),
        Predictive::PlugInMLE => T::one(),
        Predictive::ProperBayes(_) => unreachable!("proper priors are not equivariant"),
    };
    Ok(to_offsets(&transition_density(&centered, t, grid)?))
}

fn interpolate_offset<T: Real>(grid: &GridSpec<T>, table: &[T], delta: &[f64]) -> f64 {
    let dx = to_f64(grid.dx());
    let n = grid.n as i64;
    let d = grid.d;
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..d {
        let u = delta[a] / dx;
        base[a] = u.floor() as i64;
        frac[a] = u - u.floor();
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..d {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            idx[a] = (base[a] + bit as i64).rem_euclid(n) as usize;
        }
        acc += w * to_f64(table[grid.flatten(&idx[..d])]);
    }
    acc
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `R_KL(θ, p̂) = ∫KL(p(·|θ) ‖ p̂(·|x)) p(x|θ) dx`, by quadrature for `d ≤ 2`
/// and Monte Carlo for `d = 3`.
pub fn kl_risk<T: Real>(
    model: &ModelSpec<T>,
    theta: &[T],
    predictive: &Predictive<T>,
    grid: &GridSpec<T>,
    mc: MonteCarlo,
) -> Result<RiskEstimate<T>> {
    kl_risk_with(model, theta, predictive, grid, default_method(grid.d), mc)
}

/// [`kl_risk`] with an explicit method.
pub fn kl_risk_with<T: Real>(
    model: &ModelSpec<T>,
    theta: &[T],
    predictive: &Predictive<T>,
    grid: &GridSpec<T>,
    method: Method,
    mc: MonteCarlo,
) -> Result<RiskEstimate<T>> {
    if model.d() != grid.d || theta.len() != grid.d {
        return Err(Error::GridMismatch);
    }
    if method == Method::MonteCarlo && mc.samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("Monte Carlo needs at least {MIN_SAMPLES} samples")));
    }
    let cell = grid.cell();
    let hash = grid.hash();
    match predictive {
        Predictive::UniformBayes | Predictive::PlugInMLE => {
            // Equivariance: the risk is the average of KL(δ) over δ = x − θ.
            let p1 = to_offsets(&transition_density(&ModelSpec::centered(model.exponent.clone()), T::one(), grid)?);
            let q = equivariant_kernel(model, predictive, grid)?;
            let table = shift_kl_table(grid, &p1, &q);
            match method {
                Method::Quadrature => {
                    let terms: Vec<T> = p1.iter().zip(&table).map(|(&w, &k)| w * k).collect();
                    Ok(RiskEstimate {
                        value: pairwise_sum(&terms) * cell,
                        std_error: T::zero(),
                        method,
                        n_samples: 0,
                        seed: None,
                        grid_hash: hash,
                    })
                }
                Method::MonteCarlo => {
                    let values: Vec<f64> = (0..mc.samples)
                        .into_par_iter()
                        .map(|i| {
                            let delta = sample_increment(&model.exponent, 1.0, &mut stream_rng(mc.seed, i as u64))?;
                            Ok(interpolate_offset(grid, &table, &delta))
                        })
                        .collect::<Result<_>>()?;
                    let (m, se) = mean_and_error(&values);
                    Ok(RiskEstimate { value: lit(m), std_error: lit(se), method, n_samples: mc.samples, seed: Some(mc.seed), grid_hash: hash })
                }
            }
        }
        Predictive::ProperBayes(prior) => {
            let tm = TorusModel::new(&model.exponent, prior, grid)?;
            let target = transition_density(&model.at(theta)?, T::one(), grid)?;
            let kl_at = |i: usize| -> Result<T> {
                let (mut pp, mx) = tm.posterior_predictive_at(i);
                if to_f64(mx) < crate::density::ZERO_MARGINAL {
                    return Err(Error::ZeroMarginal { value: to_f64(mx) });
                }
                resolution_floor(&mut pp);
                kl_sum(&target.values, &pp, cell)
            };
            match method {
                Method::Quadrature => {
                    let cutoff = target.max() * lit(1e-16);
                    let terms: Vec<T> = (0..grid.len())
                        .into_par_iter()
                        .map(|i| {
                            let w = target.values[i];
                            if w <= cutoff {
                                Ok(T::zero())
                            } else {
                                Ok(w * kl_at(i)?)
                            }
                        })
                        .collect::<Result<_>>()?;
                    Ok(RiskEstimate {
                        value: pairwise_sum(&terms) * cell,
                        std_error: T::zero(),
                        method,
                        n_samples: 0,
                        seed: None,
                        grid_hash: hash,
                    })
                }
                Method::MonteCarlo => {
                    let values: Vec<f64> = (0..mc.samples)
                        .into_par_iter()
                        .map(|i| {
                            let inc = sample_increment(&model.exponent, 1.0, &mut stream_rng(mc.seed, i as u64))?;
                            let x: Vec<T> = theta.iter().zip(&inc).map(|(&t, &v)| t + lit::<T>(v)).collect();
                            Ok(to_f64(kl_at(grid.nearest(&x))?))
                        })
                        .collect::<Result<_>>()?;
                    let (m, se) = mean_and_error(&values);
                    Ok(RiskEstimate { value: lit(m), std_error: lit(se), method, n_samples: mc.samples, seed: Some(mc.seed), grid_hash: hash })
                }
            }
        }
    }
}

/// Draws `θ` from `prior`; grid priors are sampled cell-wise with uniform
/// jitter inside the cell.
fn sample_prior<T: Real, R: Rng + ?Sized>(prior: &PriorSpec<T>, grid: &GridSpec<T>, cdf: Option<&[f64]>, rng: &mut R) -> Vec<f64> {
    match prior {
        PriorSpec::Gaussian { mean, tau2 } => {
            let sd = to_f64(*tau2).sqrt();
            mean.iter()
                .map(|&m| {
                    let g: f64 = StandardNormal.sample(rng);
                    to_f64(m) + sd * g
                })
                .collect()
        }
        PriorSpec::Cauchy { mean, gamma } => {
            // Multivariate Cauchy as a Gaussian over an independent chi.
            let g = to_f64(*gamma);
            let w: f64 = StandardNormal.sample(rng);
            mean.iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(rng);
                    to_f64(m) + g * z / w.abs()
                })
                .collect()
        }
        PriorSpec::Grid(_) => {
            let cdf = cdf.expect("grid prior CDF");
            let u: f64 = rng.random();
            let k = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            let dx = to_f64(grid.dx());
            grid.point(k).iter().map(|&c| to_f64(c) + dx * (rng.random::<f64>() - 0.5)).collect()
        }
    }
}

/// Bayes-risk difference `∫KL(p̂^π(·|x) ‖ p̂^U(·|x)) M^π(x) dx`.
pub fn bayes_risk_difference<T: Real>(
    model: &ModelSpec<T>,
    prior: &PriorSpec<T>,
    grid: &GridSpec<T>,
    method: Method,
    mc: MonteCarlo,
) -> Result<RiskEstimate<T>> {
    if model.d() != grid.d {
        return Err(Error::GridMismatch);
    }
    let tm = TorusModel::new(&model.exponent, prior, grid)?;
    let cell = grid.cell();
    let kl_at = |i: usize| -> Result<T> {
        let (pp, _) = tm.posterior_predictive_at(i);
        let mut pu = tm.uniform_predictive_at(i);
        resolution_floor(&mut pu);
        kl_sum(&pp, &pu, cell)
    };
    match method {
        Method::Quadrature => {
            let cutoff = tm.marginal.iter().fold(T::zero(), |a, &b| a.max(b)) * lit(1e-16);
            let terms: Vec<T> = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let w = tm.marginal[i];
                    if w <= cutoff {
                        Ok(T::zero())
                    } else {
                        Ok(w * kl_at(i)?)
                    }
                })
                .collect::<Result<_>>()?;
            Ok(RiskEstimate {
                value: pairwise_sum(&terms) * cell,
                std_error: T::zero(),
                method,
                n_samples: 0,
                seed: None,
                grid_hash: grid.hash(),
            })
        }
        Method::MonteCarlo => {
            if mc.samples < MIN_SAMPLES {
                return Err(Error::InvalidParameter(format!("Monte Carlo needs at least {MIN_SAMPLES} samples")));
            }
            let cdf: Option<Vec<f64>> = match prior {
                PriorSpec::Grid(f) => {
                    let mut acc = 0.0;
                    let mut c: Vec<f64> = f.values.iter().map(|&v| {
                        acc += to_f64(v);
                        acc
                    }).collect();
                    c.iter_mut().for_each(|v| *v /= acc);
                    Some(c)
                }
                _ => None,
            };
            let values: Vec<f64> = (0..mc.samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(mc.seed, i as u64);
                    let theta = sample_prior(prior, grid, cdf.as_deref(), &mut rng);
                    let inc = sample_increment(&model.exponent, 1.0, &mut rng)?;
                    let x: Vec<T> = theta.iter().zip(&inc).map(|(&t, &v)| lit(t + v)).collect();
                    Ok(to_f64(kl_at(grid.nearest(&x))?))
                })
                .collect::<Result<_>>()?;
            let (m, se) = mean_and_error(&values);
            Ok(RiskEstimate { value: lit(m), std_error: lit(se), method, n_samples: mc.samples, seed: Some(mc.seed), grid_hash: grid.hash() })
        }
    }
}

/// Both sides of the risk-difference/Dirichlet-form identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report<T> {
    pub lhs: T,
    pub lhs_std_error: T,
    pub rhs: T,
    pub relative_gap: T,
    pub kappa: T,
    pub model: String,
    pub prior: String,
    pub grid_hash: String,
    pub method: Method,
}

/// Compares the Bayes-risk difference with `κ·E(√M^π, √M^π)`.
pub fn verify_theorem1<T: Real>(
    model: &ModelSpec<T>,
    prior: &PriorSpec<T>,
    grid: &GridSpec<T>,
    kappa: T,
    method: Method,
    mc: MonteCarlo,
) -> Result<Theorem1Report<T>> {
    if !(kappa > T::zero()) {
        return Err(Error::InvalidParameter("κ must be calibrated and positive".into()));
    }
    let lhs = bayes_risk_difference(model, prior, grid, method, mc)?;
    let m = marginal(model, prior, grid)?;
    let rhs = dirichlet_form(&m.map(|v| v.max(T::zero()).sqrt()), &model.exponent, kappa)?;
    Ok(Theorem1Report {
        lhs: lhs.value,
        lhs_std_error: lhs.std_error,
        rhs,
        relative_gap: (lhs.value - rhs).abs() / rhs,
        kappa,
        model: model.exponent.label(),
        prior: prior.label(),
        grid_hash: grid.hash(),
        method,
    })
}

/// Plug-in minus uniform-Bayes risk at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationGap<T> {
    pub theta: Vec<T>,
    pub plug_in: T,
    pub uniform: T,
    pub gap: T,
    pub std_error: T,
}

impl<T: Real> DominationGap<T> {
    /// Gap exceeds three combined standard errors (any positive gap for
    /// quadrature).
    pub fn significant(&self) -> bool {
        self.gap > T::zero() && self.gap > lit::<T>(3.0) * self.std_error
    }
}

/// `R_KL(θ, plug-in) − R_KL(θ, uniform Bayes)` for each `θ`.
pub fn domination_check<T: Real>(
    model: &ModelSpec<T>,
    thetas: &[Vec<T>],
    grid: &GridSpec<T>,
    mc: MonteCarlo,
) -> Result<Vec<DominationGap<T>>> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("θ list is empty".into()));
    }
    thetas
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            let mc_k = MonteCarlo { seed: mc.seed.wrapping_add(k as u64), ..mc };
            let plug = kl_risk(model, theta, &Predictive::PlugInMLE, grid, mc_k)?;
            let unif = kl_risk(model, theta, &Predictive::UniformBayes, grid, mc_k)?;
            let se = (plug.std_error * plug.std_error + unif.std_error * unif.std_error).sqrt();
            Ok(DominationGap { theta: theta.clone(), plug_in: plug.value, uniform: unif.value, gap: plug.value - unif.value, std_error: se })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::gaussian_pdf;
    use crate::dirichlet::bgx_bridge;
    use crate::levy_model::LevyExponent;
    use crate::quad;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn g1() -> GridSpec<f64> {
        GridSpec::new(1, 4096, 40.0).unwrap()
    }

    fn gauss(v: f64) -> ModelSpec<f64> {
        ModelSpec::centered(LevyExponent::gaussian(1, v).unwrap())
    }

    #[test]
    fn kl_of_identical_fields_is_zero() {
        let p = transition_density(&gauss(1.0), 1.0, &g1()).unwrap();
        assert_eq!(kl_field(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_shift_kl() {
        let g = g1();
        let p = Field::from_fn(g, |x| gaussian_pdf(x, &[0.0], 2.0));
        let q = Field::from_fn(g, |x| gaussian_pdf(x, &[1.0], 2.0));
        assert_relative_eq!(kl_field(&p, &q).unwrap(), 0.25, max_relative = 1e-10);
    }

    #[test]
    fn cauchy_shift_kl_matches_quadrature() {
        let g = GridSpec::new(1, 1 << 20, 20000.0).unwrap();
        let c = |x: f64, m: f64| 2.0 / (PI * ((x - m).powi(2) + 4.0));
        let p = Field::from_fn(g, |x| c(x[0], 0.0)).normalized().unwrap();
        let q = Field::from_fn(g, |x| c(x[0], 1.0)).normalized().unwrap();
        let f = |x: f64| c(x, 0.0) * (c(x, 0.0) / c(x, 1.0)).ln();
        let oracle = quad::integrate(f, -1e4, 1e4, 1e-14, 1e-13)
            + quad::integrate_to_infinity(f, 1e4, 1e-16, 1e-10)
            + quad::integrate_to_infinity(|x| f(-x), 1e4, 1e-16, 1e-10);
        assert_relative_eq!(oracle, (17.0f64 / 16.0).ln(), max_relative = 1e-8);
        assert!((kl_field(&p, &q).unwrap() - oracle).abs() < 1e-5);
    }

    #[test]
    fn support_mismatch_is_reported() {
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        let p = Field::constant(g, 1.0 / 8.0);
        let mut q = p.clone();
        q.values[10] = 0.0;
        assert!(matches!(kl_field(&p, &q), Err(Error::SupportMismatch)));
    }

    #[test]
    fn gaussian_risks() {
        let m = gauss(1.0);
        for theta in [0.0, 3.5] {
            let plug = kl_risk(&m, &[theta], &Predictive::PlugInMLE, &g1(), MonteCarlo::default()).unwrap();
            let unif = kl_risk(&m, &[theta], &Predictive::UniformBayes, &g1(), MonteCarlo::default()).unwrap();
            assert_relative_eq!(plug.value, 0.5, max_relative = 1e-6);
            assert_relative_eq!(unif.value, 0.5 * 2f64.ln(), max_relative = 1e-6);
            assert_eq!(plug.method, Method::Quadrature);
        }
    }

    #[test]
    fn proper_bayes_risk_with_wide_prior_approaches_uniform() {
        let m = gauss(1.0);
        let prior = PriorSpec::gaussian(1, 25.0);
        let r = kl_risk(&m, &[0.0], &Predictive::ProperBayes(prior), &g1(), MonteCarlo::default()).unwrap();
        // Conjugate oracle: predictive N(x·w, 1 + w) with w = τ²/(1+τ²).
        let w: f64 = 25.0 / 26.0;
        let s2 = 1.0 + w;
        let oracle = 0.5 * (s2.ln() + (1.0 + w * w) / s2 - 1.0);
        assert_relative_eq!(r.value, oracle, max_relative = 1e-4);
    }

    #[test]
    fn cauchy_uniform_risk_is_equivariant_under_monte_carlo() {
        let m = ModelSpec::centered(LevyExponent::cauchy(1, 1.0f64).unwrap());
        let g = GridSpec::new(1, 4096, 200.0).unwrap();
        let mc = MonteCarlo { samples: 4000, seed: 3 };
        let a = kl_risk_with(&m, &[0.0], &Predictive::UniformBayes, &g, Method::MonteCarlo, mc).unwrap();
        let b = kl_risk_with(&m, &[5.0], &Predictive::UniformBayes, &g, Method::MonteCarlo, MonteCarlo { seed: 4, ..mc }).unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!(a.std_error > 0.0 && a.seed == Some(3));
        assert!((a.value - b.value).abs() < 3.0 * se);
        let q = kl_risk(&m, &[0.0], &Predictive::UniformBayes, &g, mc).unwrap();
        assert!((a.value - q.value).abs() < 3.0 * a.std_error);
    }

    #[test]
    fn bayes_risk_difference_gaussian_reference() {
        let r = bayes_risk_difference(&gauss(1.0), &PriorSpec::gaussian(1, 1.0), &g1(), Method::Quadrature, MonteCarlo::default()).unwrap();
        let b = bgx_bridge(1.0, 1.0, 1);
        assert!(((r.value - b) / b).abs() < 0.02, "{} vs {b}", r.value);
    }

    #[test]
    fn bayes_risk_difference_conjugate_closed_form() {
        // Oracle: KL between the two Gaussian predictives averaged over
        // x ~ N(0, v+τ²): ½[ln(2v/s) + (s + w²σ²)/(2v) − 1] with
        // s = v + vτ²/(v+τ²), w = v/(v+τ²), σ² = v+τ².
        for &(v, tau2) in &[(1.0f64, 1.0f64), (1.0, 4.0), (2.0, 1.0)] {
            let s = v + v * tau2 / (v + tau2);
            let w = v / (v + tau2);
            let oracle = 0.5 * ((2.0 * v / s).ln() + (s + w * w * (v + tau2)) / (2.0 * v) - 1.0);
            let r = bayes_risk_difference(&gauss(v), &PriorSpec::gaussian(1, tau2), &g1(), Method::Quadrature, MonteCarlo::default()).unwrap();
            assert_relative_eq!(r.value, oracle, max_relative = 1e-6);
        }
    }

    #[test]
    fn cauchy_grid_prior_two_estimators_agree() {
        let g = GridSpec::new(1, 2048, 200.0).unwrap();
        let m = ModelSpec::centered(LevyExponent::cauchy(1, 1.0f64).unwrap());
        let prior = PriorSpec::gaussian_grid(g, 4.0).unwrap();
        let q = bayes_risk_difference(&m, &prior, &g, Method::Quadrature, MonteCarlo::default()).unwrap();
        assert!(q.value > 0.0);
        let a = bayes_risk_difference(&m, &prior, &g, Method::MonteCarlo, MonteCarlo { samples: 4000, seed: 1 }).unwrap();
        let b = bayes_risk_difference(&m, &prior, &g, Method::MonteCarlo, MonteCarlo { samples: 4000, seed: 2 }).unwrap();
        assert!((a.value - b.value).abs() < 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt());
        assert!((a.value - q.value).abs() < 3.0 * a.std_error);
    }

    #[test]
    fn point_mass_prior_leaves_a_positive_gap() {
        let g = g1();
        let r = bayes_risk_difference(&gauss(1.0), &PriorSpec::gaussian(1, 1e-4), &g, Method::Quadrature, MonteCarlo::default()).unwrap();
        // Limit: KL(N(0,1) ‖ N(x,2)) averaged over x ~ N(0,1) is ½ln2.
        assert!(r.value > 0.3 && r.value < 0.5 * 2f64.ln() + 1e-3);
    }

    #[test]
    fn domination_gaussian_gap() {
        let thetas = vec![vec![0.0], vec![1.0], vec![-7.0]];
        let gaps = domination_check(&gauss(1.0), &thetas, &g1(), MonteCarlo::default()).unwrap();
        for gp in &gaps {
            assert_relative_eq!(gp.gap, 0.5 - 0.5 * 2f64.ln(), max_relative = 1e-5);
            assert!(gp.significant());
        }
    }

    #[test]
    fn domination_gaussian_two_dimensions() {
        let g = GridSpec::new(2, 256, 20.0).unwrap();
        let m = ModelSpec::centered(LevyExponent::gaussian(2, 1.0).unwrap());
        let gaps = domination_check(&m, &[vec![0.0, 0.0]], &g, MonteCarlo::default()).unwrap();
        assert_relative_eq!(gaps[0].gap, 2.0 * (0.5 - 0.5 * 2f64.ln()), max_relative = 1e-5);
    }

    #[test]
    fn three_dimensional_risk_uses_monte_carlo() {
        let g = GridSpec::new(3, 64, 10.0).unwrap();
        let m = ModelSpec::centered(LevyExponent::gaussian(3, 1.0).unwrap());
        let r = kl_risk(&m, &[0.0; 3], &Predictive::UniformBayes, &g, MonteCarlo { samples: 2000, seed: 5 }).unwrap();
        assert_eq!(r.method, Method::MonteCarlo);
        let exact = 1.5 * 2f64.ln();
        assert!((r.value - exact).abs() < 3.0 * r.std_error + 0.02, "{} ± {}", r.value, r.std_error);
    }

    #[test]
    fn identity_holds_at_the_calibration_point() {
        let kappa = crate::dirichlet::reference_kappa::<f64>().unwrap();
        let rep = verify_theorem1(&gauss(1.0), &PriorSpec::gaussian(1, 1.0), &g1(), kappa, Method::Quadrature, MonteCarlo::default()).unwrap();
        assert!(rep.relative_gap < 0.02, "{rep:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gibbs_inequality(a in prop::collection::vec(0.01f64..1.0, 32), b in prop::collection::vec(0.01f64..1.0, 32)) {
            let g = GridSpec::new(1, 32, 4.0).unwrap();
            let p = Field::new(g, a).unwrap().normalized().unwrap();
            let q = Field::new(g, b).unwrap().normalized().unwrap();
            let k = kl_field(&p, &q).unwrap();
            prop_assert!(k >= 0.0);
            let same = p.values.iter().zip(&q.values).all(|(x, y)| (x - y).abs() < 1e-15);
            prop_assert!(same || k > 0.0);
        }

        #[test]
        fn uniform_risk_is_shift_invariant(theta in -10.0f64..10.0) {
            let g = GridSpec::new(1, 1024, 40.0).unwrap();
            let m = gauss(1.0);
            let r = kl_risk(&m, &[theta], &Predictive::UniformBayes, &g, MonteCarlo::default()).unwrap();
            prop_assert!((r.value - 0.5 * 2f64.ln()).abs() < 1e-6);
        }

        #[test]
        fn bayes_risk_difference_is_nonnegative(tau2 in 0.2f64..10.0) {
            let g = GridSpec::new(1, 512, 30.0).unwrap();
            let r = bayes_risk_difference(&gauss(1.0), &PriorSpec::gaussian(1, tau2), &g, Method::Quadrature, MonteCarlo::default()).unwrap();
            prop_assert!(r.value >= 0.0);
        }
    }
}
