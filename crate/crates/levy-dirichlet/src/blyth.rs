//! Killed resolvents, the Blyth prior sequence `√π_n = G^η_{1/n}η`, the
//! marginal-energy bound and the transient lower bound built from the
//! potential operator.
//!
//! The generator acts spectrally as multiplication by `−κψ`. For transient
//! exponents the zero-frequency bin carries the continuum cell value (see
//! [`ZeroMode::ContinuumCell`]) so the torus inherits the continuum potential.

use crate::density::{marginal, PriorSpec};
use crate::dirichlet::{dirichlet_form, dirichlet_form_with_symbol, generator_symbol, inverse_integrable, zero_cell_average, ZeroMode};
use crate::error::{Error, Result};
use crate::levy_model::{LevyExponent, ModelSpec};
use crate::scalar::{lit, pairwise_sum, to_f64, Real};
use crate::spectral_core::{check_grid, Field, GridSpec, SpectralPlan};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative residual at which the resolvent solver stops.
pub const RESOLVENT_TOLERANCE: f64 = 1e-8;

/// Iteration cap of the resolvent solver.
pub const MAX_ITERATIONS: usize = 10_000;

/// First node of the time quadrature for the potential operator.
pub const POTENTIAL_T0: f64 = 1e-3;

/// Default time horizon of the potential quadrature.
pub const DEFAULT_T_MAX: f64 = 1e3;

/// Default number of log-spaced time nodes.
pub const DEFAULT_TIME_NODES: usize = 64;

/// Increment ratio across `T, 2T, 4T` above which the partial potential is
/// declared divergent.
pub const DIVERGENCE_RATIO: f64 = 0.9;

/// `(α + η − A)u = rhs` with `A = −κψ` spectrally.
#[derive(Debug, Clone)]
pub struct KilledResolventProblem<T: Real> {
    pub exponent: LevyExponent<T>,
    pub kappa: T,
    pub eta: Field<T>,
    pub alpha: T,
    pub rhs: Field<T>,
    pub zero_mode: ZeroMode,
}

impl<T: Real> KilledResolventProblem<T> {
    pub fn new(exponent: LevyExponent<T>, kappa: T, eta: Field<T>, alpha: T, rhs: Field<T>, zero_mode: ZeroMode) -> Result<Self> {
        check_grid(&eta.grid, &rhs.grid)?;
        if exponent.d != eta.grid.d {
            return Err(Error::GridMismatch);
        }
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter("resolvent parameter α must be positive".into()));
        }
        if !(kappa > T::zero()) {
            return Err(Error::InvalidParameter("κ must be positive".into()));
        }
        if eta.values.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidParameter("killing rate η must be positive and finite on the grid".into()));
        }
        if !eta.integral().is_finite() {
            return Err(Error::InvalidParameter("killing rate η must be integrable".into()));
        }
        Ok(Self { exponent, kappa, eta, alpha, rhs, zero_mode })
    }
}

/// Output of [`resolvent_apply`].
#[derive(Debug, Clone)]
pub struct ResolventSolution<T: Real> {
    pub u: Field<T>,
    pub iterations: usize,
    pub residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let p: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
    pairwise_sum(&p)
}

/// Solves the killed resolvent equation by conjugate gradients with the
/// spectral preconditioner `1/(α + κψ)`; the operator is symmetric positive
/// definite, so the iteration converges monotonically in energy norm.
pub fn resolvent_apply<T: Real>(problem: &KilledResolventProblem<T>) -> Result<ResolventSolution<T>> {
    let grid = problem.eta.grid;
    let sym = generator_symbol(&problem.exponent, problem.kappa, &grid, problem.zero_mode)?;
    let plan = SpectralPlan::new(grid);
    solve_with_symbol(&plan, &sym, &problem.eta.values, problem.alpha, &problem.rhs.values)
}

fn solve_with_symbol<T: Real>(plan: &SpectralPlan<T>, sym: &[T], eta: &[T], alpha: T, rhs: &[T]) -> Result<ResolventSolution<T>> {
    let grid = *plan.grid();
    let apply = |u: &[T]| -> Vec<T> {
        let au = plan.apply_multiplier(u, sym);
        u.iter().zip(eta).zip(&au).map(|((&v, &e), &a)| (alpha + e) * v + a).collect()
    };
    let prec_sym: Vec<T> = sym.iter().map(|&s| T::one() / (alpha + s)).collect();
    let prec = |r: &[T]| plan.apply_multiplier(r, &prec_sym);
    let norm_rhs = dot(rhs, rhs).sqrt();
    let tol = lit::<T>(RESOLVENT_TOLERANCE);
    let mut u = vec![T::zero(); rhs.len()];
    if norm_rhs == T::zero() {
        return Ok(ResolventSolution { u: Field::new(grid, u)?, iterations: 0, residual: T::zero() });
    }
    let mut r = rhs.to_vec();
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let ap = apply(&p);
        let step = rz / dot(&p, &ap);
        u.iter_mut().zip(&p).for_each(|(a, &b)| *a = *a + step * b);
        r.iter_mut().zip(&ap).for_each(|(a, &b)| *a = *a - step * b);
        let residual = dot(&r, &r).sqrt() / norm_rhs;
        if !residual.is_finite() {
            return Err(Error::NonFinite("resolvent residual".into()));
        }
        if residual < tol {
            break;
        }
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(a, &b)| *a = b + beta * *a);
    }
    // The recursive residual can drift; confirm against the operator.
    let check: Vec<T> = apply(&u).iter().zip(rhs).map(|(&a, &b)| a - b).collect();
    let residual = dot(&check, &check).sqrt() / norm_rhs;
    if !(residual < tol) {
        return Err(Error::NoConvergence { iterations, residual: to_f64(residual) });
    }
    u.iter_mut().for_each(|v| *v = v.max(T::zero()));
    Ok(ResolventSolution { u: Field::new(grid, u)?, iterations, residual })
}

/// Centered Gaussian killing rate `exp(−‖x‖²/2)`, maximum 1.
pub fn default_eta<T: Real>(grid: &GridSpec<T>) -> Field<T> {
    Field::from_fn(*grid, |x| (-x.iter().fold(T::zero(), |a, &v| a + v * v) / lit(2.0)).exp().max(T::min_positive_value()))
}

/// Zero-bin treatment that keeps the torus consistent with the continuum:
/// the cell value for transient exponents, `ψ(0) = 0` otherwise.
pub fn continuum_zero_mode<T: Real>(exponent: &LevyExponent<T>) -> ZeroMode {
    if inverse_integrable(exponent) {
        ZeroMode::ContinuumCell
    } else {
        ZeroMode::Periodic
    }
}

/// One member of the Blyth sequence.
#[derive(Debug, Clone)]
pub struct BlythStep<T: Real> {
    pub n: u64,
    pub alpha: T,
    pub root: Field<T>,
    pub energy: T,
    pub residual: T,
    pub iterations: usize,
}

/// `√π_n = G^η_{1/n}η` and `κ·E(√π_n)` for each `n`.
pub fn blyth_sequence<T: Real>(model: &ModelSpec<T>, eta: &Field<T>, n_list: &[u64], kappa: T) -> Result<Vec<BlythStep<T>>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(Error::InvalidParameter("n list must be increasing positive integers".into()));
    }
    let mode = continuum_zero_mode(&model.exponent);
    let grid = eta.grid;
    let sym = generator_symbol(&model.exponent, kappa, &grid, mode)?;
    // Validates η once for all n.
    KilledResolventProblem::new(model.exponent.clone(), kappa, eta.clone(), T::one(), eta.clone(), mode)?;
    n_list
        .par_iter()
        .map(|&n| {
            let plan = SpectralPlan::new(grid);
            let alpha = T::one() / lit::<T>(n as f64);
            let sol = solve_with_symbol(&plan, &sym, &eta.values, alpha, &eta.values)?;
            let energy = dirichlet_form_with_symbol(&sol.u, &sym)?;
            Ok(BlythStep { n, alpha, root: sol.u, energy, residual: sol.residual, iterations: sol.iterations })
        })
        .collect()
}

/// Largest violation of `0 ≤ √π_n ≤ 1` and of pointwise monotonicity in `n`.
pub fn sequence_violations<T: Real>(steps: &[BlythStep<T>]) -> (f64, f64) {
    let mut range = 0.0f64;
    let mut mono = 0.0f64;
    for (k, s) in steps.iter().enumerate() {
        for &v in &s.root.values {
            let v = to_f64(v);
            range = range.max(-v).max(v - 1.0);
        }
        if k > 0 {
            for (a, b) in steps[k - 1].root.values.iter().zip(&s.root.values) {
                mono = mono.max(to_f64(*a - *b));
            }
        }
    }
    (range, mono)
}

/// Prior density `π_n = (√π_n)²` normalized on the grid.
pub fn prior_from_root<T: Real>(root: &Field<T>) -> Result<PriorSpec<T>> {
    PriorSpec::grid(root.map(|v| v * v).normalized()?)
}

/// Both sides of `κE(√M^π) ≤ κE(√π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBound<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Real> PriorBound<T> {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + lit(1e-9)
    }
}

/// Marginalization does not raise the energy of the square-root density.
pub fn prior_bound_check<T: Real>(model: &ModelSpec<T>, prior: &Field<T>, kappa: T) -> Result<PriorBound<T>> {
    let root = prior.map(|v| v.max(T::zero()).sqrt());
    let rhs = dirichlet_form(&root, &model.exponent, kappa)?;
    if !rhs.is_finite() {
        return Err(Error::NonFinite("prior energy".into()));
    }
    let m = marginal(model, &PriorSpec::grid(prior.clone())?, &prior.grid)?;
    let lhs = dirichlet_form(&m.map(|v| v.max(T::zero()).sqrt()), &model.exponent, kappa)?;
    Ok(PriorBound { lhs, rhs })
}

/// Spectral multiplier of the potential operator `R = ∫₀^∞ T_t dt`:
/// log-trapezoid over `[t₀, T_max]`, exact head `(1 − e^{−t₀κψ})/(κψ)` and
/// exact tail `e^{−T_max κψ}/(κψ)`. The zero bin is the cell average of the
/// partial potential plus the cell average of its tail.
pub fn potential_multiplier<T: Real>(exponent: &LevyExponent<T>, kappa: T, grid: &GridSpec<T>, t_max: f64, nodes: usize) -> Result<Vec<T>> {
    if !(t_max > POTENTIAL_T0) || nodes < 2 {
        return Err(Error::InvalidParameter("potential quadrature needs T_max > t₀ and two nodes".into()));
    }
    let k = to_f64(kappa);
    check_partial_potential(exponent, k, grid, t_max)?;
    let times: Vec<f64> = (0..nodes)
        .map(|j| (POTENTIAL_T0.ln() + (t_max / POTENTIAL_T0).ln() * j as f64 / (nodes - 1) as f64).exp())
        .collect();
    let mut m: Vec<T> = (0..grid.len())
        .map(|idx| {
            let p = k * to_f64(exponent.psi_radial(grid.frequency_norm(idx))?);
            if p <= 0.0 {
                return Ok(T::zero());
            }
            let mut acc = 0.0;
            for j in 0..nodes - 1 {
                let (a, b) = (times[j], times[j + 1]);
                acc += 0.5 * (a * (-a * p).exp() + b * (-b * p).exp()) * (b / a).ln();
            }
            acc += -(-POTENTIAL_T0 * p).exp_m1() / p + (-t_max * p).exp() / p;
            Ok(lit(acc))
        })
        .collect::<Result<_>>()?;
    let partial = zero_cell_average(exponent, grid, |p| -(-t_max * k * p).exp_m1() / (k * p))?.unwrap_or(0.0);
    let tail = zero_cell_average(exponent, grid, |p| (-t_max * k * p).exp() / (k * p))?
        .ok_or(Error::DivergentPotential { ratio: 1.0 })?;
    m[0] = lit(partial + tail);
    Ok(m)
}

/// Growth of the zero-bin partial potential across `T, 2T, 4T`; a ratio of
/// successive increments near 1 marks a recurrent exponent.
fn check_partial_potential<T: Real>(exponent: &LevyExponent<T>, kappa: f64, grid: &GridSpec<T>, t_max: f64) -> Result<f64> {
    let part = |t: f64| -> Result<f64> {
        Ok(zero_cell_average(exponent, grid, |p| -(-t * kappa * p).exp_m1() / (kappa * p))?.unwrap_or(f64::INFINITY))
    };
    let (a, b, c) = (part(t_max)?, part(2.0 * t_max)?, part(4.0 * t_max)?);
    let ratio = (c - b) / (b - a);
    if !ratio.is_finite() || ratio > DIVERGENCE_RATIO || !inverse_integrable(exponent) {
        return Err(Error::DivergentPotential { ratio });
    }
    Ok(ratio)
}

/// Result of [`transient_lower_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound<T> {
    pub bound: T,
    pub energy: T,
    pub t_max: f64,
    pub nodes: usize,
    pub potential_max: T,
}

impl<T: Real> LowerBound<T> {
    pub fn holds(&self) -> bool {
        self.bound > T::zero() && self.bound <= self.energy
    }
}

/// Reference-function lower bound `∫g√M^π ≤ κE(√M^π)` with
/// `g = f/max(Rf, 1)` and `f = √M^π/‖√M^π‖₁`.
///
/// The reference function is built from the `L¹`-normalized square root so
/// that `g` is bounded by the potential scale of a probability density.
pub fn transient_lower_bound<T: Real>(
    model: &ModelSpec<T>,
    prior: &PriorSpec<T>,
    grid: &GridSpec<T>,
    kappa: T,
    t_max: f64,
    nodes: usize,
) -> Result<LowerBound<T>> {
    let mult = potential_multiplier(&model.exponent, kappa, grid, t_max, nodes)?;
    let m = marginal(model, prior, grid)?;
    let root = m.map(|v| v.max(T::zero()).sqrt());
    let f = root.clone().normalized()?;
    let plan = SpectralPlan::new(*grid);
    let rf = plan.apply_multiplier(&f.values, &mult);
    let g: Vec<T> = f.values.iter().zip(&rf).map(|(&a, &r)| a / r.max(T::one())).collect();
    let bound = dot(&g, &root.values) * grid.cell();
    let sym = generator_symbol(&model.exponent, kappa, grid, ZeroMode::ContinuumCell)?;
    let energy = dirichlet_form_with_symbol(&root, &sym)?;
    let potential_max = rf.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(LowerBound { bound, energy, t_max, nodes, potential_max })
}
