//! Donsker–Varadhan machinery: the variational KL bound, the rate-function
//! probe `(1/h)·sup_g ∫log[(g+ε)/(T_h g+ε)]dM`, the KL chain rule on finite
//! joints and the resolvent-family estimate of the rate function `I`.
//!
//! Every supremum is taken over a fixed finite family, so each reported
//! value is a certified lower bound of the true supremum.

use crate::density::{heat_symbol, marginal, PriorSpec};
use crate::dirichlet::{dirichlet_form, generator_symbol, ZeroMode};
use crate::error::{Error, Result};
use crate::levy_model::ModelSpec;
use crate::risk::kl_field;
use crate::scalar::{lit, pairwise_sum, to_f64, Real};
use crate::spectral_core::{check_grid, Field, GridSpec, SpectralPlan};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Clamp applied to tabulated test functions `g`.
pub const G_CLAMP: f64 = 30.0;

/// Ladder of regularizing offsets `ε`.
pub const EPSILON_LADDER: [f64; 3] = [1e-2, 1e-4, 1e-6];

/// Ladder of offsets for the rate-function estimate.
pub const I_EPSILON_LADDER: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Slack allowed between the DV bound and the quadrature KL.
pub const DV_SLACK: f64 = 1e-9;

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let p: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
    pairwise_sum(&p)
}

/// Output of [`dv_kl`].
#[derive(Debug, Clone)]
pub struct DvResult<T: Real> {
    /// Best objective value over all iterates.
    pub bound: T,
    pub g_opt: Field<T>,
    /// Objective at every iterate, starting with the initial `g`.
    pub trace: Vec<T>,
    /// `KL(q‖p)` by quadrature.
    pub kl: T,
    /// Largest excess of an iterate over `kl`; nonpositive up to rounding.
    pub max_excess: T,
}

impl<T: Real> DvResult<T> {
    /// The bound stayed below the quadrature KL at every iterate.
    pub fn invariant_holds(&self) -> bool {
        to_f64(self.max_excess) <= DV_SLACK
    }
}

/// `E_q[g] − log E_p[e^g]` on the grid, with a shifted exponential.
fn dv_objective<T: Real>(p: &[T], q: &[T], g: &[T], cell: T) -> Result<(T, Vec<T>)> {
    let top = g.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let w: Vec<T> = p.iter().zip(g).map(|(&pi, &gi)| pi * (gi - top).exp()).collect();
    let z = pairwise_sum(&w) * cell;
    if !(z > T::zero()) || !z.is_finite() {
        return Err(Error::NonFinite("exponential moment in the DV objective".into()));
    }
    let value = dot(q, g) * cell - (z.ln() + top);
    let tilted: Vec<T> = w.iter().map(|&v| v / z).collect();
    Ok((value, tilted))
}

/// Maximizes `E_q[g] − log E_p[e^g]` by function-space gradient ascent
/// `g ← g + step·(q − p e^g/Z)`, with `g` clamped to `[−30, 30]`.
pub fn dv_kl<T: Real>(p: &Field<T>, q: &Field<T>, g_init: &Field<T>, steps: usize, step_size: T) -> Result<DvResult<T>> {
    check_grid(&p.grid, &q.grid)?;
    check_grid(&p.grid, &g_init.grid)?;
    let cell = p.grid.cell();
    let kl = kl_field(q, p)?;
    let clamp = lit::<T>(G_CLAMP);
    let mut g: Vec<T> = g_init.values.iter().map(|&v| v.max(-clamp).min(clamp)).collect();
    let (mut value, mut tilted) = dv_objective(&p.values, &q.values, &g, cell)?;
    let mut trace = vec![value];
    let mut best = (value, g.clone());
    for _ in 0..steps {
        for ((gi, &qi), &ti) in g.iter_mut().zip(&q.values).zip(&tilted) {
            *gi = (*gi + step_size * (qi - ti)).max(-clamp).min(clamp);
        }
        (value, tilted) = dv_objective(&p.values, &q.values, &g, cell)?;
        trace.push(value);
        if value > best.0 {
            best = (value, g.clone());
        }
    }
    let max_excess = trace.iter().fold(T::neg_infinity(), |a, &v| a.max(v - kl));
    Ok(DvResult { bound: best.0, g_opt: Field::new(p.grid, best.1)?, trace, kl, max_excess })
}

/// One `(h, ε)` cell of the rate-function probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCell<T> {
    pub h: T,
    pub eps: T,
    pub phi: T,
}

/// Per-`h` summary of the rate-function probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProbe<T> {
    pub h: T,
    /// `sup φ(h, g, ε)` over the ascent family and the ε ladder.
    pub sup: T,
    /// `sup / h`.
    pub scaled: T,
    pub best_eps: T,
    pub cells: Vec<RateCell<T>>,
}

struct RateProblem<'a, T: Real> {
    plan: &'a SpectralPlan<T>,
    heat: Vec<T>,
    m: &'a [T],
    cell: T,
    eps: T,
}

impl<T: Real> RateProblem<'_, T> {
    fn value(&self, s: &[T]) -> T {
        let g: Vec<T> = s.iter().map(|v| v.exp()).collect();
        let tg = self.plan.apply_multiplier(&g, &self.heat);
        let terms: Vec<T> = self
            .m
            .iter()
            .zip(&g)
            .zip(&tg)
            .map(|((&m, &gi), &ti)| m * ((gi + self.eps).ln() - (ti.max(T::zero()) + self.eps).ln()))
            .collect();
        pairwise_sum(&terms) * self.cell
    }

    fn gradient(&self, s: &[T]) -> Vec<T> {
        let g: Vec<T> = s.iter().map(|v| v.exp()).collect();
        let tg = self.plan.apply_multiplier(&g, &self.heat);
        let ratio: Vec<T> = self.m.iter().zip(&tg).map(|(&m, &t)| m / (t.max(T::zero()) + self.eps)).collect();
        let back = self.plan.apply_multiplier(&ratio, &self.heat);
        g.iter()
            .zip(self.m)
            .zip(&back)
            .map(|((&gi, &m), &b)| m * gi / (gi + self.eps) - gi * b)
            .collect()
    }
}

/// Ascent on `s = log g` with an adaptive step: accepted steps grow it by
/// 1.5, rejected ones halve it.
fn ascend<T: Real>(problem: &RateProblem<T>, start: Vec<T>, steps: usize) -> T {
    let clamp = lit::<T>(G_CLAMP);
    let scale = T::one() / problem.m.iter().fold(T::zero(), |a, &b| a.max(b));
    let mut s = start;
    let mut f = problem.value(&s);
    let mut lr = T::one();
    for _ in 0..steps {
        let grad = problem.gradient(&s);
        loop {
            let trial: Vec<T> = s.iter().zip(&grad).map(|(&a, &b)| (a + lr * scale * b).max(-clamp).min(clamp)).collect();
            let ft = problem.value(&trial);
            if ft >= f {
                s = trial;
                f = ft;
                lr = lr * lit(1.5);
                break;
            }
            lr = lr * lit(0.5);
            if to_f64(lr) < 1e-12 {
                return f;
            }
        }
    }
    f
}

/// `(1/h)·sup_g φ(h, g, ε)` for each `h`, with `T_h` acting spectrally as
/// `exp(−hκψ)`, `g` tabulated on the grid and started from `√M^π`.
pub fn rate_function_probe<T: Real>(
    model: &ModelSpec<T>,
    prior: &PriorSpec<T>,
    h_list: &[T],
    grid: &GridSpec<T>,
    kappa: T,
    steps: usize,
) -> Result<Vec<RateProbe<T>>> {
    let c = model.exponent.c;
    if h_list.is_empty()
        || h_list.iter().any(|&h| !(h > T::zero()) || h > lit::<T>(2.0) * c * (T::one() + T::epsilon()))
        || h_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidParameter("h list must decrease within (0, 2c]".into()));
    }
    let m = marginal(model, prior, grid)?;
    let start: Vec<T> = {
        let r: Vec<T> = m.values.iter().map(|&v| v.max(T::min_positive_value()).sqrt().ln()).collect();
        let top = r.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        r.iter().map(|&v| (v - top).max(-lit::<T>(G_CLAMP))).collect()
    };
    let plan = SpectralPlan::new(*grid);
    let jobs: Vec<(usize, usize)> = (0..h_list.len()).flat_map(|i| (0..EPSILON_LADDER.len()).map(move |j| (i, j))).collect();
    let cells: Vec<RateCell<T>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let h = h_list[i];
            let eps = lit::<T>(EPSILON_LADDER[j]);
            let problem = RateProblem { plan: &plan, heat: heat_symbol(&model.exponent, h * kappa, grid)?, m: &m.values, cell: grid.cell(), eps };
            let phi = ascend(&problem, start.clone(), steps);
            Ok(RateCell { h, eps, phi })
        })
        .collect::<Result<_>>()?;
    Ok(h_list
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let own: Vec<RateCell<T>> = cells[i * EPSILON_LADDER.len()..(i + 1) * EPSILON_LADDER.len()].to_vec();
            let best = own.iter().fold(own[0], |a, &b| if b.phi > a.phi { b } else { a });
            RateProbe { h, sup: best.phi, scaled: best.phi / h, best_eps: best.eps, cells: own }
        })
        .collect())
}

/// Decomposition `KL(Q‖P) = KL(Q_X‖P_X) + E_{Q_X}[KL(Q_{Y|X}‖P_{Y|X})]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRule {
    pub lhs: f64,
    pub marginal: f64,
    pub conditional: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Largest joint support accepted by [`kl_chain_rule_check`].
pub const MAX_ATOMS: usize = 1000;

/// Checks the KL chain rule on finite joints given as row-major tables
/// `q[x][y]`, `p[x][y]`, each summing to one.
pub fn kl_chain_rule_check(q: &[Vec<f64>], p: &[Vec<f64>]) -> Result<ChainRule> {
    if q.len() != p.len() || q.iter().zip(p).any(|(a, b)| a.len() != b.len()) || q.is_empty() {
        return Err(Error::InvalidParameter("joint tables must share one shape".into()));
    }
    let atoms: usize = q.iter().map(Vec::len).sum();
    if atoms > MAX_ATOMS {
        return Err(Error::InvalidParameter(format!("{atoms} atoms exceeds {MAX_ATOMS}")));
    }
    for t in [q, p] {
        let s: f64 = t.iter().flatten().sum();
        if (s - 1.0).abs() > 1e-9 || t.iter().flatten().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("joint tables must be probability distributions".into()));
        }
    }
    let flat_q: Vec<f64> = q.iter().flatten().copied().collect();
    let flat_p: Vec<f64> = p.iter().flatten().copied().collect();
    if let Some(k) = flat_q.iter().zip(&flat_p).position(|(&a, &b)| a > 0.0 && b == 0.0) {
        return Err(Error::AbsoluteContinuity(k));
    }
    let kl = |a: &[f64], b: &[f64]| -> f64 {
        let t: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| if x > 0.0 { x * (x / y).ln() } else { 0.0 }).collect();
        pairwise_sum(&t)
    };
    let lhs = kl(&flat_q, &flat_p);
    let qx: Vec<f64> = q.iter().map(|r| r.iter().sum()).collect();
    let px: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let marginal = kl(&qx, &px);
    let cond: Vec<f64> = (0..q.len())
        .map(|x| {
            if qx[x] == 0.0 {
                return 0.0;
            }
            let qc: Vec<f64> = q[x].iter().map(|&v| v / qx[x]).collect();
            let pc: Vec<f64> = p[x].iter().map(|&v| v / px[x]).collect();
            qx[x] * kl(&qc, &pc)
        })
        .collect();
    let conditional = pairwise_sum(&cond);
    let rhs = marginal + conditional;
    Ok(ChainRule { lhs, marginal, conditional, rhs, gap: (lhs - rhs).abs() })
}

/// Result of [`i_function_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IEstimate<T> {
    pub value: T,
    /// `κ·E(√M^π)`.
    pub rhs: T,
    pub family_size: usize,
    /// Running supremum over the first `k + 1` members.
    pub running: Vec<T>,
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Member `k` of the resolvent family: bump width `σ ∈ [0.1, 10]` and
/// resolvent parameter `α ∈ [10⁻³, 10]`, both log-spaced along a Halton
/// sequence so every prefix of the family covers the ranges evenly.
pub fn family_member(k: usize) -> (f64, f64) {
    let a = halton(k + 1, 2);
    let b = halton(k + 1, 3);
    let sigma = (0.1f64.ln() + a * (100.0f64).ln()).exp();
    let alpha = (1e-3f64.ln() + b * (1e4f64).ln()).exp();
    (sigma, alpha)
}

/// `sup ∫(−Au_ε)/u_ε dM^π` over `u = G_α f` with centered Gaussian bumps
/// `f` and `ε` on the ladder, `A` acting spectrally as `−κψ`.
pub fn i_function_estimate<T: Real>(
    model: &ModelSpec<T>,
    prior: &PriorSpec<T>,
    family_size: usize,
    grid: &GridSpec<T>,
    kappa: T,
) -> Result<IEstimate<T>> {
    if family_size == 0 {
        return Err(Error::InvalidParameter("family size must be positive".into()));
    }
    let m = marginal(model, prior, grid)?;
    let rhs = dirichlet_form(&m.map(|v| v.max(T::zero()).sqrt()), &model.exponent, kappa)?;
    let sym = generator_symbol(&model.exponent, kappa, grid, ZeroMode::Periodic)?;
    let plan = SpectralPlan::new(*grid);
    let cell = grid.cell();
    let values: Vec<T> = (0..family_size)
        .into_par_iter()
        .map(|k| {
            let (sigma, alpha) = family_member(k);
            let f = Field::from_fn(*grid, |x| {
                (-x.iter().fold(T::zero(), |a, &v| a + v * v) / lit::<T>(2.0 * sigma * sigma)).exp()
            });
            let res: Vec<T> = sym.iter().map(|&s| T::one() / (lit::<T>(alpha) + s)).collect();
            let u = plan.apply_multiplier(&f.values, &res);
            let top = u.iter().fold(T::zero(), |a, &b| a.max(b));
            let u: Vec<T> = u.iter().map(|&v| (v / top).max(T::zero())).collect();
            let lu = plan.apply_multiplier(&u, &sym);
            I_EPSILON_LADDER
                .iter()
                .map(|&e| {
                    let eps = lit::<T>(e);
                    let t: Vec<T> = lu.iter().zip(&u).zip(&m.values).map(|((&l, &v), &mm)| l / (v + eps) * mm).collect();
                    pairwise_sum(&t) * cell
                })
                .fold(T::neg_infinity(), |a, b| a.max(b))
        })
        .collect();
    let mut running = Vec::with_capacity(family_size);
    let mut best = T::zero();
    for v in values {
        best = best.max(v);
        running.push(best);
    }
    Ok(IEstimate { value: best, rhs, family_size, running })
}
