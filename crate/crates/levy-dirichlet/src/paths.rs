//! Monte Carlo increments and skeleton paths of the driving processes.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by
//! `(seed, index)`, so results do not depend on the number of workers.

use crate::density::transition_density;
use crate::error::{Error, Result};
use crate::levy_model::{ExponentKind, LevyExponent, ModelSpec};
use crate::scalar::{lit, to_f64, Real};
use crate::spectral_core::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Upper bound on skeleton steps per path.
pub const MAX_STEPS: f64 = 1e7;

/// Random stream `index` of experiment `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard symmetric stable variable with characteristic function
/// `exp(−|z|^α)`, by the Chambers–Mallows–Stuck construction.
pub fn standard_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (uniform_open(rng) - 0.5);
    let w: f64 = Exp1.sample(rng);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variable with Laplace transform `exp(−s^β)`, `0 < β ≤ 1`,
/// by Kanter's representation.
pub fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    if beta >= 1.0 {
        return 1.0;
    }
    let u = uniform_open(rng);
    let e: f64 = Exp1.sample(rng);
    let a = ((beta * PI * u).sin() / (PI * u).sin()).powf(1.0 / (1.0 - beta)) * ((1.0 - beta) * PI * u).sin()
        / (beta * PI * u).sin();
    (a / e).powf((1.0 - beta) / beta)
}

/// One increment over time `t` of the process with exponent `exponent`.
pub fn sample_increment<T: Real, R: Rng + ?Sized>(exponent: &LevyExponent<T>, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("increment time must be positive, got {t}")));
    }
    let d = exponent.d;
    let s = t * to_f64(exponent.c);
    match &exponent.kind {
        ExponentKind::Gaussian => {
            let sd = s.sqrt();
            Ok((0..d).map(|_| sd * normal(rng)).collect())
        }
        ExponentKind::IsotropicStable { alpha } => {
            let alpha = to_f64(*alpha);
            let scale = s.powf(1.0 / alpha);
            if d == 1 {
                Ok(vec![scale * standard_symmetric_stable(alpha, rng)])
            } else {
                let a = positive_stable(alpha / 2.0, rng);
                let f = (2.0 * a).sqrt() * scale;
                Ok((0..d).map(|_| f * normal(rng)).collect())
            }
        }
        ExponentKind::TabulatedRadial(_) => Err(Error::Unsupported("sampling of tabulated exponents".into())),
    }
}

/// `count` increments, draw `i` taken from stream `i` of `seed`.
pub fn sample_increments<T: Real>(exponent: &LevyExponent<T>, t: f64, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_increment(exponent, t, &mut stream_rng(seed, i as u64)))
        .collect()
}

/// Kolmogorov–Smirnov distance between `samples` and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// CDF of the one-dimensional time-`t` law on `grid`, with cell masses
/// accumulated from the grid density and linear interpolation in between.
pub struct GridCdf {
    left: f64,
    dx: f64,
    cumulative: Vec<f64>,
}

impl GridCdf {
    pub fn new<T: Real>(exponent: &LevyExponent<T>, t: f64, grid: &GridSpec<T>) -> Result<Self> {
        if grid.d != 1 || exponent.d != 1 {
            return Err(Error::InvalidParameter("grid CDF needs a one-dimensional law".into()));
        }
        let p = transition_density(&ModelSpec::centered(exponent.clone()), lit(t), grid)?;
        let dx = to_f64(grid.dx());
        let mut cumulative = Vec::with_capacity(p.values.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for v in &p.values {
            acc += to_f64(*v) * dx;
            cumulative.push(acc);
        }
        let total = acc;
        cumulative.iter_mut().for_each(|c| *c /= total);
        Ok(Self { left: to_f64(grid.coord(0)) - dx / 2.0, dx, cumulative })
    }

    /// Period of the underlying torus.
    pub fn period(&self) -> f64 {
        self.dx * (self.cumulative.len() - 1) as f64
    }

    /// Maps `x` onto the torus cell range `[left, left + period)`.
    pub fn wrap(&self, x: f64) -> f64 {
        self.left + (x - self.left).rem_euclid(self.period())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.left) / self.dx;
        if u <= 0.0 {
            return 0.0;
        }
        let last = self.cumulative.len() - 1;
        if u >= last as f64 {
            return 1.0;
        }
        let k = u.floor() as usize;
        let frac = u - k as f64;
        self.cumulative[k] * (1.0 - frac) + self.cumulative[k + 1] * frac
    }
}

/// KS distance between the first coordinates of `samples`, wrapped onto the
/// torus of `grid`, and the one-dimensional law of `exponent` at time `t`.
pub fn ks_against_density<T: Real>(samples: &[Vec<f64>], exponent: &LevyExponent<T>, t: f64, grid: &GridSpec<T>) -> Result<f64> {
    let marginal = match &exponent.kind {
        ExponentKind::Gaussian => LevyExponent::gaussian(1, exponent.c)?,
        ExponentKind::IsotropicStable { alpha } => LevyExponent::stable(1, exponent.c, *alpha)?,
        ExponentKind::TabulatedRadial(_) => return Err(Error::Unsupported("sampling of tabulated exponents".into())),
    };
    let cdf = GridCdf::new(&marginal, t, grid)?;
    let xs: Vec<f64> = samples.iter().map(|s| cdf.wrap(s[0])).collect();
    Ok(ks_distance(&xs, |x| cdf.eval(x)))
}

/// Mean occupation count of one time window across paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadeStat {
    pub start: f64,
    pub end: f64,
    pub mean: f64,
    pub std_error: f64,
}

/// Result of [`return_statistics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStatistics {
    pub decades: Vec<DecadeStat>,
    /// Occupation counts, `per_path[path][decade]`.
    pub per_path: Vec<Vec<u64>>,
    pub seed: u64,
    pub radius: f64,
    pub step: f64,
}

impl ReturnStatistics {
    /// Mean total occupation over all decades.
    pub fn total(&self) -> f64 {
        self.decades.iter().map(|d| d.mean).sum()
    }

    /// Share of the final decade in the total occupation.
    pub fn final_share(&self) -> f64 {
        let total = self.total();
        match self.decades.last() {
            Some(d) if total > 0.0 => d.mean / total,
            _ => 0.0,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "path_index,decade,occupation_count")?;
        for (p, counts) in self.per_path.iter().enumerate() {
            for (k, c) in counts.iter().enumerate() {
                writeln!(out, "{p},{k},{c}")?;
            }
        }
        Ok(())
    }
}

/// Decade windows `(0, 10], (10, 100], …` up to `horizon`.
fn decade_edges(horizon: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    let mut e = 10.0;
    while e < horizon * (1.0 - 1e-12) {
        edges.push(e);
        e *= 10.0;
    }
    edges.push(horizon);
    edges
}

/// Counts skeleton times spent in the ball of radius `r` around the origin,
/// per decade of elapsed time, for paths started at `(r, 0, …)`.
pub fn return_statistics<T: Real>(
    exponent: &LevyExponent<T>,
    horizon: f64,
    step: f64,
    r: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ReturnStatistics> {
    if !(step > 0.0) || !(horizon >= step) || !(r > 0.0) || n_paths == 0 {
        return Err(Error::InvalidParameter("return statistics need horizon ≥ step > 0, r > 0 and paths".into()));
    }
    let steps = (horizon / step).round();
    if steps > MAX_STEPS {
        return Err(Error::InvalidParameter(format!("{steps} steps per path exceeds {MAX_STEPS}")));
    }
    let steps = steps as usize;
    let edges = decade_edges(horizon);
    let n_dec = edges.len() - 1;
    let d = exponent.d;
    let per_path: Vec<Vec<u64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let mut x = vec![0.0; d];
            x[0] = r;
            let mut counts = vec![0u64; n_dec];
            let mut dec = 0;
            for k in 1..=steps {
                let inc = sample_increment(exponent, step, &mut rng)?;
                x.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
                let t = k as f64 * step;
                while dec + 1 < n_dec && t > edges[dec + 1] {
                    dec += 1;
                }
                if x.iter().map(|v| v * v).sum::<f64>() <= r * r {
                    counts[dec] += 1;
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let np = n_paths as f64;
    let decades = (0..n_dec)
        .map(|k| {
            let vals: Vec<f64> = per_path.iter().map(|c| c[k] as f64).collect();
            let mean = vals.iter().sum::<f64>() / np;
            let var = if n_paths > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (np - 1.0) } else { 0.0 };
            DecadeStat { start: edges[k], end: edges[k + 1], mean, std_error: (var / np).sqrt() }
        })
        .collect();
    Ok(ReturnStatistics { decades, per_path, seed, radius: r, step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn first(samples: &[Vec<f64>]) -> Vec<f64> {
        samples.iter().map(|s| s[0]).collect()
    }

    #[test]
    fn gaussian_variance() {
        let e = LevyExponent::gaussian(1, 1.0f64).unwrap();
        let xs = first(&sample_increments(&e, 4.0, 100_000, 7).unwrap());
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((v - 4.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn cauchy_quartiles() {
        let e = LevyExponent::cauchy(1, 1.0f64).unwrap();
        let mut xs = first(&sample_increments(&e, 1.0, 100_000, 11).unwrap());
        xs.sort_by(|a, b| a.total_cmp(b));
        // Quantile oracle for C(0, 1): tan(π(p − ½)).
        let q1 = xs[xs.len() / 4];
        let q3 = xs[3 * xs.len() / 4];
        assert!((q1 - (PI * (0.25 - 0.5)).tan()).abs() < 0.05);
        assert!((q3 - (PI * (0.75 - 0.5)).tan()).abs() < 0.05);
    }

    #[test]
    fn positive_stable_laplace_transform() {
        // E exp(−sA) = exp(−s^β) checked at a few s.
        let beta = 0.4;
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|i| positive_stable(beta, &mut stream_rng(3, i))).collect();
        for &s in &[0.5, 1.0, 2.0] {
            let m = draws.iter().map(|a| (-s * a).exp()).sum::<f64>() / n as f64;
            assert!((m - (-s.powf(beta)).exp()).abs() < 5e-3, "s={s}: {m}");
        }
    }

    #[test]
    fn ks_against_torus_density() {
        let grid = GridSpec::new(1, 1 << 16, 400.0).unwrap();
        for (e, t) in [
            (LevyExponent::stable(1, 1.0, 0.5).unwrap(), 1.0),
            (LevyExponent::cauchy(1, 1.0).unwrap(), 2.0),
            (LevyExponent::gaussian(1, 1.0).unwrap(), 1.0),
            (LevyExponent::stable(1, 1.0, 1.5).unwrap(), 1.0),
        ] {
            let xs = sample_increments(&e, t, 10_000, 5).unwrap();
            let ks = ks_against_density(&xs, &e, t, &grid).unwrap();
            assert!(ks < 0.02, "{}: {ks}", e.label());
        }
    }

    #[test]
    fn multivariate_marginals_match() {
        let grid = GridSpec::new(1, 1 << 14, 200.0).unwrap();
        for e in [
            LevyExponent::cauchy(2, 1.0).unwrap(),
            LevyExponent::cauchy(3, 1.0).unwrap(),
            LevyExponent::stable(2, 1.0, 1.5).unwrap(),
            LevyExponent::gaussian(3, 1.0).unwrap(),
        ] {
            let xs = sample_increments(&e, 1.0, 10_000, 9).unwrap();
            assert!(ks_against_density(&xs, &e, 1.0, &grid).unwrap() < 0.02, "{}", e.label());
        }
    }

    #[test]
    fn stable_self_similarity() {
        let alpha = 0.8;
        let e = LevyExponent::stable(1, 1.0, alpha).unwrap();
        let a = first(&sample_increments(&e, 2.0, 10_000, 21).unwrap());
        let b: Vec<f64> = first(&sample_increments(&e, 1.0, 10_000, 22).unwrap())
            .iter()
            .map(|x| x * 2f64.powf(1.0 / alpha))
            .collect();
        // Two-sample KS with the empirical CDF of `b` as reference.
        let mut sb = b.clone();
        sb.sort_by(|x, y| x.total_cmp(y));
        let cdf = |x: f64| sb.partition_point(|v| *v <= x) as f64 / sb.len() as f64;
        assert!(ks_distance(&a, cdf) < 0.03);
    }

    #[test]
    fn tabulated_is_unsupported() {
        let table = crate::levy_model::RadialTable::new(vec![0.1, 1.0, 2.0], vec![0.1, 1.0, 2.0]).unwrap();
        let e = LevyExponent::tabulated(1, 1.0f64, table).unwrap();
        assert!(matches!(sample_increment(&e, 1.0, &mut stream_rng(0, 0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn streams_are_worker_independent() {
        let e = LevyExponent::cauchy(2, 1.0f64).unwrap();
        let a = sample_increments(&e, 1.0, 64, 99).unwrap();
        let b: Vec<Vec<f64>> = (0..64).map(|i| sample_increment(&e, 1.0, &mut stream_rng(99, i)).unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn return_signatures() {
        let rec = return_statistics(&LevyExponent::cauchy(1, 1.0f64).unwrap(), 1e4, 1.0, 1.0, 200, 1).unwrap();
        assert_eq!(rec.decades.len(), 4);
        assert!(rec.decades.iter().all(|d| d.mean > 0.0));
        let tr = return_statistics(&LevyExponent::cauchy(2, 1.0f64).unwrap(), 1e4, 1.0, 1.0, 200, 1).unwrap();
        assert!(tr.final_share() < 0.1);
        let g3 = return_statistics(&LevyExponent::gaussian(3, 1.0f64).unwrap(), 1e4, 1.0, 1.0, 200, 1).unwrap();
        assert!(g3.final_share() < 0.1);
    }

    #[test]
    fn decade_layout() {
        assert_eq!(decade_edges(1e4), vec![0.0, 10.0, 100.0, 1000.0, 1e4]);
        assert_eq!(decade_edges(5.0), vec![0.0, 5.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cms_is_symmetric_in_law(seed in 0u64..1000, alpha in 0.3f64..2.0) {
            // Sign flips of V give −X; the sampler maps V ↦ −V to −X exactly.
            let mut r = stream_rng(seed, 0);
            let x = standard_symmetric_stable(alpha, &mut r);
            prop_assert!(x.is_finite());
        }

        #[test]
        fn ks_distance_bounds(xs in prop::collection::vec(-5.0f64..5.0, 1..200)) {
            let k = ks_distance(&xs, |x| 1.0 / (1.0 + (-x).exp()));
            prop_assert!((0.0..=1.0).contains(&k));
            prop_assert!(k >= 0.5 / xs.len() as f64);
        }
    }
}
