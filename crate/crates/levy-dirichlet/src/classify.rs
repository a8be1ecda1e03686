//! Recurrence and transience verdicts from the Lévy exponent, and potential
//! densities `∫₀^∞ p_t(x|0)dt` in closed form and by time quadrature.

use crate::density::density_at;
use crate::error::{Error, Result};
use crate::levy_model::{ExponentKind, LevyExponent, ModelSpec};
use crate::quad::integrate;
use crate::scalar::{to_f64, Real};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Number of shells `ε_k = 2^{−k}`, `k = 1..=SHELLS`.
pub const SHELLS: usize = 20;

/// Shell-slope magnitude (per halving of the radius) below which growth is
/// read as a logarithmic law.
pub const LOG_LAW_SLOPE: f64 = 0.02;

/// Minimum coefficient of determination for a growth law fit.
pub const MIN_R2: f64 = 0.99;

/// Local decay exponent of `t ↦ p_t(x)` above which the time integral is
/// read as convergent.
pub const CONVERGENT_DECAY: f64 = 1.05;

/// Recurrence verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Recurrent,
    Transient,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Recurrent => "Recurrent",
            Verdict::Transient => "Transient",
        })
    }
}

/// Growth law fitted to the criterion integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthLaw {
    /// Geometric decay of the shell contributions; the integrals converge.
    Stable,
    /// Constant shell contributions; the integrals grow like `log(1/ε)`.
    Logarithmic,
    /// Geometrically growing shells; the integrals grow like `ε^{−p}`.
    Power { exponent: f64 },
}

/// Output of [`classify_exponent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub verdict: Verdict,
    /// `I_k = ∫_{ε_k ≤ ‖z‖ ≤ 1} 1/ψ(z) dz` for `k = 1..=20`.
    pub criterion_values: Vec<f64>,
    pub growth: GrowthLaw,
    /// Slope of `log(I_k − I_{k−1})` against `k`.
    pub shell_slope: f64,
    pub r2: f64,
    pub analytic_note: Option<String>,
}

impl ClassificationResult {
    /// Ratio `I_20 / I_1`.
    pub fn growth_ratio(&self) -> f64 {
        self.criterion_values[SHELLS - 1] / self.criterion_values[0]
    }

    /// Largest difference among the last five criterion values.
    pub fn tail_spread(&self) -> f64 {
        let tail = &self.criterion_values[SHELLS - 5..];
        tail[4] - tail[0]
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0)
}

/// Least-squares line through `(x, y)`; returns slope, intercept and `R²`
/// (taken as 1 for an exactly constant response).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-24 * (1.0 + my * my) { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Evaluates the integral criterion on dyadic shells of the unit ball and
/// reads the verdict off the growth of the shell contributions. Stable
/// exponents are cross-checked against the rule `d ≤ α ⇔ recurrent`.
pub fn classify_exponent<T: Real>(exponent: &LevyExponent<T>) -> Result<ClassificationResult> {
    let d = exponent.d;
    let area = sphere_area(d);
    let shells: Vec<f64> = (1..=SHELLS)
        .into_par_iter()
        .map(|k| {
            let lo = 0.5f64.powi(k as i32);
            let hi = 2.0 * lo;
            // Probe the exponent once so table range errors surface here.
            let psi_lo = to_f64(exponent.psi_radial(T::from(lo).unwrap())?);
            if !(psi_lo > 0.0) {
                return Err(Error::InvalidParameter("psi must be positive off the origin".into()));
            }
            let f = |r: f64| {
                let psi = to_f64(exponent.psi_radial(T::from(r).unwrap()).unwrap_or_else(|_| T::nan()));
                r.powi(d as i32 - 1) / psi
            };
            Ok(area * integrate(f, lo, hi, 0.0, 1e-12))
        })
        .collect::<Result<_>>()?;
    if shells.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::NonFinite("criterion shell integral".into()));
    }
    let criterion_values: Vec<f64> = shells
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    let ks: Vec<f64> = (1..=SHELLS).map(|k| k as f64).collect();
    let logs: Vec<f64> = shells.iter().map(|s| s.ln()).collect();
    let (slope, _, r2) = linear_fit(&ks, &logs);
    if r2 < MIN_R2 {
        return Err(Error::AmbiguousGrowth { r2 });
    }
    let (verdict, growth) = if slope < -LOG_LAW_SLOPE {
        (Verdict::Transient, GrowthLaw::Stable)
    } else if slope <= LOG_LAW_SLOPE {
        (Verdict::Recurrent, GrowthLaw::Logarithmic)
    } else {
        (Verdict::Recurrent, GrowthLaw::Power { exponent: slope / std::f64::consts::LN_2 })
    };
    let analytic_note = match &exponent.kind {
        ExponentKind::TabulatedRadial(_) => None,
        _ => {
            let index = to_f64(exponent.index());
            let analytic = if d as f64 <= index { Verdict::Recurrent } else { Verdict::Transient };
            if analytic != verdict {
                return Err(Error::ClassificationMismatch { numeric: verdict.to_string(), analytic: analytic.to_string() });
            }
            let rel = if d as f64 <= index { "≤" } else { ">" };
            Some(format!("1/psi ~ rho^-{index} near 0 against volume rho^{}: d = {d} {rel} {index}", d - 1))
        }
    };
    Ok(ClassificationResult { verdict, criterion_values, growth, shell_slope: slope, r2, analytic_note })
}

/// Kinds with a closed-form potential density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialKind {
    Gaussian,
    Cauchy,
}

/// Potential density at `x` for the unit-scale Gaussian (`ψ = ‖z‖²/2`) or
/// Cauchy (`ψ = ‖z‖`) law; `+∞` in the recurrent dimensions.
pub fn potential_closed_form(kind: PotentialKind, d: usize, x: &[f64]) -> Result<f64> {
    if x.len() != d {
        return Err(Error::InvalidParameter("point dimension differs from d".into()));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let df = d as f64;
    let finite = match kind {
        PotentialKind::Gaussian => d >= 3,
        PotentialKind::Cauchy => d >= 2,
    };
    if !finite {
        return Ok(f64::INFINITY);
    }
    if r == 0.0 {
        return Err(Error::ZeroPoint);
    }
    Ok(match kind {
        PotentialKind::Gaussian => 0.5 * PI.powf(-df / 2.0) * libm::tgamma(df / 2.0 - 1.0) * r.powf(2.0 - df),
        PotentialKind::Cauchy => 0.5 * PI.powf(-(df + 1.0) / 2.0) * libm::tgamma((df - 1.0) / 2.0) * r.powf(1.0 - df),
    })
}

/// Start of the time quadrature.
pub const POTENTIAL_T_START: f64 = 1e-3;

/// Log-spaced time nodes per decade.
pub const NODES_PER_DECADE: usize = 8;

/// Output of [`potential_numeric`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialEstimate {
    pub verdict: Verdict,
    /// Stabilized potential including the fitted tail; `None` if divergent.
    pub value: Option<f64>,
    /// Exponent `q` in `P(T) ~ T^q`, from the local decay `p` of the
    /// integrand as `q = 1 − p`; negative when convergent.
    pub growth_exponent: f64,
    /// Slope of `P(T)` against `log T` over the final two decades.
    pub log_slope: f64,
    /// Partial integrals `(T_j, P(T_j))`.
    pub partials: Vec<(f64, f64)>,
}

/// Integrates `t ↦ p_t(x|θ)` over log-spaced times in `[10⁻³, T_max]`. A
/// convergent integrand gets its power-law tail beyond `T_max` added from
/// the local decay exponent at the last nodes.
pub fn potential_numeric<T: Real>(model: &ModelSpec<T>, x: &[f64], t_max: f64) -> Result<PotentialEstimate> {
    if x.len() != model.d() {
        return Err(Error::InvalidParameter("point dimension differs from d".into()));
    }
    if !(t_max > 100.0 * POTENTIAL_T_START) {
        return Err(Error::InvalidParameter("T_max must exceed 0.1".into()));
    }
    let r = x.iter().zip(&model.theta).map(|(a, b)| (a - to_f64(*b)).powi(2)).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::ZeroPoint);
    }
    let exponent = &model.exponent;
    let decades = (t_max / POTENTIAL_T_START).log10();
    let count = (decades * NODES_PER_DECADE as f64).ceil() as usize;
    let nodes: Vec<f64> = (0..=count)
        .map(|j| POTENTIAL_T_START * (t_max / POTENTIAL_T_START).powf(j as f64 / count as f64))
        .collect();
    let pieces: Vec<f64> = nodes
        .par_windows(2)
        .map(|w| {
            let failure = std::cell::RefCell::new(None);
            let v = integrate(
                |t| {
                    density_at(exponent, t, r).unwrap_or_else(|e| {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    })
                },
                w[0],
                w[1],
                1e-14,
                1e-9,
            );
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok(v),
            }
        })
        .collect::<Result<_>>()?;
    // The integrand vanishes at t = 0 for x ≠ 0; the first sliver is linear.
    let head = 0.5 * POTENTIAL_T_START * density_at(exponent, POTENTIAL_T_START, r)?;
    let mut partials = Vec::with_capacity(nodes.len());
    let mut acc = head;
    partials.push((nodes[0], acc));
    for (t, p) in nodes[1..].iter().zip(&pieces) {
        acc += p;
        partials.push((*t, acc));
    }
    let f_end = density_at(exponent, t_max, r)?;
    let f_prev = density_at(exponent, t_max / 2.0, r)?;
    let decay = (f_prev / f_end).ln() / std::f64::consts::LN_2;
    let tail_start = nodes.len() - 1 - 2 * NODES_PER_DECADE.min(count / 2);
    let (lx, ly): (Vec<f64>, Vec<f64>) = partials[tail_start..].iter().map(|&(t, p)| (t.ln(), p)).unzip();
    let (log_slope, _, _) = linear_fit(&lx, &ly);
    let (verdict, value) = if decay > CONVERGENT_DECAY {
        (Verdict::Transient, Some(acc + f_end * t_max / (decay - 1.0)))
    } else {
        (Verdict::Recurrent, None)
    };
    Ok(PotentialEstimate { verdict, value, growth_exponent: 1.0 - decay, log_slope, partials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stable(d: usize, a: f64) -> LevyExponent<f64> {
        if a == 2.0 {
            LevyExponent::gaussian(d, 1.0).unwrap()
        } else {
            LevyExponent::stable(d, 1.0, a).unwrap()
        }
    }

    #[test]
    fn dichotomy_matrix() {
        for a in [0.5, 0.8, 1.0, 1.2, 1.5, 2.0] {
            for d in 1..=3 {
                let r = classify_exponent(&stable(d, a)).unwrap();
                let expect = if d as f64 <= a { Verdict::Recurrent } else { Verdict::Transient };
                assert_eq!(r.verdict, expect, "alpha {a} d {d}");
                if expect == Verdict::Recurrent {
                    assert!(r.growth_ratio() > 10.0, "alpha {a} d {d}: {}", r.growth_ratio());
                }
            }
        }
    }

    #[test]
    fn criterion_matches_closed_form_shells() {
        // ∫_{ε}^{1} ρ^{d−1−α}dρ times the sphere area, written out by hand.
        for (d, a) in [(1usize, 0.5f64), (2, 1.0), (3, 2.0), (1, 1.5)] {
            let r = classify_exponent(&stable(d, a)).unwrap();
            let c = if a == 2.0 { 0.5 } else { 1.0 };
            for (k, v) in r.criterion_values.iter().enumerate() {
                let eps = 0.5f64.powi(k as i32 + 1);
                let p = d as f64 - a;
                let exact = sphere_area(d) / c * if p == 0.0 { -eps.ln() } else { (1.0 - eps.powf(p)) / p };
                assert_relative_eq!(*v, exact, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn log_law_for_the_critical_case() {
        let r = classify_exponent(&stable(1, 1.0)).unwrap();
        assert_eq!(r.growth, GrowthLaw::Logarithmic);
        let r = classify_exponent(&stable(1, 1.5)).unwrap();
        assert!(matches!(r.growth, GrowthLaw::Power { exponent } if (exponent - 0.5).abs() < 1e-6));
    }

    #[test]
    fn transient_values_converge() {
        // Shell contributions shrink by exactly 2^{−(d−α)} per halving.
        for (d, a) in [(3usize, 2.0f64), (2, 1.0), (1, 0.5)] {
            let r = classify_exponent(&stable(d, a)).unwrap();
            let v = &r.criterion_values;
            let ratio = (v[19] - v[18]) / (v[18] - v[17]);
            assert_relative_eq!(ratio, 0.5f64.powf(d as f64 - a), max_relative = 1e-8);
        }
    }

    #[test]
    fn closed_forms_at_unit_distance() {
        let target = 1.0 / (2.0 * PI);
        assert_relative_eq!(potential_closed_form(PotentialKind::Gaussian, 3, &[1.0, 0.0, 0.0]).unwrap(), target, max_relative = 1e-14);
        assert_relative_eq!(potential_closed_form(PotentialKind::Cauchy, 2, &[0.0, 1.0]).unwrap(), target, max_relative = 1e-14);
        assert_eq!(potential_closed_form(PotentialKind::Cauchy, 1, &[3.0]).unwrap(), f64::INFINITY);
        assert_eq!(potential_closed_form(PotentialKind::Gaussian, 2, &[0.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(matches!(potential_closed_form(PotentialKind::Gaussian, 3, &[0.0; 3]), Err(Error::ZeroPoint)));
    }

    #[test]
    fn numeric_potentials_match_closed_forms() {
        for r in [0.5, 1.0, 2.0] {
            let g = ModelSpec::centered(LevyExponent::gaussian(3, 1.0).unwrap());
            let num = potential_numeric(&g, &[r, 0.0, 0.0], 1e3).unwrap();
            let exact = potential_closed_form(PotentialKind::Gaussian, 3, &[r, 0.0, 0.0]).unwrap();
            assert!((num.value.unwrap() / exact - 1.0).abs() < 0.01);
            let cm = ModelSpec::centered(LevyExponent::cauchy(2, 1.0).unwrap());
            let num = potential_numeric(&cm, &[0.0, r], 1e3).unwrap();
            let exact = potential_closed_form(PotentialKind::Cauchy, 2, &[0.0, r]).unwrap();
            assert!((num.value.unwrap() / exact - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn cauchy_line_potential_grows_logarithmically() {
        let m = ModelSpec::centered(LevyExponent::cauchy(1, 1.0).unwrap());
        let num = potential_numeric(&m, &[1.0], 1e3).unwrap();
        assert_eq!(num.verdict, Verdict::Recurrent);
        assert!(num.value.is_none());
        // Oracle: the partial integral (1/2π)·log(1 + T²) in closed form.
        for &(t, p) in &num.partials[8..] {
            assert_relative_eq!(p, (1.0 + t * t).ln() / (2.0 * PI), max_relative = 1e-6);
        }
        assert!((num.log_slope * PI - 1.0).abs() < 0.1);
    }

    #[test]
    fn numeric_and_integral_verdicts_agree() {
        let cases = [(1, 2.0), (2, 2.0), (3, 2.0), (1, 1.0), (2, 1.0), (3, 1.0), (1, 0.5), (1, 0.8), (1, 1.2), (1, 1.5)];
        for (d, a) in cases {
            let e = stable(d, a);
            let x: Vec<f64> = (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
            let num = potential_numeric(&ModelSpec::centered(e.clone()), &x, 1e3).unwrap();
            assert_eq!(num.verdict, classify_exponent(&e).unwrap().verdict, "alpha {a} d {d}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn verdict_is_scale_invariant(c in 1e-3f64..1e3, a_idx in 0usize..6, d in 1usize..4) {
            let a = [0.5, 0.8, 1.0, 1.2, 1.5, 2.0][a_idx];
            let e = if a == 2.0 { LevyExponent::gaussian(d, c).unwrap() } else { LevyExponent::stable(d, c, a).unwrap() };
            prop_assert_eq!(classify_exponent(&e).unwrap().verdict, classify_exponent(&stable(d, a)).unwrap().verdict);
        }

        #[test]
        fn criterion_values_increase(a in 0.3f64..2.0, d in 1usize..4) {
            if let Ok(r) = classify_exponent(&LevyExponent::stable(d, 1.0, a).unwrap()) {
                prop_assert!(r.criterion_values.windows(2).all(|w| w[1] > w[0]));
            }
        }
    }
}
