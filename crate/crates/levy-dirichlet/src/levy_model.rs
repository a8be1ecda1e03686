//! Symmetric infinitely divisible location families described by a radial
//! Lévy exponent ψ.
//!
//! The exponent carries the scale `c`: `ψ(z) = c‖z‖²/2` for the Gaussian
//! kind and `ψ(z) = c‖z‖^α` for the isotropic stable kind. The observation
//! law `p(x|θ)` has characteristic function `exp(−ψ(z) + i⟨θ,z⟩)` and the
//! transition law at time `t` has `exp(−tψ(z) + i⟨θ,z⟩)`. The uniform-prior
//! predictive density is therefore the time-2 law.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Monotone cubic (Fritsch–Carlson) interpolant of a sampled radial exponent.
///
/// Below the first tabulated radius the exponent follows the power law
/// through the first two samples, so `ψ(0) = 0` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable<T> {
    rho: Vec<T>,
    psi: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> RadialTable<T> {
    /// Builds the interpolant from strictly increasing positive radii and
    /// nondecreasing positive exponent values.
    pub fn new(rho: Vec<T>, psi: Vec<T>) -> Result<Self> {
        if rho.len() != psi.len() || rho.len() < 2 {
            return Err(Error::InvalidParameter(
                "radial table needs at least two (rho, psi) rows of equal length".into(),
            ));
        }
        if rho[0] <= T::zero() || psi[0] <= T::zero() {
            return Err(Error::InvalidParameter(
                "radial table must start at rho > 0 with psi > 0".into(),
            ));
        }
        for w in rho.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter("radial table rho must be strictly increasing".into()));
            }
        }
        for w in psi.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidParameter("radial table psi must be nondecreasing".into()));
            }
        }
        let n = rho.len();
        let secant: Vec<T> = (0..n - 1)
            .map(|i| (psi[i + 1] - psi[i]) / (rho[i + 1] - rho[i]))
            .collect();
        let mut slopes = vec![T::zero(); n];
        slopes[0] = secant[0];
        slopes[n - 1] = secant[n - 2];
        for i in 1..n - 1 {
            slopes[i] = if secant[i - 1] * secant[i] <= T::zero() {
                T::zero()
            } else {
                let two = lit::<T>(2.0);
                let h0 = rho[i] - rho[i - 1];
                let h1 = rho[i + 1] - rho[i];
                let w1 = two * h1 + h0;
                let w2 = h1 + two * h0;
                (w1 + w2) / (w1 / secant[i - 1] + w2 / secant[i])
            };
        }
        for i in 0..n - 1 {
            if secant[i] == T::zero() {
                slopes[i] = T::zero();
                slopes[i + 1] = T::zero();
            }
        }
        Ok(Self { rho, psi, slopes })
    }

    /// Reads a two-column whitespace separated `rho psi` text file. Lines
    /// starting with `#` are ignored, as is a leading `rho = 0` row.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rho = Vec::new();
        let mut psi = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if cols.len() < 2 {
                return Err(Error::Config(format!("table line {}: expected two columns", lineno + 1)));
            }
            let parse = |s: &str| -> Result<T> {
                s.parse::<f64>()
                    .map(lit::<T>)
                    .map_err(|e| Error::Config(format!("table line {}: {e}", lineno + 1)))
            };
            let (r, p) = (parse(cols[0])?, parse(cols[1])?);
            if r == T::zero() {
                continue;
            }
            rho.push(r);
            psi.push(p);
        }
        Self::new(rho, psi)
    }

    /// Largest tabulated radius.
    pub fn max_radius(&self) -> T {
        *self.rho.last().expect("nonempty table")
    }

    /// Power-law exponent used between the origin and the first sample.
    pub fn origin_exponent(&self) -> T {
        (self.psi[1] / self.psi[0]).ln() / (self.rho[1] / self.rho[0]).ln()
    }

    /// Evaluates the interpolant at radius `r ≥ 0`.
    pub fn eval(&self, r: T) -> Result<T> {
        let max = self.max_radius();
        if r > max * (T::one() + lit(1e-12)) {
            return Err(Error::OutOfRange { rho: to_f64(r), max: to_f64(max) });
        }
        if r <= T::zero() {
            return Ok(T::zero());
        }
        if r <= self.rho[0] {
            return Ok(self.psi[0] * (r / self.rho[0]).powf(self.origin_exponent()));
        }
        let r = r.min(max);
        let i = match self.rho.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => return Ok(self.psi[i]),
            Err(i) => i - 1,
        };
        let h = self.rho[i + 1] - self.rho[i];
        let s = (r - self.rho[i]) / h;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = (T::one() + two * s) * (T::one() - s) * (T::one() - s);
        let h10 = s * (T::one() - s) * (T::one() - s);
        let h01 = s * s * (three - two * s);
        let h11 = s * s * (s - T::one());
        Ok(h00 * self.psi[i] + h10 * h * self.slopes[i] + h01 * self.psi[i + 1] + h11 * h * self.slopes[i + 1])
    }
}

/// Kind of radial exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExponentKind<T> {
    /// `ψ(z) = c‖z‖²/2`.
    Gaussian,
    /// `ψ(z) = c‖z‖^α` with `0 < α ≤ 2`; `α = 1` is the Cauchy law.
    IsotropicStable { alpha: T },
    /// `ψ(z) = c·table(‖z‖)`.
    TabulatedRadial(RadialTable<T>),
}

/// A symmetric radial Lévy exponent in dimension `d ≤ 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyExponent<T> {
    pub kind: ExponentKind<T>,
    pub d: usize,
    pub c: T,
}

impl<T: Real> LevyExponent<T> {
    fn checked(kind: ExponentKind<T>, d: usize, c: T) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {d} outside 1..=3")));
        }
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParameter("scale c must be positive and finite".into()));
        }
        if let ExponentKind::IsotropicStable { alpha } = &kind {
            if !(*alpha > T::zero() && *alpha <= lit(2.0)) {
                return Err(Error::InvalidParameter("alpha must lie in (0, 2]".into()));
            }
        }
        Ok(Self { kind, d, c })
    }

    /// Gaussian exponent with variance `c` per axis at unit time.
    pub fn gaussian(d: usize, c: T) -> Result<Self> {
        Self::checked(ExponentKind::Gaussian, d, c)
    }

    /// Isotropic stable exponent `c‖z‖^α`.
    pub fn stable(d: usize, c: T, alpha: T) -> Result<Self> {
        Self::checked(ExponentKind::IsotropicStable { alpha }, d, c)
    }

    /// Isotropic Cauchy exponent `c‖z‖`.
    pub fn cauchy(d: usize, c: T) -> Result<Self> {
        Self::stable(d, c, T::one())
    }

    /// Tabulated radial exponent scaled by `c`.
    pub fn tabulated(d: usize, c: T, table: RadialTable<T>) -> Result<Self> {
        Self::checked(ExponentKind::TabulatedRadial(table), d, c)
    }

    /// Stability index: 2 for Gaussian, α for stable, the origin power law
    /// for tabulated exponents.
    pub fn index(&self) -> T {
        match &self.kind {
            ExponentKind::Gaussian => lit(2.0),
            ExponentKind::IsotropicStable { alpha } => *alpha,
            ExponentKind::TabulatedRadial(t) => t.origin_exponent(),
        }
    }

    /// True for the isotropic stable kind with `α = 1`.
    pub fn is_cauchy(&self) -> bool {
        matches!(self.kind, ExponentKind::IsotropicStable { alpha } if alpha == T::one())
    }

    /// Radial profile `ψ(ρ)` for `ρ ≥ 0`.
    pub fn psi_radial(&self, rho: T) -> Result<T> {
        let rho = rho.abs();
        Ok(match &self.kind {
            ExponentKind::Gaussian => self.c * rho * rho / lit(2.0),
            ExponentKind::IsotropicStable { alpha } => {
                if rho == T::zero() {
                    T::zero()
                } else {
                    self.c * rho.powf(*alpha)
                }
            }
            ExponentKind::TabulatedRadial(t) => self.c * t.eval(rho)?,
        })
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            ExponentKind::Gaussian => format!("gaussian(d={},c={})", self.d, self.c),
            ExponentKind::IsotropicStable { alpha } => {
                format!("stable(d={},c={},alpha={})", self.d, self.c, alpha)
            }
            ExponentKind::TabulatedRadial(_) => format!("tabulated(d={},c={})", self.d, self.c),
        }
    }
}

/// Evaluates `ψ(z)` for a `d`-vector `z`.
pub fn psi_eval<T: Real>(exponent: &LevyExponent<T>, z: &[T]) -> Result<T> {
    if z.len() != exponent.d {
        return Err(Error::InvalidParameter(format!(
            "vector of length {} for a {}-dimensional exponent",
            z.len(),
            exponent.d
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("argument of psi".into()));
    }
    let r = z.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    exponent.psi_radial(r)
}

/// Location model: an exponent plus the location `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec<T> {
    pub exponent: LevyExponent<T>,
    pub theta: Vec<T>,
}

impl<T: Real> ModelSpec<T> {
    /// Builds a model, checking that `θ` has the exponent's dimension.
    pub fn new(exponent: LevyExponent<T>, theta: Vec<T>) -> Result<Self> {
        if theta.len() != exponent.d {
            return Err(Error::InvalidParameter("location dimension mismatch".into()));
        }
        Ok(Self { exponent, theta })
    }

    /// Model centred at the origin.
    pub fn centered(exponent: LevyExponent<T>) -> Self {
        let d = exponent.d;
        Self { exponent, theta: vec![T::zero(); d] }
    }

    /// The same exponent relocated to `theta`.
    pub fn at(&self, theta: &[T]) -> Result<Self> {
        Self::new(self.exponent.clone(), theta.to_vec())
    }

    /// Dimension.
    pub fn d(&self) -> usize {
        self.exponent.d
    }
}

/// Time at which the uniform-prior predictive density is the transition law.
pub const PREDICTIVE_TIME: f64 = 2.0;

/// Characteristic function `exp(−tψ(z) + i⟨θ,z⟩)` of the time-`t` law.
pub fn char_fn<T: Real>(model: &ModelSpec<T>, t: T, z: &[T]) -> Result<Complex<T>> {
    if !(t > T::zero()) {
        return Err(Error::InvalidParameter("time must be positive".into()));
    }
    let psi = psi_eval(&model.exponent, z)?;
    let phase = model.theta.iter().zip(z).fold(T::zero(), |a, (&th, &zz)| a + th * zz);
    Ok(Complex::from_polar((-t * psi).exp(), phase))
}
