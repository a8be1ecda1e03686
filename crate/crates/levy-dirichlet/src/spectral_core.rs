//! Uniform periodic grids, Fourier transforms and inner products.
//!
//! A [`GridSpec`] covers `[−L, L)^d` with `n` points per axis. The
//! transform convention is
//!
//! ```text
//! f̂(z) = (2π)^{−d/2} ∫ e^{i⟨z,y⟩} f(y) dy,     f(y) = (2π)^{−d/2} ∫ e^{−i⟨z,y⟩} f̂(z) dz
//! ```
//!
//! discretized with `Δx = 2L/n` and dual spacing `Δz = π/L`, so that
//! `Σ|f|²Δx^d = Σ|f̂|²Δz^d` holds exactly. Spectral coefficients are stored
//! in FFT order: index `k` carries frequency `k·Δz` for `k < n/2` and
//! `(k − n)·Δz` otherwise.

use crate::error::{Error, Result};
use crate::scalar::{lit, pairwise_sum, to_f64, Real};
use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Uniform grid on `[−L, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub d: usize,
    pub n: usize,
    pub l: T,
}

impl<T: Real> GridSpec<T> {
    /// Validates `d ≤ 3`, `n` a power of two (at least 2) and `L > 0`.
    pub fn new(d: usize, n: usize, l: T) -> Result<Self> {
        if d == 0 || d > 3 {
            return Err(Error::InvalidParameter(format!("grid dimension {d} outside 1..=3")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size {n} is not a power of two")));
        }
        if !(l > T::zero()) || !l.is_finite() {
            return Err(Error::InvalidParameter("half-extent must be positive".into()));
        }
        Ok(Self { d, n, l })
    }

    /// Default desk-scale grid: `d=1` uses `n=4096` with `L=40` for
    /// Gaussian-type and `L=200` for heavy-tailed models; `d=2` uses
    /// `n=512, L=60`; `d=3` uses `n=128, L=30`.
    pub fn default_for(d: usize, gaussian: bool) -> Result<Self> {
        match d {
            1 => Self::new(1, 4096, lit(if gaussian { 40.0 } else { 200.0 })),
            2 => Self::new(2, 512, lit(60.0)),
            3 => Self::new(3, 128, lit(30.0)),
            _ => Err(Error::InvalidParameter(format!("grid dimension {d} outside 1..=3"))),
        }
    }

    /// Same extent with `2n` points per axis.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }

    /// Spatial spacing `2L/n`.
    pub fn dx(&self) -> T {
        lit::<T>(2.0) * self.l / lit(self.n as f64)
    }

    /// Dual spacing `π/L`.
    pub fn dz(&self) -> T {
        T::PI() / self.l
    }

    /// Cell volume `Δx^d`.
    pub fn cell(&self) -> T {
        self.dx().powi(self.d as i32)
    }

    /// Dual cell volume `Δz^d`.
    pub fn dual_cell(&self) -> T {
        self.dz().powi(self.d as i32)
    }

    /// Number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Always false; grids have at least two points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of axis index `i`.
    pub fn coord(&self, i: usize) -> T {
        -self.l + lit::<T>(i as f64) * self.dx()
    }

    /// Integer frequency of axis index `k` in FFT order.
    pub fn wrapped(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Frequency of axis index `k` in FFT order.
    pub fn freq(&self, k: usize) -> T {
        lit::<T>(self.wrapped(k) as f64) * self.dz()
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.d).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// Joins per-axis indices into a flat row-major index.
    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.d).fold(0, |acc, &i| acc * self.n + i)
    }

    /// Spatial point of a flat index.
    pub fn point(&self, flat: usize) -> Vec<T> {
        let idx = self.unflatten(flat);
        (0..self.d).map(|a| self.coord(idx[a])).collect()
    }

    /// Euclidean norm of the spatial point of a flat index.
    pub fn radius(&self, flat: usize) -> T {
        self.point(flat).iter().fold(T::zero(), |a, &v| a + v * v).sqrt()
    }

    /// Frequency vector of a flat spectral index.
    pub fn frequency(&self, flat: usize) -> Vec<T> {
        let idx = self.unflatten(flat);
        (0..self.d).map(|a| self.freq(idx[a])).collect()
    }

    /// Euclidean norm of the frequency of a flat spectral index.
    pub fn frequency_norm(&self, flat: usize) -> T {
        self.frequency(flat).iter().fold(T::zero(), |a, &v| a + v * v).sqrt()
    }

    /// Flat index of the spatial origin `(0, …, 0)`.
    pub fn origin(&self) -> usize {
        self.flatten(&[self.n / 2; 3][..self.d])
    }

    /// Flat index of the grid point nearest to `x` (wrapped onto the torus).
    pub fn nearest(&self, x: &[T]) -> usize {
        let idx: Vec<usize> = x
            .iter()
            .take(self.d)
            .map(|&v| {
                let k = ((v + self.l) / self.dx()).round();
                let k = to_f64(k) as i64;
                k.rem_euclid(self.n as i64) as usize
            })
            .collect();
        self.flatten(&idx)
    }

    /// Short content hash identifying the grid.
    pub fn hash(&self) -> String {
        let text = format!("d={} n={} L={:.17e}", self.d, self.n, to_f64(self.l));
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Real function sampled on a grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Field<T> {
    /// Wraps values, checking the length.
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: GridSpec<T>, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    /// Constant field.
    pub fn constant(grid: GridSpec<T>, v: T) -> Self {
        Self { grid, values: vec![v; grid.len()] }
    }

    /// `Δx^d Σ values`.
    pub fn integral(&self) -> T {
        pairwise_sum(&self.values) * self.grid.cell()
    }

    /// Rescales to unit integral.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.integral();
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::NonFinite("field mass not positive".into()));
        }
        for v in &mut self.values {
            *v = *v / m;
        }
        Ok(self)
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on one grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        check_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Largest absolute value.
    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    /// Largest pointwise absolute difference.
    pub fn sup_diff(&self, other: &Self) -> Result<T> {
        check_grid(&self.grid, &other.grid)?;
        Ok(self.values.iter().zip(&other.values).fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs())))
    }

    /// Largest value.
    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |a, &v| a.max(v))
    }

    /// Smallest value.
    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |a, &v| a.min(v))
    }

    /// Circular shift by whole grid steps along each axis.
    pub fn roll(&self, shift: &[i64]) -> Self {
        let n = self.grid.n as i64;
        let mut out = vec![T::zero(); self.values.len()];
        for (flat, &v) in self.values.iter().enumerate() {
            let idx = self.grid.unflatten(flat);
            let mut tgt = [0usize; 3];
            for a in 0..self.grid.d {
                tgt[a] = (idx[a] as i64 + shift[a]).rem_euclid(n) as usize;
            }
            out[self.grid.flatten(&tgt[..self.grid.d])] = v;
        }
        Self { grid: self.grid, values: out }
    }

    /// Writes the field as little-endian `f64`: header `d, n, L`, then values.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(8 * (3 + self.values.len()));
        for h in [self.grid.d as f64, self.grid.n as f64, to_f64(self.grid.l)] {
            buf.extend_from_slice(&h.to_le_bytes());
        }
        for &v in &self.values {
            buf.extend_from_slice(&to_f64(v).to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Reads a field written by [`Field::write_binary`].
    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 24 || bytes.len() % 8 != 0 {
            return Err(Error::Config(format!("{}: truncated field file", path.display())));
        }
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let grid = GridSpec::new(vals[0] as usize, vals[1] as usize, lit(vals[2]))?;
        Self::new(grid, vals[3..].iter().map(|&v| lit(v)).collect())
    }

    /// Writes a one-dimensional field as `x,value` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if self.grid.d != 1 {
            return Err(Error::Unsupported("CSV export is limited to d=1".into()));
        }
        let mut out = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.17e},{:.17e}\n", to_f64(self.grid.coord(i)), to_f64(*v)));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Discrete Fourier coefficients of a [`Field`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub grid: GridSpec<T>,
    pub coefficients: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    /// `Σ|coefficients|² Δz^d`.
    pub fn energy(&self) -> T {
        let sq: Vec<T> = self.coefficients.iter().map(|c| c.norm_sqr()).collect();
        pairwise_sum(&sq) * self.grid.dual_cell()
    }
}

pub(crate) fn check_grid<T: Real>(a: &GridSpec<T>, b: &GridSpec<T>) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Reusable FFT plans for one grid.
#[derive(Clone)]
pub struct SpectralPlan<T: Real> {
    grid: GridSpec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> SpectralPlan<T> {
    /// Plans forward and inverse transforms of length `n`.
    pub fn new(grid: GridSpec<T>) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    /// Grid this plan was built for.
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// In-place unnormalized d-dimensional transform.
    pub fn transform(&self, data: &mut [Complex<T>], direction: FftDirection) {
        let plan = match direction {
            FftDirection::Forward => &self.forward,
            FftDirection::Inverse => &self.inverse,
        };
        let n = self.grid.n;
        let d = self.grid.d;
        plan.process(data);
        if d == 1 {
            return;
        }
        let len = data.len();
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        for axis in 0..d - 1 {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..len).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    plan.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
    }

    /// Multiplies the spectrum of `values` by the real symbol `m` (FFT order)
    /// and returns the real part of the result.
    pub fn apply_multiplier(&self, values: &[T], m: &[T]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, FftDirection::Forward);
        for (b, &w) in buf.iter_mut().zip(m) {
            *b = *b * w;
        }
        self.transform(&mut buf, FftDirection::Inverse);
        let scale = T::one() / lit(buf.len() as f64);
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Squared moduli `|f̂(z_k)|²` of the normalized spectrum.
    pub fn power(&self, values: &[T]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, FftDirection::Forward);
        let s = self.grid.cell() / (T::TAU()).powf(lit(self.grid.d as f64 / 2.0));
        let s2 = s * s;
        buf.iter().map(|c| c.norm_sqr() * s2).collect()
    }
}

fn parity_sign(grid: &GridSpec<impl Real>, flat: usize) -> bool {
    let idx = grid.unflatten(flat);
    idx.iter().take(grid.d).sum::<usize>() % 2 == 1
}

/// Discrete `f̂` under the `(2π)^{−d/2}` convention.
pub fn forward_transform<T: Real>(f: &Field<T>) -> Spectrum<T> {
    let plan = SpectralPlan::new(f.grid);
    let mut buf: Vec<Complex<T>> = f.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    plan.transform(&mut buf, FftDirection::Inverse);
    let s = f.grid.cell() / (T::TAU()).powf(lit(f.grid.d as f64 / 2.0));
    for (k, c) in buf.iter_mut().enumerate() {
        *c = if parity_sign(&f.grid, k) { -*c * s } else { *c * s };
    }
    Spectrum { grid: f.grid, coefficients: buf }
}

/// Imaginary residue tolerance: `1e−8` in `f64`, looser in `f32`.
pub fn residue_tolerance<T: Real>() -> T {
    lit::<T>(1e-8).max(T::epsilon() * lit(1e3))
}

/// Inverse of [`forward_transform`]; fails with `ImaginaryResidue` when the
/// spectrum does not come from a real field.
pub fn inverse_transform<T: Real>(s: &Spectrum<T>) -> Result<Field<T>> {
    let grid = s.grid;
    let plan = SpectralPlan::new(grid);
    let mut buf: Vec<Complex<T>> = s
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, &c)| if parity_sign(&grid, k) { -c } else { c })
        .collect();
    plan.transform(&mut buf, FftDirection::Forward);
    let scale = grid.dual_cell() / (T::TAU()).powf(lit(grid.d as f64 / 2.0));
    let max_re = buf.iter().fold(T::zero(), |a, c| a.max(c.re.abs()));
    let max_im = buf.iter().fold(T::zero(), |a, c| a.max(c.im.abs()));
    if max_im > residue_tolerance::<T>() * max_re && max_im > T::min_positive_value() {
        return Err(Error::ImaginaryResidue { ratio: to_f64(max_im / max_re.max(T::min_positive_value())) });
    }
    Ok(Field { grid, values: buf.iter().map(|c| c.re * scale).collect() })
}

/// `Δx^d Σ f g w`.
pub fn weighted_inner<T: Real>(f: &Field<T>, g: &Field<T>, w: &Field<T>) -> Result<T> {
    check_grid(&f.grid, &g.grid)?;
    check_grid(&f.grid, &w.grid)?;
    let prod: Vec<T> = (0..f.values.len()).map(|i| f.values[i] * g.values[i] * w.values[i]).collect();
    Ok(pairwise_sum(&prod) * f.grid.cell())
}

/// `Δx^d Σ f g`.
pub fn inner<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<T> {
    check_grid(&f.grid, &g.grid)?;
    let prod: Vec<T> = f.values.iter().zip(&g.values).map(|(&a, &b)| a * b).collect();
    Ok(pairwise_sum(&prod) * f.grid.cell())
}

/// Evaluates a radial symbol at every spectral index (FFT order).
pub fn radial_symbol<T: Real>(grid: &GridSpec<T>, f: impl Fn(T) -> Result<T>) -> Result<Vec<T>> {
    (0..grid.len()).map(|k| f(grid.frequency_norm(k))).collect()
}

/// Multiplies the spectrum of `f` by the real radial symbol `m`.
pub fn apply_multiplier<T: Real>(f: &Field<T>, m: &[T]) -> Result<Field<T>> {
    if m.len() != f.values.len() {
        return Err(Error::GridMismatch);
    }
    let plan = SpectralPlan::new(f.grid);
    Ok(Field { grid: f.grid, values: plan.apply_multiplier(&f.values, m) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn g1(n: usize, l: f64) -> GridSpec<f64> {
        GridSpec::new(1, n, l).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = g1(8, 2.0);
        assert_relative_eq!(g.dx() * 8.0, 4.0);
        assert_relative_eq!(g.dz(), PI / 2.0);
        assert_eq!(g.freq(4), -4.0 * g.dz());
        assert_relative_eq!(-g.freq(4), PI / g.dx());
        assert_eq!(g.coord(g.origin()), 0.0);
        assert!(GridSpec::<f64>::new(1, 6, 1.0).is_err());
        assert!(GridSpec::<f64>::new(4, 8, 1.0).is_err());
    }

    #[test]
    fn gaussian_self_transform() {
        let g = g1(1024, 20.0);
        let f = Field::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * PI).sqrt());
        let s = forward_transform(&f);
        for (k, c) in s.coefficients.iter().enumerate() {
            let z = g.freq(k);
            let expect = (-z * z / 2.0).exp() / (2.0 * PI).sqrt();
            assert!(c.im.abs() < 1e-10);
            assert!((c.re - expect).abs() < 1e-12);
            assert!(c.re > -1e-15);
        }
    }

    #[test]
    fn shifted_peak_has_linear_phase() {
        let g = g1(256, 8.0);
        let j0 = g.origin() + 5;
        let mut f = Field::constant(g, 0.0);
        f.values[j0] = 1.0 / g.dx();
        let s = forward_transform(&f);
        let x0 = g.coord(j0);
        let amp = 1.0 / (2.0 * PI).sqrt();
        for (k, c) in s.coefficients.iter().enumerate() {
            let z = g.freq(k);
            assert!((c.norm() - amp).abs() < 1e-12);
            let expect = Complex::from_polar(amp, z * x0);
            assert!((c - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_rejects_asymmetric_spectrum() {
        let g = g1(16, 1.0);
        let mut coeffs = vec![Complex::new(0.0, 0.0); 16];
        coeffs[1] = Complex::new(1.0, 0.0);
        let s = Spectrum { grid: g, coefficients: coeffs };
        assert!(matches!(inverse_transform(&s), Err(Error::ImaginaryResidue { .. })));
    }

    #[test]
    fn weighted_inner_examples() {
        let g = g1(2, 1.0);
        let one = Field::constant(g, 1.0);
        assert_relative_eq!(weighted_inner(&one, &one, &one).unwrap(), 2.0);
        assert_eq!(weighted_inner(&one, &one, &Field::constant(g, 0.0)).unwrap(), 0.0);
        let g = g1(2048, 20.0);
        let p = Field::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * PI).sqrt());
        let one = Field::constant(g, 1.0);
        assert!((weighted_inner(&p, &one, &one).unwrap() - 1.0).abs() < 1e-6);
        let other = Field::constant(g1(4, 1.0), 1.0);
        assert!(matches!(weighted_inner(&p, &one, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn symmetric_field_has_real_spectrum_in_3d() {
        let g = GridSpec::<f64>::new(3, 16, 4.0).unwrap();
        let f = Field::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + 0.5 * x[2] * x[2])).exp());
        let s = forward_transform(&f);
        let max_im = s.coefficients.iter().fold(0.0f64, |a, c| a.max(c.im.abs()));
        assert!(max_im < 1e-10);
        let back = inverse_transform(&s).unwrap();
        assert!(back.sup_diff(&f).unwrap() < 1e-12);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("ld_field_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = GridSpec::<f64>::new(2, 8, 3.0).unwrap();
        let f = Field::from_fn(g, |x| x[0] - 2.0 * x[1]);
        let p = dir.join("f.bin");
        f.write_binary(&p).unwrap();
        assert_eq!(Field::<f64>::read_binary(&p).unwrap(), f);
        assert!(f.write_csv(&dir.join("f.csv")).is_err());
        let f1 = Field::from_fn(g1(4, 1.0), |x| x[0]);
        f1.write_csv(&dir.join("f1.csv")).unwrap();
        let text = std::fs::read_to_string(dir.join("f1.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn roll_moves_values() {
        let g = GridSpec::<f64>::new(2, 4, 1.0).unwrap();
        let mut f = Field::constant(g, 0.0);
        f.values[g.flatten(&[1, 2])] = 1.0;
        let r = f.roll(&[1, -3]);
        assert_eq!(r.values[g.flatten(&[2, 3])], 1.0);
    }

    #[test]
    fn f32_round_trip() {
        let g = GridSpec::<f32>::new(1, 256, 10.0).unwrap();
        let f = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        let back = inverse_transform(&forward_transform(&f)).unwrap();
        assert!(back.sup_diff(&f).unwrap() < 1e-5);
    }

    fn random_field(d: usize, n: usize) -> impl Strategy<Value = Field<f64>> {
        let g = GridSpec::new(d, n, 3.0).unwrap();
        prop::collection::vec(-1.0f64..1.0, g.len()).prop_map(move |v| Field::new(g, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn parseval_identity(f in random_field(2, 16)) {
            let s = forward_transform(&f);
            let lhs = inner(&f, &f).unwrap();
            prop_assert!((lhs - s.energy()).abs() <= 1e-10 * lhs);
        }

        #[test]
        fn round_trip_is_identity(f in random_field(1, 64)) {
            let back = inverse_transform(&forward_transform(&f)).unwrap();
            prop_assert!(back.sup_diff(&f).unwrap() <= 1e-10 * f.sup_norm().max(1e-300));
        }

        #[test]
        fn transform_is_linear(f in random_field(1, 32), g in random_field(1, 32), a in -3.0f64..3.0) {
            let combo = f.zip_map(&g, |x, y| a * x + y).unwrap();
            let (sf, sg, sc) = (forward_transform(&f), forward_transform(&g), forward_transform(&combo));
            for k in 0..sc.coefficients.len() {
                let expect = sf.coefficients[k] * a + sg.coefficients[k];
                prop_assert!((sc.coefficients[k] - expect).norm() < 1e-12);
            }
        }

        #[test]
        fn even_field_has_real_spectrum(v in prop::collection::vec(-1.0f64..1.0, 33)) {
            let g = GridSpec::new(1, 64, 2.0).unwrap();
            let o = g.origin();
            let mut vals = vec![0.0; 64];
            for j in 0..=32 {
                vals[(o + j) % 64] = v[j];
                vals[(o + 64 - j) % 64] = v[j];
            }
            let s = forward_transform(&Field::new(g, vals).unwrap());
            for c in &s.coefficients {
                prop_assert!(c.im.abs() < 1e-10);
            }
        }
    }
}
