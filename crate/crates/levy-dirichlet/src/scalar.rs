//! Scalar abstraction shared by every numeric routine.
//!
//! All grid, spectral and risk computations are generic over [`Real`], which
//! is implemented for `f32` and `f64`. Special functions and adaptive
//! quadrature run in `f64` internally and convert at the boundary.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point type usable by the library: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in target scalar")
}

/// Converts `T` into `f64`.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

/// Pairwise (tree) summation with a fixed reduction order.
///
/// The result depends only on the slice contents, never on how the values
/// were produced, so parallel producers give bitwise identical sums.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut acc = T::zero();
        for &x in xs {
            acc = acc + x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(x_i)` over a slice.
pub fn pairwise_sum_by<T: Real, S>(xs: &[S], f: impl Fn(&S) -> T + Copy) -> T {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut acc = T::zero();
        for x in xs {
            acc = acc + f(x);
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn pairwise_is_more_accurate_than_naive_in_f32() {
        let xs = vec![0.1f32; 1 << 20];
        let exact = 0.1f64 * (1u64 << 20) as f64;
        let pw = pairwise_sum(&xs) as f64;
        let naive: f32 = xs.iter().fold(0.0, |a, &b| a + b);
        assert!((pw - exact).abs() < (naive as f64 - exact).abs());
    }

    #[test]
    fn lit_round_trips() {
        assert_eq!(lit::<f32>(0.5), 0.5f32);
        assert_eq!(to_f64(lit::<f64>(1.25)), 1.25);
    }
}
