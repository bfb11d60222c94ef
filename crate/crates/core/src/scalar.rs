//! Scalar abstraction and the handful of dense vector kernels the solver needs.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point scalar the solver can run on: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every value used by the crate is representable
    /// (possibly rounded) in both supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default guard for the curvature ratios: `1e-12` in double precision,
    /// scaled up to a few thousand ulps for narrower types.
    fn default_denom_epsilon() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(4096.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

pub(crate) fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

pub(crate) fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    dist_sq(a, b).sqrt()
}

/// `a - b`
pub(crate) fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `alpha * a + beta * b`
pub(crate) fn lincomb<T: Scalar>(alpha: T, a: &[T], beta: T, b: &[T]) -> Vec<T> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| alpha * x + beta * y)
        .collect()
}

/// `a - s * b`
pub(crate) fn step<T: Scalar>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &g)| x - s * g).collect()
}

pub(crate) fn cast_vec<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}
