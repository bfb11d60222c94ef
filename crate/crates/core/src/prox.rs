//! Closed-form proximal maps and projectors: box indicators, weighted ℓ1 over
//! a box, the zero regularizer, and Euclidean balls.

use crate::error::{check_dim, Error, Result};
use crate::problem::{Projector, ProxRegularizer};
use crate::scalar::{dist, Scalar};

/// Componentwise `sign(z_i) * max(|z_i| - t, 0)`.
pub fn soft_threshold<T: Scalar>(z: &[T], t: T) -> Result<Vec<T>> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be >= 0, got {t}"
        )));
    }
    Ok(soft_threshold_unchecked(z, t))
}

pub(crate) fn soft_threshold_unchecked<T: Scalar>(z: &[T], t: T) -> Vec<T> {
    z.iter().map(|&x| shrink(x, t)).collect()
}

#[inline]
fn shrink<T: Scalar>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

/// Componentwise median of `(lo, z, hi)`.
pub fn clamp_box<T: Scalar>(z: &[T], lo: &[T], hi: &[T]) -> Result<Vec<T>> {
    check_dim(z.len(), lo.len())?;
    check_dim(z.len(), hi.len())?;
    validate_box(lo, hi)?;
    Ok(clamp_box_unchecked(z, lo, hi))
}

pub(crate) fn clamp_box_unchecked<T: Scalar>(z: &[T], lo: &[T], hi: &[T]) -> Vec<T> {
    z.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&x, (&l, &h))| clamp(x, l, h))
        .collect()
}

#[inline]
fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

fn validate_box<T: Scalar>(lo: &[T], hi: &[T]) -> Result<()> {
    check_dim(lo.len(), hi.len())?;
    match lo.iter().zip(hi).position(|(l, h)| !(l <= h)) {
        None => Ok(()),
        Some(i) => Err(Error::InvalidArgument(format!(
            "box bounds out of order at component {i}: lo = {}, hi = {}",
            lo[i], hi[i]
        ))),
    }
}

/// Euclidean projection onto the ball of `radius` around `center`.
pub fn project_ball<T: Scalar>(z: &[T], center: &[T], radius: T) -> Result<Vec<T>> {
    check_dim(z.len(), center.len())?;
    if !(radius > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "radius must be > 0, got {radius}"
        )));
    }
    Ok(project_ball_unchecked(z, center, radius))
}

pub(crate) fn project_ball_unchecked<T: Scalar>(z: &[T], center: &[T], radius: T) -> Vec<T> {
    let d = dist(z, center);
    if d <= radius {
        return z.to_vec();
    }
    let scale = radius / d;
    z.iter()
        .zip(center)
        .map(|(&x, &c)| c + scale * (x - c))
        .collect()
}

impl<T: Scalar> Projector<T> {
    pub fn new_box(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        validate_box(&lo, &hi)?;
        Ok(Projector::Box { lo, hi })
    }

    pub fn new_ball(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "radius must be > 0, got {radius}"
            )));
        }
        Ok(Projector::Ball { center, radius })
    }
}

/// Distance from `target` to the interval `[lo, hi]` (either end may be infinite).
#[inline]
fn dist_to_interval<T: Scalar>(target: T, lo: T, hi: T) -> T {
    if target < lo {
        lo - target
    } else if target > hi {
        target - hi
    } else {
        T::zero()
    }
}

fn in_box<T: Scalar>(u: &[T], lo: &[T], hi: &[T]) -> bool {
    u.iter()
        .zip(lo.iter().zip(hi))
        .all(|(&x, (&l, &h))| x >= l && x <= h)
}

/// `h(u) = 0`, `dom h = R^n`.
#[derive(Debug, Clone)]
pub struct ZeroRegularizer<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> ZeroRegularizer<T> {
    pub fn new(n: usize) -> Self {
        Self {
            lo: vec![T::neg_infinity(); n],
            hi: vec![T::infinity(); n],
        }
    }
}

impl<T: Scalar> ProxRegularizer<T> for ZeroRegularizer<T> {
    fn value(&self, _u: &[T]) -> T {
        T::zero()
    }

    fn prox(&self, z: &[T], _s: T) -> Vec<T> {
        z.to_vec()
    }

    fn domain_box(&self) -> (&[T], &[T]) {
        (&self.lo, &self.hi)
    }

    fn stationarity_residual(&self, _u: &[T], grad: &[T]) -> Option<T> {
        Some(crate::scalar::norm(grad))
    }

    fn name(&self) -> String {
        "zero".into()
    }
}

/// Indicator of the box `[lo, hi]`. Its prox is the clamp, independent of the stepsize.
#[derive(Debug, Clone)]
pub struct BoxIndicator<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> BoxIndicator<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        validate_box(&lo, &hi)?;
        Ok(Self { lo, hi })
    }

    pub fn uniform(n: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }
}

impl<T: Scalar> ProxRegularizer<T> for BoxIndicator<T> {
    fn value(&self, u: &[T]) -> T {
        if in_box(u, &self.lo, &self.hi) {
            T::zero()
        } else {
            T::infinity()
        }
    }

    fn prox(&self, z: &[T], _s: T) -> Vec<T> {
        clamp_box_unchecked(z, &self.lo, &self.hi)
    }

    fn domain_box(&self) -> (&[T], &[T]) {
        (&self.lo, &self.hi)
    }

    fn stationarity_residual(&self, u: &[T], grad: &[T]) -> Option<T> {
        if !in_box(u, &self.lo, &self.hi) {
            return Some(T::infinity());
        }
        let sq = u.iter().zip(grad).zip(self.lo.iter().zip(&self.hi)).fold(
            T::zero(),
            |acc, ((&x, &g), (&l, &h))| {
                // normal cone of [l, h] at x
                let lo_end = if x == l { T::neg_infinity() } else { T::zero() };
                let hi_end = if x == h { T::infinity() } else { T::zero() };
                let r = dist_to_interval(-g, lo_end, hi_end);
                acc + r * r
            },
        );
        Some(sq.sqrt())
    }

    fn name(&self) -> String {
        "box".into()
    }
}

/// `h(u) = weight * |u|_1 + indicator_[lo, hi](u)`.
///
/// Each coordinate is a 1-D convex problem over an interval, so the prox is the
/// clamp of the unconstrained minimizer: `clamp(soft(z, s * weight), lo, hi)`.
#[derive(Debug, Clone)]
pub struct L1PlusBox<T> {
    weight: T,
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> L1PlusBox<T> {
    pub fn new(weight: T, lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if !(weight >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "weight must be >= 0, got {weight}"
            )));
        }
        validate_box(&lo, &hi)?;
        Ok(Self { weight, lo, hi })
    }

    /// Plain `weight * |u|_1` on `R^n`.
    pub fn l1(weight: T, n: usize) -> Result<Self> {
        Self::new(weight, vec![T::neg_infinity(); n], vec![T::infinity(); n])
    }

    pub fn weight(&self) -> T {
        self.weight
    }
}

impl<T: Scalar> ProxRegularizer<T> for L1PlusBox<T> {
    fn value(&self, u: &[T]) -> T {
        if !in_box(u, &self.lo, &self.hi) {
            return T::infinity();
        }
        self.weight * u.iter().fold(T::zero(), |acc, x| acc + x.abs())
    }

    fn prox(&self, z: &[T], s: T) -> Vec<T> {
        let t = s * self.weight;
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&l, &h))| clamp(shrink(x, t), l, h))
            .collect()
    }

    fn domain_box(&self) -> (&[T], &[T]) {
        (&self.lo, &self.hi)
    }

    fn stationarity_residual(&self, u: &[T], grad: &[T]) -> Option<T> {
        if !in_box(u, &self.lo, &self.hi) {
            return Some(T::infinity());
        }
        let w = self.weight;
        let sq = u.iter().zip(grad).zip(self.lo.iter().zip(&self.hi)).fold(
            T::zero(),
            |acc, ((&x, &g), (&l, &h))| {
                let (mut a, mut b) = if x > T::zero() {
                    (w, w)
                } else if x < T::zero() {
                    (-w, -w)
                } else {
                    (-w, w)
                };
                if x == l {
                    a = T::neg_infinity();
                }
                if x == h {
                    b = T::infinity();
                }
                let r = dist_to_interval(-g, a, b);
                acc + r * r
            },
        );
        Some(sq.sqrt())
    }

    fn name(&self) -> String {
        format!("l1({})+box", self.weight)
    }
}
