//! Momentum weights `a_{k-1}`, `A_k` and the extrapolated point `x̃_k`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Initial `A_0` used by default (any positive value is admissible).
pub const DEFAULT_A0: f64 = 12.0;

/// `a = (1 + sqrt(1 + 4A)) / 2` and `A_next = A + a`.
///
/// `a` is the positive root of `a^2 - a - A = 0`, so `A_next = a^2`.
#[inline]
pub fn advance<T: Scalar>(a_big: T) -> (T, T) {
    let one = T::one();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let a = (one + (one + four * a_big).sqrt()) / two;
    (a, a_big + a)
}

/// `x̃ = (A_prev / A_next) y_prev + (a / A_next) x_prev`.
pub fn extrapolate<T: Scalar>(
    a_prev_big: T,
    a_next_big: T,
    a: T,
    y_prev: &[T],
    x_prev: &[T],
) -> Result<Vec<T>> {
    if !(a_next_big > T::zero()) {
        return Err(Error::Internal(format!(
            "extrapolation weight A_next must be positive, got {a_next_big}"
        )));
    }
    let wy = a_prev_big / a_next_big;
    let wx = a / a_next_big;
    Ok(crate::scalar::lincomb(wy, y_prev, wx, x_prev))
}

/// Running state of the `a_k`/`A_k` recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule<T> {
    /// Current `A_{k-1}`.
    pub big_a: T,
    /// Index of the next iteration, starting at 1.
    pub k: usize,
    pub a0: T,
}

impl<T: Scalar> Schedule<T> {
    pub fn new(a0: T) -> Result<Self> {
        if !(a0 > T::zero()) || !a0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "A0 must be positive, got {a0}"
            )));
        }
        Ok(Self {
            big_a: a0,
            k: 1,
            a0,
        })
    }

    /// Advances one iteration: returns `(A_{k-1}, a_{k-1}, A_k)`.
    pub fn step(&mut self) -> (T, T, T) {
        let prev = self.big_a;
        let (a, next) = advance(prev);
        self.big_a = next;
        self.k += 1;
        (prev, a, next)
    }
}

impl<T: Scalar> Default for Schedule<T> {
    fn default() -> Self {
        Self::new(T::lit(DEFAULT_A0)).expect("default A0 is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub holds: bool,
    /// Smallest observed `rhs - lhs` (relative to the bound's scale).
    pub tightest_margin: f64,
    /// Iteration attaining the tightest margin.
    pub at_k: usize,
    /// First iteration where the bound failed, if any.
    pub first_violation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    pub k_max: usize,
    pub checks: Vec<BoundCheck>,
    /// Largest `|A_k - a_{k-1}^2| / A_k` seen.
    pub max_square_identity_error: f64,
}

impl ScheduleReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

struct Tracker {
    check: BoundCheck,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            check: BoundCheck {
                name,
                holds: true,
                tightest_margin: f64::INFINITY,
                at_k: 0,
                first_violation: None,
            },
        }
    }

    /// Records `lhs <= rhs` at iteration `k`.
    fn observe<T: Scalar>(&mut self, k: usize, lhs: T, rhs: T) {
        let ok = lhs <= rhs;
        let scale = rhs.abs().max(T::one());
        let margin = ((rhs - lhs) / scale).to_f64_lossy();
        if margin < self.check.tightest_margin {
            self.check.tightest_margin = margin;
            self.check.at_k = k;
        }
        if !ok {
            self.check.holds = false;
            self.check.first_violation.get_or_insert(k);
        }
    }
}

/// Runs the recursion from `A_0 = 12` up to `k_max` and checks, for every k:
/// `k/2 <= a_{k-1} <= 4k`, `sum_{i<=k} A_i >= k^3/12` and
/// `sum_{i<=k} a_{i-1} / sum_{i<=k} A_i <= 4/k`.
pub fn check_schedule_bounds<T: Scalar>(k_max: usize) -> Result<ScheduleReport> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let mut schedule = Schedule::<T>::new(T::lit(DEFAULT_A0))?;
    let mut lower = Tracker::new("a_lower: k/2 <= a_{k-1}");
    let mut upper = Tracker::new("a_upper: a_{k-1} <= 4k");
    let mut cubic = Tracker::new("sum_A: sum A_i >= k^3/12");
    let mut ratio = Tracker::new("ratio: sum a_{i-1} / sum A_i <= 4/k");
    let mut sum_a = T::zero();
    let mut sum_big_a = T::zero();
    let mut max_sq_err = 0.0f64;
    for k in 1..=k_max {
        let (_, a, big_a) = schedule.step();
        let kt = T::lit(k as f64);
        sum_a = sum_a + a;
        sum_big_a = sum_big_a + big_a;
        lower.observe(k, kt / T::lit(2.0), a);
        upper.observe(k, a, T::lit(4.0) * kt);
        cubic.observe(k, kt * kt * kt / T::lit(12.0), sum_big_a);
        ratio.observe(k, sum_a / sum_big_a, T::lit(4.0) / kt);
        let err = ((big_a - a * a) / big_a).abs().to_f64_lossy();
        max_sq_err = max_sq_err.max(err);
    }
    Ok(ScheduleReport {
        k_max,
        checks: vec![lower.check, upper.check, cubic.check, ratio.check],
        max_square_identity_error: max_sq_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advance_examples() {
        assert_eq!(advance(12.0f64), (4.0, 16.0));
        assert_eq!(advance(0.0f64), (1.0, 1.0));
        let (a, next) = advance(16.0f64);
        let expected = (1.0 + 65f64.sqrt()) / 2.0;
        assert!((a - expected).abs() < 1e-15);
        assert!((a - 4.531128874149275).abs() < 1e-12);
        assert!((next - a * a).abs() / next < 1e-12);
    }

    #[test]
    fn extrapolate_examples() {
        let p = [0.3, -1.2];
        assert_eq!(extrapolate(12.0, 16.0, 4.0, &p, &p).unwrap(), p.to_vec());
        assert_eq!(
            extrapolate(12.0, 16.0, 4.0, &[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            vec![0.25, 0.25]
        );
        let (a, next) = advance(0.0);
        assert_eq!(
            extrapolate(0.0, next, a, &[9.0], &[2.0]).unwrap(),
            vec![2.0]
        );
        assert!(extrapolate(0.0, 0.0, 0.0, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn schedule_state_machine() {
        let mut s = Schedule::<f64>::default();
        assert_eq!(s.step(), (12.0, 4.0, 16.0));
        let (prev, a, next) = s.step();
        assert_eq!(prev, 16.0);
        assert!((1.0..=8.0).contains(&a));
        assert_eq!(next, 16.0 + a);
        assert_eq!(s.k, 3);
        assert!(Schedule::new(0.0f64).is_err());
    }

    #[test]
    fn bounds_at_k_one() {
        let r = check_schedule_bounds::<f64>(1).unwrap();
        assert!(r.all_hold());
        // a_0 = 4 = 4k is tight at k = 1
        let upper = &r.checks[1];
        assert_eq!(upper.tightest_margin, 0.0);
        assert!(check_schedule_bounds::<f64>(0).is_err());
    }

    #[test]
    fn weights_strictly_increase() {
        let mut s = Schedule::<f64>::default();
        let (mut last_a, mut last_big) = (0.0, 0.0);
        for _ in 0..10_000 {
            let (_, a, big) = s.step();
            assert!(a > last_a && big > last_big);
            last_a = a;
            last_big = big;
        }
    }
}
