//! Composite problem `min f(u) + h(u)`: oracles for the smooth part, the
//! prox-friendly regularizer, the projector onto Ω, and the stationarity
//! certificate the solvers emit.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::prox::{clamp_box_unchecked, project_ball_unchecked};
use crate::scalar::{dist, dot, norm, step, sub, Scalar};

/// Smooth part `f`: value and gradient.
pub trait SmoothFunction<T: Scalar>: Send + Sync {
    fn value(&self, u: &[T]) -> T;
    fn gradient(&self, u: &[T]) -> Vec<T>;
}

/// Adapter turning a pair of closures into a [`SmoothFunction`].
pub struct FnSmooth<F, G> {
    value: F,
    gradient: G,
}

impl<T, F, G> SmoothFunction<T> for FnSmooth<F, G>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Send + Sync,
    G: Fn(&[T]) -> Vec<T> + Send + Sync,
{
    fn value(&self, u: &[T]) -> T {
        (self.value)(u)
    }

    fn gradient(&self, u: &[T]) -> Vec<T> {
        (self.gradient)(u)
    }
}

/// The smooth oracle plus optional curvature metadata. The metadata is read by
/// audits and diagnostics only; the solver never looks at it.
#[derive(Clone)]
pub struct SmoothOracle<T: Scalar> {
    func: Arc<dyn SmoothFunction<T>>,
    /// Upper bound on the Lipschitz constant of the gradient, M̄.
    pub audit_lipschitz: Option<T>,
    /// Lower curvature m̲: smallest m ≥ 0 with `f(u1) - l_f(u1; u2) >= -(m/2)|u1 - u2|^2`.
    pub audit_curvature: Option<T>,
}

impl<T: Scalar> SmoothOracle<T> {
    pub fn new(func: impl SmoothFunction<T> + 'static) -> Self {
        Self {
            func: Arc::new(func),
            audit_lipschitz: None,
            audit_curvature: None,
        }
    }

    pub fn from_fns<F, G>(value: F, gradient: G) -> Self
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
        G: Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    {
        Self::new(FnSmooth { value, gradient })
    }

    pub fn with_audit(mut self, lipschitz: Option<T>, curvature: Option<T>) -> Self {
        self.audit_lipschitz = lipschitz;
        self.audit_curvature = curvature;
        self
    }

    #[inline]
    pub fn value(&self, u: &[T]) -> T {
        self.func.value(u)
    }

    #[inline]
    pub fn gradient(&self, u: &[T]) -> Vec<T> {
        self.func.gradient(u)
    }
}

impl<T: Scalar> fmt::Debug for SmoothOracle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothOracle")
            .field("audit_lipschitz", &self.audit_lipschitz)
            .field("audit_curvature", &self.audit_curvature)
            .finish_non_exhaustive()
    }
}

/// Closed convex regularizer `h` with a closed-form proximal map.
///
/// `value` returns `+inf` outside `dom h`. `prox(z, s)` returns
/// `argmin_u h(u) + |u - z|^2 / (2s)` for `s > 0`.
pub trait ProxRegularizer<T: Scalar>: Send + Sync {
    fn value(&self, u: &[T]) -> T;

    fn prox(&self, z: &[T], s: T) -> Vec<T>;

    /// Componentwise bounds `(lo, hi)` containing `dom h`. Entries may be infinite
    /// for unbounded domains.
    fn domain_box(&self) -> (&[T], &[T]);

    /// `dist(-grad, ∂h(u))`, when it has a closed form.
    fn stationarity_residual(&self, _u: &[T], _grad: &[T]) -> Option<T> {
        None
    }

    fn name(&self) -> String;
}

/// Projector onto the closed convex set Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector<T> {
    /// Ω is the whole space.
    Identity,
    Box {
        lo: Vec<T>,
        hi: Vec<T>,
    },
    Ball {
        center: Vec<T>,
        radius: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    Identity,
    Box,
    Ball,
}

impl<T: Scalar> Projector<T> {
    pub fn kind(&self) -> ProjectorKind {
        match self {
            Projector::Identity => ProjectorKind::Identity,
            Projector::Box { .. } => ProjectorKind::Box,
            Projector::Ball { .. } => ProjectorKind::Ball,
        }
    }

    pub fn project(&self, z: &[T]) -> Vec<T> {
        match self {
            Projector::Identity => z.to_vec(),
            Projector::Box { lo, hi } => clamp_box_unchecked(z, lo, hi),
            Projector::Ball { center, radius } => project_ball_unchecked(z, center, *radius),
        }
    }

    pub fn contains(&self, z: &[T], tol: T) -> bool {
        match self {
            Projector::Identity => true,
            Projector::Box { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&x, (&l, &h))| x >= l - tol && x <= h + tol),
            Projector::Ball { center, radius } => dist(z, center) <= *radius + tol,
        }
    }

    fn dimension(&self) -> Option<usize> {
        match self {
            Projector::Identity => None,
            Projector::Box { lo, .. } => Some(lo.len()),
            Projector::Ball { center, .. } => Some(center.len()),
        }
    }
}

/// `min φ(u) = f(u) + h(u)` over `u ∈ R^n`, with `dom h ⊆ Ω`.
#[derive(Clone)]
pub struct CompositeProblem<T: Scalar> {
    pub smooth: SmoothOracle<T>,
    pub regularizer: Arc<dyn ProxRegularizer<T>>,
    pub omega: Projector<T>,
    dimension: usize,
}

impl<T: Scalar> fmt::Debug for CompositeProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("dimension", &self.dimension)
            .field("smooth", &self.smooth)
            .field("regularizer", &self.regularizer.name())
            .field("omega", &self.omega.kind())
            .finish()
    }
}

impl<T: Scalar> CompositeProblem<T> {
    /// Bundles the three oracles, checking dimensions and that Ω fixes the
    /// corners of the domain box of `h` (all corners up to n = 12, a seeded
    /// sample of them beyond that).
    pub fn new(
        smooth: SmoothOracle<T>,
        regularizer: Arc<dyn ProxRegularizer<T>>,
        omega: Projector<T>,
        dimension: usize,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let (lo, hi) = regularizer.domain_box();
        check_dim(dimension, lo.len())?;
        check_dim(dimension, hi.len())?;
        if let Some(d) = omega.dimension() {
            check_dim(dimension, d)?;
        }
        let problem = Self {
            smooth,
            regularizer,
            omega,
            dimension,
        };
        problem.check_domain_inside_omega()?;
        Ok(problem)
    }

    fn check_domain_inside_omega(&self) -> Result<()> {
        if self.omega.kind() == ProjectorKind::Identity {
            return Ok(());
        }
        let (lo, hi) = self.regularizer.domain_box();
        let n = self.dimension;
        let tol = T::lit(1e-12);
        let corner = |mask: u64| -> Vec<T> {
            (0..n)
                .map(|i| {
                    if (mask >> (i % 64)) & 1 == 1 {
                        hi[i]
                    } else {
                        lo[i]
                    }
                })
                .collect()
        };
        let fixed = |p: &[T]| -> bool {
            p.iter().all(|x| x.is_finite()) && dist(&self.omega.project(p), p) <= tol
        };
        let ok = if n <= 12 {
            (0..(1u64 << n)).all(|m| fixed(&corner(m)))
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x0d0e);
            (0..4096).all(|_| fixed(&corner(rng.gen())))
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "dom h is not contained in Ω (projector moves a domain corner)".into(),
            ))
        }
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `φ(u) = f(u) + h(u)`; `+inf` outside `dom h`.
    pub fn phi(&self, u: &[T]) -> Result<T> {
        check_dim(self.dimension, u.len())?;
        let h = self.regularizer.value(u);
        if h == T::infinity() {
            return Ok(T::infinity());
        }
        Ok(self.smooth.value(u) + h)
    }

    /// `l_f(u1; u2) = f(u2) + <∇f(u2), u1 - u2>`.
    pub fn linearization(&self, u1: &[T], u2: &[T]) -> Result<T> {
        check_dim(self.dimension, u1.len())?;
        check_dim(self.dimension, u2.len())?;
        let g = self.smooth.gradient(u2);
        Ok(self.smooth.value(u2) + dot(&g, &sub(u1, u2)))
    }

    /// Checks `v̂ ∈ ∇f(ŷ) + ∂h(ŷ)` through the prox fixed point
    /// `ŷ = prox(ŷ - s(∇f(ŷ) - v̂), s)` and that `|v̂| <= ρ̂`.
    pub fn verify_certificate(&self, cert: &Certificate<T>, s: T, tol: T) -> Result<bool> {
        check_dim(self.dimension, cert.y_hat.len())?;
        check_dim(self.dimension, cert.v_hat.len())?;
        if !(s > T::zero()) || !(tol > T::zero()) {
            return Err(Error::InvalidArgument("s and tol must be positive".into()));
        }
        let g = self.smooth.gradient(&cert.y_hat);
        let shifted = sub(&g, &cert.v_hat);
        let z = step(&cert.y_hat, s, &shifted);
        let p = self.regularizer.prox(&z, s);
        let fixed_point = dist(&p, &cert.y_hat) <= tol;
        Ok(fixed_point && norm(&cert.v_hat) <= cert.rho_hat)
    }
}

/// An approximate stationarity certificate `(ŷ, v̂)` with `v̂ ∈ ∇f(ŷ) + ∂h(ŷ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    pub y_hat: Vec<T>,
    pub v_hat: Vec<T>,
    pub residual_norm: T,
    /// Tolerance ρ̂ the certificate is meant to satisfy.
    pub rho_hat: T,
    pub iterations: usize,
    pub prox_calls: usize,
    pub grad_calls: usize,
    pub value_calls: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{QpInstance, QuadraticSpec};
    use crate::prox::{BoxIndicator, L1PlusBox, ZeroRegularizer};
    use crate::scalar::dist_sq;
    use proptest::prelude::*;

    /// f = u'u - (1,1)'u  (Q = 2I, c = (-1, -1)) on [0, 1]^2
    fn two_d(omega: Projector<f64>) -> Result<CompositeProblem<f64>> {
        let smooth = SmoothOracle::from_fns(
            |u: &[f64]| u[0] * u[0] + u[1] * u[1] - u[0] - u[1],
            |u: &[f64]| vec![2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0],
        );
        CompositeProblem::new(
            smooth,
            Arc::new(BoxIndicator::uniform(2, 0.0, 1.0).unwrap()),
            omega,
            2,
        )
    }

    #[test]
    fn phi_examples() {
        let p = two_d(Projector::Identity).unwrap();
        assert_eq!(p.phi(&[0.5, 0.5]).unwrap(), -0.5);
        assert_eq!(p.phi(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(p.phi(&[2.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(p.phi(&[0.0]).is_err());
        let quad = SmoothOracle::from_fns(|u: &[f64]| u[0] * u[0], |u: &[f64]| vec![2.0 * u[0]]);
        let p = CompositeProblem::new(
            quad,
            Arc::new(L1PlusBox::l1(1.0, 1).unwrap()),
            Projector::Identity,
            1,
        )
        .unwrap();
        assert_eq!(p.phi(&[1.0]).unwrap(), 2.0);
    }

    #[test]
    fn linearization_examples() {
        let quad = SmoothOracle::from_fns(|u: &[f64]| u[0] * u[0], |u: &[f64]| vec![2.0 * u[0]]);
        let p = CompositeProblem::new(
            quad,
            Arc::new(ZeroRegularizer::new(1)),
            Projector::Identity,
            1,
        )
        .unwrap();
        // f(3) + f'(3)(4 - 3) = 9 + 6
        assert_eq!(p.linearization(&[4.0], &[3.0]).unwrap(), 15.0);
        assert_eq!(p.linearization(&[5.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(p.linearization(&[-2.0], &[-2.0]).unwrap(), 4.0);
    }

    #[test]
    fn domain_must_sit_inside_omega() {
        assert!(two_d(Projector::new_box(vec![-1.0; 2], vec![2.0; 2]).unwrap()).is_ok());
        assert!(two_d(Projector::new_box(vec![0.0; 2], vec![0.5; 2]).unwrap()).is_err());
        assert!(two_d(Projector::new_ball(vec![0.5; 2], 1.0).unwrap()).is_ok());
        assert!(two_d(Projector::new_ball(vec![0.0; 2], 1.0).unwrap()).is_err());
        assert!(matches!(
            two_d(Projector::new_box(vec![0.0; 3], vec![1.0; 3]).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn cert(y: Vec<f64>, v: Vec<f64>, rho: f64) -> Certificate<f64> {
        Certificate {
            residual_norm: norm(&v),
            y_hat: y,
            v_hat: v,
            rho_hat: rho,
            iterations: 0,
            prox_calls: 0,
            grad_calls: 0,
            value_calls: 0,
        }
    }

    #[test]
    fn certificate_examples() {
        let p = two_d(Projector::Identity).unwrap();
        // interior stationary point
        assert!(p
            .verify_certificate(&cert(vec![0.5, 0.5], vec![0.0, 0.0], 1e-9), 1.0, 1e-12)
            .unwrap());
        // at (0, 0.5) the gradient is (-1, 0): -1 is not in the normal cone at lo
        assert!(!p
            .verify_certificate(&cert(vec![0.0, 0.5], vec![0.0, 0.0], 1.0), 1.0, 1e-9)
            .unwrap());
        // ... but v = (-1, 0) makes it exact
        assert!(p
            .verify_certificate(&cert(vec![0.0, 0.5], vec![-1.0, 0.0], 1.0), 1.0, 1e-12)
            .unwrap());
        // same pair, tolerance too tight for |v|
        assert!(!p
            .verify_certificate(&cert(vec![0.0, 0.5], vec![-1.0, 0.0], 0.5), 1.0, 1e-12)
            .unwrap());
        assert!(p
            .verify_certificate(&cert(vec![0.0, 0.5], vec![0.0, 0.0], 1.0), 0.0, 1e-9)
            .is_err());
    }

    fn instance() -> CompositeProblem<f64> {
        QpInstance::generate(&QuadraticSpec::new(4, -2.0, 3.0, 17))
            .unwrap()
            .to_problem()
            .unwrap()
    }

    proptest! {
        #[test]
        fn certificate_check_does_not_depend_on_s(
            y in proptest::collection::vec(-1.0f64..1.0, 4),
            snap in proptest::collection::vec(0u8..3, 4),
        ) {
            let p = instance();
            // snap some coordinates onto the box faces, then build the exact v
            let y: Vec<f64> = y.iter().zip(&snap).map(|(&x, &m)| match m { 0 => -1.0, 1 => 1.0, _ => x }).collect();
            let g = p.smooth.gradient(&y);
            let v: Vec<f64> = g
                .iter()
                .zip(&y)
                .map(|(&gi, &yi)| if yi == -1.0 { gi.min(0.0) } else if yi == 1.0 { gi.max(0.0) } else { gi })
                .collect();
            let c = cert(y, v, f64::INFINITY);
            let answers: Vec<bool> = [0.01, 0.1, 1.0, 10.0, 100.0]
                .iter()
                .map(|&s| p.verify_certificate(&c, s, 1e-9).unwrap())
                .collect();
            prop_assert!(answers.iter().all(|&b| b), "{:?}", answers);
        }

        #[test]
        fn linearization_gap_within_curvature(
            u1 in proptest::collection::vec(-1.0f64..1.0, 4),
            u2 in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let p = instance();
            let m = p.smooth.audit_lipschitz.unwrap();
            let gap = (p.smooth.value(&u1) - p.linearization(&u1, &u2).unwrap()).abs();
            prop_assert!(gap <= 0.5 * m * dist_sq(&u1, &u2) + 1e-12);
        }
    }
}
