//! Fixed-stepsize comparison methods: FISTA on the same `a_k`/`A_k` weights
//! (the `ξ ≡ 0`, `λ ≡ step` specialization of the adaptive solver) and plain
//! proximal gradient.

use crate::error::{check_dim, Error, Result};
use crate::problem::{Certificate, CompositeProblem};
use crate::scalar::{norm, step as grad_step, Scalar};
use crate::schedule::{extrapolate, Schedule, DEFAULT_A0};
use crate::solver::{
    compute_candidate, compute_u, compute_v, compute_x, IterationTrace, IterationView,
    LinearizationRecord, OracleCounts, RunResult, Termination, TraceRow,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig<T> {
    /// Fixed stepsize, playing the role of `λ`.
    pub step: T,
    pub rho_hat: T,
    pub max_iterations: usize,
    pub a0: T,
    pub denom_epsilon: T,
}

impl<T: Scalar> BaselineConfig<T> {
    pub fn new(step: T, rho_hat: T) -> Self {
        Self {
            step,
            rho_hat,
            max_iterations: 100_000,
            a0: T::lit(DEFAULT_A0),
            denom_epsilon: T::default_denom_epsilon(),
        }
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.rho_hat > T::zero()) {
            return Err(Error::InvalidConfig("rho_hat must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn start<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &BaselineConfig<T>,
    y0: &[T],
) -> Result<T> {
    config.validate()?;
    check_dim(problem.dimension(), y0.len())?;
    let h0 = problem.regularizer.value(y0);
    if !h0.is_finite() {
        return Err(Error::InfeasibleStart);
    }
    Ok(problem.smooth.value(y0) + h0)
}

fn finish<T: Scalar>(
    converged: bool,
    y: Vec<T>,
    v: Vec<T>,
    residual: T,
    k: usize,
    config: &BaselineConfig<T>,
    trace: IterationTrace<T>,
    counts: OracleCounts,
) -> RunResult<T> {
    RunResult {
        termination: if converged {
            Termination::Converged
        } else {
            Termination::IterationLimit
        },
        certificate: Certificate {
            y_hat: y,
            v_hat: v,
            residual_norm: residual,
            rho_hat: config.rho_hat,
            iterations: k,
            prox_calls: counts.prox_calls,
            grad_calls: counts.grad_calls,
            value_calls: counts.value_calls,
        },
        trace,
        counts,
    }
}

pub fn run_fista_constant<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &BaselineConfig<T>,
    y0: &[T],
) -> Result<RunResult<T>> {
    run_fista_constant_observed(problem, config, y0, |_| {})
}

/// Constant-stepsize FISTA. Uses the same k1/k2/k4 kernels as the adaptive
/// solver with `τ = 0`, so both produce identical iterates whenever the
/// adaptive run never changes `λ` and keeps `ξ = 0`.
pub fn run_fista_constant_observed<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &BaselineConfig<T>,
    y0: &[T],
    mut observer: impl FnMut(&IterationView<'_, T>),
) -> Result<RunResult<T>> {
    let phi0 = start(problem, config, y0)?;
    let mut counts = OracleCounts {
        value_calls: 1,
        ..Default::default()
    };
    let mut schedule = Schedule::new(config.a0)?;
    let mut y = y0.to_vec();
    let mut x = y0.to_vec();
    let mut y_min = y0.to_vec();
    let mut phi_min = phi0;
    let mut trace = IterationTrace {
        phi_y0: phi0,
        rows: Vec::new(),
    };
    let lambda = config.step;
    for k in 1..=config.max_iterations {
        let (big_a_prev, a, big_a) = schedule.step();
        let x_tilde = extrapolate(big_a_prev, big_a, a, &y, &x)?;
        let record = LinearizationRecord::at(problem, x_tilde, k)?;
        counts.value_calls += 1;
        counts.grad_calls += 1;
        let cand = compute_candidate(problem, &record, lambda, T::zero(), a);
        counts.prox_calls += 1;
        let f_y = problem.smooth.value(&cand.y);
        counts.value_calls += 1;
        let phi_y = f_y + problem.regularizer.value(&cand.y);
        if phi_y < phi_min {
            phi_min = phi_y;
            y_min = cand.y.clone();
        }
        let u = compute_u(&record, &cand.y, f_y, config.denom_epsilon);
        let x_next = compute_x(&problem.omega, big_a_prev, big_a, a, cand.tau, &cand.y, &y);
        let grad_y = problem.smooth.gradient(&cand.y);
        counts.grad_calls += 1;
        let v = compute_v(&record, &cand.y, &grad_y, lambda, cand.tau);
        let residual = norm(&v);
        observer(&IterationView {
            k,
            a,
            big_a_prev,
            big_a,
            record: &record,
            y: &cand.y,
            y_prev: &y,
            x: &x_next,
            x_prev: &x,
            y_min: &y_min,
            v: &v,
            lambda,
            tau: cand.tau,
            xi: T::zero(),
            u,
            l: T::zero(),
        });
        trace.rows.push(TraceRow {
            k,
            lambda,
            xi: T::zero(),
            tau: cand.tau,
            u,
            l: T::zero(),
            residual,
            phi_y,
            phi_ymin: phi_min,
            inner_repeats: 0,
            a,
        });
        y = cand.y;
        x = x_next;
        let converged = residual <= config.rho_hat;
        if converged || k == config.max_iterations {
            return Ok(finish(converged, y, v, residual, k, config, trace, counts));
        }
    }
    unreachable!("max_iterations >= 1 is validated")
}

/// `u⁺ = prox(u - s∇f(u), s)` with certificate
/// `v = (u - u⁺)/s + ∇f(u⁺) - ∇f(u)`.
pub fn run_prox_gradient<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &BaselineConfig<T>,
    y0: &[T],
) -> Result<RunResult<T>> {
    let phi0 = start(problem, config, y0)?;
    let mut counts = OracleCounts {
        value_calls: 1,
        grad_calls: 1,
        ..Default::default()
    };
    let s = config.step;
    let inv = T::one() / s;
    let mut u = y0.to_vec();
    let mut grad = problem.smooth.gradient(&u);
    check_dim(problem.dimension(), grad.len())?;
    let mut phi_min = phi0;
    let mut trace = IterationTrace {
        phi_y0: phi0,
        rows: Vec::new(),
    };
    for k in 1..=config.max_iterations {
        let next = problem.regularizer.prox(&grad_step(&u, s, &grad), s);
        counts.prox_calls += 1;
        let grad_next = problem.smooth.gradient(&next);
        counts.grad_calls += 1;
        let phi_next = problem.smooth.value(&next) + problem.regularizer.value(&next);
        counts.value_calls += 1;
        phi_min = phi_min.min(phi_next);
        let v: Vec<T> = u
            .iter()
            .zip(&next)
            .zip(grad_next.iter().zip(&grad))
            .map(|((&a, &b), (&gn, &g))| inv * (a - b) + gn - g)
            .collect();
        let residual = norm(&v);
        trace.rows.push(TraceRow {
            k,
            lambda: s,
            xi: T::zero(),
            tau: T::zero(),
            u: T::zero(),
            l: T::zero(),
            residual,
            phi_y: phi_next,
            phi_ymin: phi_min,
            inner_repeats: 0,
            a: T::zero(),
        });
        u = next;
        grad = grad_next;
        let converged = residual <= config.rho_hat;
        if converged || k == config.max_iterations {
            return Ok(finish(converged, u, v, residual, k, config, trace, counts));
        }
    }
    unreachable!("max_iterations >= 1 is validated")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{QpInstance, QuadraticSpec};
    use crate::solver::{run_observed, SolverConfig};

    fn convex() -> CompositeProblem<f64> {
        QpInstance::generate(&QuadraticSpec::new(6, 0.5, 4.0, 5))
            .unwrap()
            .to_problem()
            .unwrap()
    }

    #[test]
    fn fixed_step_matches_adaptive_when_nothing_adapts() {
        // λ_0 = γ/M̄ never triggers a shrink and ξ stays 0 on a convex f
        let p = convex();
        let lambda = 0.99 / 4.0;
        let cfg = SolverConfig::new(1e-9).with_lambda0(lambda);
        let mut ys = Vec::new();
        let adaptive = run_observed(&p, &cfg, &[0.0; 6], |v| ys.push(v.y.to_vec())).unwrap();
        let mut zs = Vec::new();
        let fixed =
            run_fista_constant_observed(&p, &BaselineConfig::new(lambda, 1e-9), &[0.0; 6], |v| {
                zs.push(v.y.to_vec())
            })
            .unwrap();
        assert!(adaptive
            .trace
            .rows
            .iter()
            .all(|r| r.lambda == lambda && r.xi == 0.0));
        assert_eq!(ys, zs);
        assert_eq!(adaptive.certificate.v_hat, fixed.certificate.v_hat);
    }

    #[test]
    fn prox_gradient_certificate() {
        let p = convex();
        let r = run_prox_gradient(&p, &BaselineConfig::new(0.25, 1e-8), &[0.0; 6]).unwrap();
        assert!(r.converged());
        assert!(p.verify_certificate(&r.certificate, 1.0, 1e-9).unwrap());
        let phis: Vec<f64> = r.trace.rows.iter().map(|row| row.phi_y).collect();
        // descent with step 1/M̄
        assert!(phis.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn stationary_start_and_divergence() {
        let p = convex();
        let r = run_prox_gradient(&p, &BaselineConfig::new(0.25, 1e-8), &[0.0; 6]).unwrap();
        let y = r.certificate.y_hat;
        let again = run_prox_gradient(&p, &BaselineConfig::new(0.25, 1e-6), &y).unwrap();
        assert_eq!(again.certificate.iterations, 1);
        // unconstrained, step 5/M̄: every mode with eigenvalue above 0.4 blows up
        let q = crate::problem::SmoothOracle::from_fns(
            |u: &[f64]| 2.0 * u[0] * u[0],
            |u: &[f64]| vec![4.0 * u[0]],
        );
        let p = CompositeProblem::new(
            q,
            std::sync::Arc::new(crate::prox::ZeroRegularizer::new(1)),
            crate::problem::Projector::Identity,
            1,
        )
        .unwrap();
        let r = run_fista_constant(
            &p,
            &BaselineConfig::new(1.25, 1e-8).with_max_iterations(50),
            &[1.0],
        )
        .unwrap();
        assert_eq!(r.termination, Termination::IterationLimit);
        assert!(r.certificate.residual_norm > 1e6);
    }

    #[test]
    fn rejects_bad_config() {
        let p = convex();
        for cfg in [
            BaselineConfig::new(0.0, 1e-6),
            BaselineConfig::new(1.0, 0.0),
            BaselineConfig::new(1.0, 1e-6).with_max_iterations(0),
        ] {
            assert!(matches!(
                run_prox_gradient(&p, &cfg, &[0.0; 6]),
                Err(Error::InvalidConfig(_))
            ));
            assert!(matches!(
                run_fista_constant(&p, &cfg, &[0.0; 6]),
                Err(Error::InvalidConfig(_))
            ));
        }
        assert_eq!(
            run_fista_constant(&p, &BaselineConfig::new(1.0, 1e-6), &[5.0; 6]).unwrap_err(),
            Error::InfeasibleStart
        );
    }
}
