//! The adaptive FISTA-type method: extrapolation, one prox step per trial,
//! curvature estimates `U` and `L`, the acceptance test and the
//! `(ξ, λ)` update, and the auxiliary sequence `x_k`.
//!
//! No Lipschitz or curvature constant is read; `λ` (stepsize) and `ξ`
//! (curvature penalty) are estimated on the fly. On convex `f`, `ξ` stays 0 and
//! the method is FISTA with stepsize `λ_k`.

use crate::error::{check_dim, Error, Result};
use crate::problem::{Certificate, CompositeProblem, Projector};
use crate::scalar::{dist_sq, dot, lincomb, norm, norm_sq, step, sub, Scalar};
use crate::schedule::{extrapolate, Schedule, DEFAULT_A0};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Initial stepsize `λ_0 > 0`.
    pub lambda0: T,
    /// Stepsize shrink factor `θ > 1`.
    pub theta: T,
    /// Acceptance threshold for `Uλ`, in `(0, 1)`.
    pub gamma: T,
    /// Stationarity tolerance `ρ̂ > 0`.
    pub rho_hat: T,
    pub a0: T,
    pub max_outer_iterations: usize,
    pub max_inner_repeats_per_iteration: usize,
    /// Curvature ratios with `|u - x̃|^2 <= denom_epsilon * (1 + |x̃|^2)` count as 0.
    pub denom_epsilon: T,
}

impl<T: Scalar> SolverConfig<T> {
    /// Defaults: `λ_0 = 1`, `θ = 2`, `γ = 0.99`, `A_0 = 12`.
    pub fn new(rho_hat: T) -> Self {
        Self {
            lambda0: T::one(),
            theta: T::lit(2.0),
            gamma: T::lit(0.99),
            rho_hat,
            a0: T::lit(DEFAULT_A0),
            max_outer_iterations: 100_000,
            max_inner_repeats_per_iteration: 1_000_000,
            denom_epsilon: T::default_denom_epsilon(),
        }
    }

    pub fn with_lambda0(mut self, lambda0: T) -> Self {
        self.lambda0 = lambda0;
        self
    }

    pub fn with_theta(mut self, theta: T) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_outer_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda0 > T::zero()) || !self.lambda0.is_finite() {
            return bad(format!("lambda0 must be positive, got {}", self.lambda0));
        }
        if !(self.theta > T::one()) || !self.theta.is_finite() {
            return bad(format!("theta must exceed 1, got {}", self.theta));
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.rho_hat > T::zero()) {
            return bad(format!("rho_hat must be positive, got {}", self.rho_hat));
        }
        if !(self.a0 > T::zero()) || !self.a0.is_finite() {
            return bad(format!("A0 must be positive, got {}", self.a0));
        }
        if self.max_outer_iterations == 0 {
            return bad("max_outer_iterations must be at least 1".into());
        }
        if !(self.denom_epsilon >= T::zero()) {
            return bad("denom_epsilon must be non-negative".into());
        }
        Ok(())
    }
}

/// `(x̃_i, f(x̃_i), ∇f(x̃_i))`, enough to evaluate `l_f(·; x̃_i)` without the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationRecord<T> {
    pub x_tilde: Vec<T>,
    pub f_at: T,
    pub grad_at: Vec<T>,
    pub index: usize,
    x_tilde_norm_sq: T,
}

impl<T: Scalar> LinearizationRecord<T> {
    pub fn new(x_tilde: Vec<T>, f_at: T, grad_at: Vec<T>, index: usize) -> Self {
        let x_tilde_norm_sq = norm_sq(&x_tilde);
        Self {
            x_tilde,
            f_at,
            grad_at,
            index,
            x_tilde_norm_sq,
        }
    }

    /// Builds the record at `x_tilde` with one value and one gradient query.
    pub fn at(problem: &CompositeProblem<T>, x_tilde: Vec<T>, index: usize) -> Result<Self> {
        check_dim(problem.dimension(), x_tilde.len())?;
        let f_at = problem.smooth.value(&x_tilde);
        let grad_at = problem.smooth.gradient(&x_tilde);
        check_dim(problem.dimension(), grad_at.len())?;
        Ok(Self::new(x_tilde, f_at, grad_at, index))
    }

    /// `l_f(u; x̃) = f(x̃) + <∇f(x̃), u - x̃>`
    pub fn linearization(&self, u: &[T]) -> T {
        self.f_at + dot(&self.grad_at, &sub(u, &self.x_tilde))
    }

    /// `|u - x̃|^2` if it clears the degeneracy guard.
    fn guarded_denominator(&self, u: &[T], eps: T) -> Option<T> {
        let d = dist_sq(u, &self.x_tilde);
        (d > eps * (T::one() + self.x_tilde_norm_sq)).then_some(d)
    }

    /// `2 [f(u) - l_f(u; x̃)] / |u - x̃|^2`, or 0 at degenerate points.
    pub fn upper_curvature(&self, u: &[T], f_u: T, eps: T) -> T {
        match self.guarded_denominator(u, eps) {
            Some(d) => T::lit(2.0) * (f_u - self.linearization(u)) / d,
            None => T::zero(),
        }
    }

    /// `2 [l_f(u; x̃) - f(u)] / |u - x̃|^2`, or 0 at degenerate points.
    pub fn lower_curvature(&self, u: &[T], f_u: T, eps: T) -> T {
        match self.guarded_denominator(u, eps) {
            Some(d) => T::lit(2.0) * (self.linearization(u) - f_u) / d,
            None => T::zero(),
        }
    }
}

#[derive(Debug, Clone)]
struct RatioCache<T> {
    y_min: Vec<T>,
    max: T,
    scanned: usize,
}

/// Accepted `λ_i`, `τ_i` and the linearization records `x̃_1..x̃_k`.
#[derive(Debug, Clone)]
pub struct HistoryLedger<T> {
    /// `λ_0, λ_1, ..., λ_{k-1}`
    lambdas: Vec<T>,
    /// `τ_1, ..., τ_{k-1}`
    taus: Vec<T>,
    records: Vec<LinearizationRecord<T>>,
    cache: Option<RatioCache<T>>,
    /// `(ξ, L)` of the last accepted iteration.
    last_xi: T,
    last_l: T,
}

impl<T: Scalar> HistoryLedger<T> {
    pub fn new(lambda0: T) -> Self {
        Self {
            lambdas: vec![lambda0],
            taus: Vec::new(),
            records: Vec::new(),
            cache: None,
            last_xi: T::zero(),
            last_l: T::zero(),
        }
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn taus(&self) -> &[T] {
        &self.taus
    }

    pub fn records(&self) -> &[LinearizationRecord<T>] {
        &self.records
    }

    /// `λ_{k-1}` for the iteration in progress.
    pub fn last_lambda(&self) -> T {
        *self.lambdas.last().expect("ledger always holds lambda_0")
    }

    pub fn push_record(&mut self, record: LinearizationRecord<T>) {
        self.records.push(record);
    }

    pub fn accept(&mut self, lambda: T, tau: T, xi: T, l: T) {
        self.lambdas.push(lambda);
        self.taus.push(tau);
        self.last_xi = xi;
        self.last_l = l;
    }

    /// `max_i 2 [l_f(ỹ; x̃_i) - f(ỹ)] / |ỹ - x̃_i|^2` over every stored record.
    ///
    /// Incremental while `y_min` is unchanged; rescans when it moves.
    pub fn ymin_ratio_max(&mut self, y_min: &[T], f_ymin: T, eps: T) -> T {
        let reuse = matches!(&self.cache, Some(c) if c.y_min == y_min);
        if !reuse {
            self.cache = Some(RatioCache {
                y_min: y_min.to_vec(),
                max: T::neg_infinity(),
                scanned: 0,
            });
        }
        let cache = self.cache.as_mut().expect("cache initialized above");
        for rec in &self.records[cache.scanned..] {
            cache.max = cache.max.max(rec.lower_curvature(y_min, f_ymin, eps));
        }
        cache.scanned = self.records.len();
        cache.max
    }

    /// The same maximum by a full scan, bypassing the cache.
    pub fn ymin_ratio_max_uncached(&self, y_min: &[T], f_ymin: T, eps: T) -> T {
        self.records.iter().fold(T::neg_infinity(), |m, rec| {
            m.max(rec.lower_curvature(y_min, f_ymin, eps))
        })
    }

    /// Whether `ξ λ_{i-1} < L λ_i + τ_i` for some accepted `i`.
    pub fn history_violated(&self, xi: T, l: T) -> bool {
        if self.taus.is_empty() {
            return false;
        }
        // Every accepted i satisfied the inequality with (last_xi, last_l);
        // raising ξ with L unchanged cannot break it.
        if l == self.last_l && xi >= self.last_xi {
            return false;
        }
        self.history_violated_uncached(xi, l)
    }

    pub fn history_violated_uncached(&self, xi: T, l: T) -> bool {
        self.taus
            .iter()
            .enumerate()
            .any(|(j, &tau_i)| xi * self.lambdas[j] < l * self.lambdas[j + 1] + tau_i)
    }
}

/// A trial point from one k2 execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub tau: T,
    /// Prox stepsize `λ / (1 + τ)`.
    pub step: T,
    pub y: Vec<T>,
}

/// `τ = 2ξλ/a` and `y = argmin_u l_f(u; x̃) + h(u) + (1+τ)/(2λ) |u - x̃|^2`,
/// i.e. `y = prox_h(x̃ - s ∇f(x̃), s)` with `s = λ/(1+τ)`.
pub fn compute_candidate<T: Scalar>(
    problem: &CompositeProblem<T>,
    record: &LinearizationRecord<T>,
    lambda: T,
    xi: T,
    a: T,
) -> Candidate<T> {
    let tau = T::lit(2.0) * xi * lambda / a;
    let s = lambda / (T::one() + tau);
    let z = step(&record.x_tilde, s, &record.grad_at);
    let y = problem.regularizer.prox(&z, s);
    Candidate { tau, step: s, y }
}

/// `U = 2 [f(y) - l_f(y; x̃)] / |y - x̃|^2`, 0 when `y` is (numerically) `x̃`.
pub fn compute_u<T: Scalar>(record: &LinearizationRecord<T>, y: &[T], f_y: T, eps: T) -> T {
    record.upper_curvature(y, f_y, eps)
}

/// Keeps whichever of the incumbent and `y` has the smaller `φ`; ties keep the incumbent.
pub fn update_best<'a, T: Scalar>(
    y_min_prev: &'a [T],
    phi_prev: T,
    y: &'a [T],
    phi_y: T,
) -> Result<(&'a [T], T)> {
    if phi_prev == T::infinity() && phi_y == T::infinity() {
        return Err(Error::Internal(
            "both best-point candidates lie outside dom h".into(),
        ));
    }
    if phi_y < phi_prev {
        Ok((y, phi_y))
    } else {
        Ok((y_min_prev, phi_prev))
    }
}

/// `L = max{ ratio(y_{k-1}, x̃_k), max_i ratio(ỹ^min, x̃_i), L_{k-1}, 0 }` where
/// `ratio(u, x̃) = 2 [l_f(u; x̃) - f(u)] / |u - x̃|^2`.
#[allow(clippy::too_many_arguments)]
pub fn compute_l<T: Scalar>(
    ledger: &mut HistoryLedger<T>,
    current: &LinearizationRecord<T>,
    y_prev: &[T],
    f_y_prev: T,
    y_min: &[T],
    f_ymin: T,
    l_prev: T,
    eps: T,
) -> T {
    let prev_term = current.lower_curvature(y_prev, f_y_prev, eps);
    let hist_term = ledger.ymin_ratio_max(y_min, f_ymin, eps);
    prev_term.max(hist_term).max(l_prev).max(T::zero())
}

/// True when the trial must be rejected: `Uλ > γ`, or `ξ λ_{k-1} < Lλ + τ`,
/// or `ξ λ_{i-1} < L λ_i + τ_i` for an accepted `i`. All comparisons strict.
pub fn step_k3_conditions<T: Scalar>(
    ledger: &HistoryLedger<T>,
    u: T,
    l: T,
    lambda: T,
    tau: T,
    xi: T,
    gamma: T,
) -> bool {
    u * lambda > gamma || curvature_check(ledger, l, lambda, tau, xi)
}

fn curvature_check<T: Scalar>(ledger: &HistoryLedger<T>, l: T, lambda: T, tau: T, xi: T) -> bool {
    xi * ledger.last_lambda() < l * lambda + tau || ledger.history_violated(xi, l)
}

/// The `(ξ, λ)` update applied after a rejection.
///
/// `λ` shrinks first (when `Uλ > γ`); the curvature check then uses the new `λ`
/// with the `τ` of the rejected trial, and bumps `ξ` (0 → 1, else doubled).
#[allow(clippy::too_many_arguments)]
pub fn update_subroutine<T: Scalar>(
    ledger: &HistoryLedger<T>,
    xi: T,
    lambda: T,
    u: T,
    l: T,
    tau: T,
    theta: T,
    gamma: T,
) -> (T, T) {
    let mut lambda = lambda;
    if u * lambda > gamma {
        assert!(u > T::zero(), "U lambda > gamma with U <= 0");
        lambda = (lambda / theta).min(gamma / u);
    }
    let mut xi = xi;
    if curvature_check(ledger, l, lambda, tau, xi) {
        xi = if xi == T::zero() {
            T::one()
        } else {
            T::lit(2.0) * xi
        };
    }
    (xi, lambda)
}

/// `x_k = P_Ω( ((1+τ)A_k y_k - A_{k-1} y_{k-1}) / (a (τ a + 1)) )`.
pub fn compute_x<T: Scalar>(
    omega: &Projector<T>,
    a_prev_big: T,
    a_next_big: T,
    a: T,
    tau: T,
    y_next: &[T],
    y_prev: &[T],
) -> Vec<T> {
    let denom = a * (tau * a + T::one());
    let wy = (T::one() + tau) * a_next_big / denom;
    let wp = a_prev_big / denom;
    omega.project(&lincomb(wy, y_next, -wp, y_prev))
}

/// `v = ((1+τ)/λ)(x̃ - y) + ∇f(y) - ∇f(x̃)`, with `∇f(x̃)` taken from the record.
pub fn compute_v<T: Scalar>(
    record: &LinearizationRecord<T>,
    y: &[T],
    grad_y: &[T],
    lambda: T,
    tau: T,
) -> Vec<T> {
    let c = (T::one() + tau) / lambda;
    record
        .x_tilde
        .iter()
        .zip(y)
        .zip(grad_y.iter().zip(&record.grad_at))
        .map(|((&xt, &yi), (&gy, &gx))| c * (xt - yi) + gy - gx)
        .collect()
}

/// One accepted iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub k: usize,
    pub lambda: T,
    pub xi: T,
    pub tau: T,
    pub u: T,
    pub l: T,
    /// `|v_k|`
    pub residual: T,
    pub phi_y: T,
    pub phi_ymin: T,
    /// Rejected trials before acceptance.
    pub inner_repeats: usize,
    /// `a_{k-1}`
    pub a: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<T> {
    pub phi_y0: T,
    pub rows: Vec<TraceRow<T>>,
}

impl<T> IterationTrace<T> {
    /// Total k2 executions: one per accepted iteration plus every rejection.
    pub fn k2_executions(&self) -> usize {
        self.rows.iter().map(|r| r.inner_repeats + 1).sum()
    }
}

/// Snapshot handed to observers after each accepted iteration.
#[derive(Debug)]
pub struct IterationView<'a, T> {
    pub k: usize,
    pub a: T,
    pub big_a_prev: T,
    pub big_a: T,
    pub record: &'a LinearizationRecord<T>,
    pub y: &'a [T],
    pub y_prev: &'a [T],
    pub x: &'a [T],
    pub x_prev: &'a [T],
    pub y_min: &'a [T],
    pub v: &'a [T],
    pub lambda: T,
    pub tau: T,
    pub xi: T,
    pub u: T,
    pub l: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCounts {
    pub prox_calls: usize,
    pub grad_calls: usize,
    pub value_calls: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub termination: Termination,
    /// On `IterationLimit` this holds the last `(y_k, v_k)`.
    pub certificate: Certificate<T>,
    pub trace: IterationTrace<T>,
    pub counts: OracleCounts,
}

impl<T> RunResult<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Mutable per-run state.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub k: usize,
    pub schedule: Schedule<T>,
    pub y: Vec<T>,
    pub f_y: T,
    pub x: Vec<T>,
    pub y_min: Vec<T>,
    pub f_ymin: T,
    pub phi_ymin: T,
    pub lambda: T,
    pub xi: T,
    pub l: T,
    pub ledger: HistoryLedger<T>,
    pub counts: OracleCounts,
}

impl<T: Scalar> SolverState<T> {
    pub fn initialize(
        problem: &CompositeProblem<T>,
        config: &SolverConfig<T>,
        y0: &[T],
    ) -> Result<Self> {
        config.validate()?;
        check_dim(problem.dimension(), y0.len())?;
        let h0 = problem.regularizer.value(y0);
        if !h0.is_finite() {
            return Err(Error::InfeasibleStart);
        }
        let f0 = problem.smooth.value(y0);
        Ok(Self {
            k: 0,
            schedule: Schedule::new(config.a0)?,
            y: y0.to_vec(),
            f_y: f0,
            x: y0.to_vec(),
            y_min: y0.to_vec(),
            f_ymin: f0,
            phi_ymin: f0 + h0,
            lambda: config.lambda0,
            xi: T::zero(),
            l: T::zero(),
            ledger: HistoryLedger::new(config.lambda0),
            counts: OracleCounts {
                value_calls: 1,
                ..Default::default()
            },
        })
    }
}

/// Runs the solver from `y0 ∈ dom h`.
pub fn run<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &SolverConfig<T>,
    y0: &[T],
) -> Result<RunResult<T>> {
    run_observed(problem, config, y0, |_| {})
}

/// [`run`], calling `observer` after every accepted iteration.
pub fn run_observed<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &SolverConfig<T>,
    y0: &[T],
    mut observer: impl FnMut(&IterationView<'_, T>),
) -> Result<RunResult<T>> {
    let mut st = SolverState::initialize(problem, config, y0)?;
    let eps = config.denom_epsilon;
    let mut trace = IterationTrace {
        phi_y0: st.phi_ymin,
        rows: Vec::new(),
    };

    loop {
        st.k += 1;
        let k = st.k;

        // k1
        let (big_a_prev, a, big_a) = st.schedule.step();
        let x_tilde = extrapolate(big_a_prev, big_a, a, &st.y, &st.x)?;
        let record = LinearizationRecord::at(problem, x_tilde, k)?;
        st.counts.value_calls += 1;
        st.counts.grad_calls += 1;
        st.ledger.push_record(record.clone());

        let mut lambda = st.lambda;
        let mut xi = st.xi;
        let mut repeats = 0usize;
        let (cand, f_y, phi_y, u, l, ymin_is_y) = loop {
            // k2
            let cand = compute_candidate(problem, &record, lambda, xi, a);
            st.counts.prox_calls += 1;
            let f_y = problem.smooth.value(&cand.y);
            st.counts.value_calls += 1;
            let phi_y = f_y + problem.regularizer.value(&cand.y);
            let u = compute_u(&record, &cand.y, f_y, eps);
            let (best, _) = update_best(&st.y_min, st.phi_ymin, &cand.y, phi_y)?;
            let ymin_is_y = std::ptr::eq(best.as_ptr(), cand.y.as_ptr());
            let f_best = if ymin_is_y { f_y } else { st.f_ymin };
            let l = compute_l(
                &mut st.ledger,
                &record,
                &st.y,
                st.f_y,
                best,
                f_best,
                st.l,
                eps,
            );

            // k3
            if !step_k3_conditions(&st.ledger, u, l, lambda, cand.tau, xi, config.gamma) {
                break (cand, f_y, phi_y, u, l, ymin_is_y);
            }
            repeats += 1;
            if repeats > config.max_inner_repeats_per_iteration {
                return Err(Error::InnerLoopCap {
                    iteration: k,
                    cap: config.max_inner_repeats_per_iteration,
                });
            }
            (xi, lambda) = update_subroutine(
                &st.ledger,
                xi,
                lambda,
                u,
                l,
                cand.tau,
                config.theta,
                config.gamma,
            );
        };

        let tau = cand.tau;
        let y_next = cand.y;
        if ymin_is_y {
            st.y_min = y_next.clone();
            st.f_ymin = f_y;
            st.phi_ymin = phi_y;
        }
        st.ledger.accept(lambda, tau, xi, l);

        // k4
        let x_next = compute_x(&problem.omega, big_a_prev, big_a, a, tau, &y_next, &st.y);
        let grad_y = problem.smooth.gradient(&y_next);
        st.counts.grad_calls += 1;
        let v = compute_v(&record, &y_next, &grad_y, lambda, tau);
        let residual = norm(&v);

        observer(&IterationView {
            k,
            a,
            big_a_prev,
            big_a,
            record: &record,
            y: &y_next,
            y_prev: &st.y,
            x: &x_next,
            x_prev: &st.x,
            y_min: &st.y_min,
            v: &v,
            lambda,
            tau,
            xi,
            u,
            l,
        });
        trace.rows.push(TraceRow {
            k,
            lambda,
            xi,
            tau,
            u,
            l,
            residual,
            phi_y,
            phi_ymin: st.phi_ymin,
            inner_repeats: repeats,
            a,
        });

        st.lambda = lambda;
        st.xi = xi;
        st.l = l;
        st.y = y_next;
        st.f_y = f_y;
        st.x = x_next;

        let converged = residual <= config.rho_hat;
        if converged || k >= config.max_outer_iterations {
            let certificate = Certificate {
                y_hat: st.y,
                v_hat: v,
                residual_norm: residual,
                rho_hat: config.rho_hat,
                iterations: k,
                prox_calls: st.counts.prox_calls,
                grad_calls: st.counts.grad_calls,
                value_calls: st.counts.value_calls,
            };
            return Ok(RunResult {
                termination: if converged {
                    Termination::Converged
                } else {
                    Termination::IterationLimit
                },
                certificate,
                trace,
                counts: st.counts,
            });
        }
    }
}
