//! Post-run invariant checks over an accepted-iteration trace.
//!
//! Structural invariants (monotonicity, the acceptance inequalities, the `τ`
//! formula, best-point bookkeeping) are checked exactly. Checks against `M̄`
//! and `m̲` run only when the problem carries that metadata.

use std::fmt;

use crate::diagnostics::{
    check_xk_drift, check_xk_optimality, ModelFunction, TheoreticalBounds, XkCheck,
};
use crate::error::Result;
use crate::problem::CompositeProblem;
use crate::scalar::Scalar;
use crate::solver::{run_observed, IterationTrace, RunResult, SolverConfig};

/// Slack for `U_k <= M̄` and `L_k <= m̲`, relative to `max(1, M̄)`. The ratios
/// divide a difference of function values by `|y - x̃|^2`, which can be as
/// small as the degeneracy guard, so they carry rounding error.
pub const DEFAULT_CURVATURE_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    /// First failing iteration and a description.
    pub failure: Option<(usize, String)>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            status: CheckStatus::Pass,
            failure: None,
        }
    }

    fn skipped(name: &'static str) -> Self {
        Self {
            name,
            status: CheckStatus::Skipped,
            failure: None,
        }
    }

    fn fail(&mut self, k: usize, msg: impl FnOnce() -> String) {
        if self.status != CheckStatus::Fail {
            self.status = CheckStatus::Fail;
            self.failure = Some((k, msg()));
        }
    }

    fn expect(&mut self, ok: bool, k: usize, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(k, msg);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<CheckResult>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.checks.extend(other.checks);
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "skip",
            };
            write!(f, "{status:>4}  {}", c.name)?;
            if let Some((k, msg)) = &c.failure {
                write!(f, " (iteration {k}: {msg})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Curvature constants for the bound checks, usually the problem's audit metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConstants<T> {
    pub m_bar: Option<T>,
    pub m_under: Option<T>,
    pub curvature_slack: T,
}

impl<T: Scalar> AuditConstants<T> {
    pub fn from_problem(problem: &CompositeProblem<T>) -> Self {
        Self {
            m_bar: problem.smooth.audit_lipschitz,
            m_under: problem.smooth.audit_curvature,
            curvature_slack: T::lit(DEFAULT_CURVATURE_SLACK),
        }
    }

    pub fn none() -> Self {
        Self {
            m_bar: None,
            m_under: None,
            curvature_slack: T::lit(DEFAULT_CURVATURE_SLACK),
        }
    }
}

/// `(ln(λ_0/λ̲)/ln θ, ln ξ̄/ln 2)`: the most λ-shrinks and ξ-doublings a run
/// can take. The ξ term is `-inf` when `ξ̄ = 0`.
fn inner_loop_terms<T: Scalar>(config: &SolverConfig<T>, m_bar: T, m_under: T) -> (f64, f64) {
    let lambda0 = config.lambda0.to_f64_lossy();
    let theta = config.theta.to_f64_lossy();
    let gamma = config.gamma.to_f64_lossy();
    let m_bar = m_bar.to_f64_lossy();
    let m_under = m_under.to_f64_lossy();
    let lambda_floor = if m_bar > 0.0 {
        (gamma / (theta * m_bar)).min(lambda0)
    } else {
        lambda0
    };
    let xi_bar = if m_under > 0.0 {
        (4.0 * m_under).max(1.0)
    } else {
        0.0
    };
    let lam_term = (lambda0 / lambda_floor).ln() / theta.ln();
    let xi_term = if xi_bar > 0.0 {
        xi_bar.ln() / 2f64.ln()
    } else {
        f64::NEG_INFINITY
    };
    (lam_term, xi_term)
}

/// Upper bound on total k2 executions as usually stated:
/// `N_0 + max{ln(λ_0/λ̲)/ln θ, ln ξ̄ / ln 2, 0} + 2`.
///
/// A rejection can shrink λ on one trial and double ξ on the next, so runs
/// that need both can exceed this; see [`inner_loop_sum_bound`].
pub fn inner_loop_bound<T: Scalar>(
    accepted: usize,
    config: &SolverConfig<T>,
    m_bar: T,
    m_under: T,
) -> f64 {
    let (lam, xi) = inner_loop_terms(config, m_bar, m_under);
    accepted as f64 + lam.max(xi).max(0.0) + 2.0
}

/// `N_0 + ln(λ_0/λ̲)/ln θ + max{ln ξ̄ / ln 2, 0} + 2`. Every rejection shrinks
/// λ (at most the first term, as λ stays above λ̲) or raises ξ (0 → 1, then
/// doublings up to ξ̄).
pub fn inner_loop_sum_bound<T: Scalar>(
    accepted: usize,
    config: &SolverConfig<T>,
    m_bar: T,
    m_under: T,
) -> f64 {
    let (lam, xi) = inner_loop_terms(config, m_bar, m_under);
    accepted as f64 + lam.max(0.0) + xi.max(0.0) + 2.0
}

/// `⌈log2(max{4 m̲, 1})⌉ + 2`
pub fn distinct_xi_bound<T: Scalar>(m_under: T) -> usize {
    let v = (4.0 * m_under.to_f64_lossy()).max(1.0);
    v.log2().ceil() as usize + 2
}

/// Checks every per-iteration invariant of an accepted trace.
pub fn audit_trace<T: Scalar>(
    trace: &IterationTrace<T>,
    config: &SolverConfig<T>,
    constants: &AuditConstants<T>,
) -> AuditReport {
    let rows = &trace.rows;
    let zero = T::zero();
    let mut lambda_mono = CheckResult::new("lambda_positive_nonincreasing");
    let mut xi_mono = CheckResult::new("xi_nonnegative_nondecreasing");
    let mut l_mono = CheckResult::new("L_nonnegative_nondecreasing");
    let mut tau_formula = CheckResult::new("tau_equals_2_xi_lambda_over_a");
    let mut u_gamma = CheckResult::new("U_lambda_le_gamma");
    let mut history = CheckResult::new("xi_lambda_history_inequality");
    let mut ymin = CheckResult::new("ymin_is_best_iterate");

    let mut prev_lambda = config.lambda0;
    let mut prev_xi = zero;
    let mut prev_l = zero;
    let mut best = trace.phi_y0;
    // λ_0, λ_1, ...
    let mut lambdas = vec![config.lambda0];
    let mut taus: Vec<T> = Vec::new();
    let mut checked_pair: Option<(T, T)> = None;

    for r in rows {
        let k = r.k;
        lambda_mono.expect(r.lambda > zero && r.lambda <= prev_lambda, k, || {
            format!("lambda {} after {}", r.lambda, prev_lambda)
        });
        xi_mono.expect(r.xi >= zero && r.xi >= prev_xi, k, || {
            format!("xi {} after {}", r.xi, prev_xi)
        });
        l_mono.expect(r.l >= zero && r.l >= prev_l, k, || {
            format!("L {} after {}", r.l, prev_l)
        });
        let tau = T::lit(2.0) * r.xi * r.lambda / r.a;
        tau_formula.expect(r.tau == tau, k, || format!("tau {} vs {}", r.tau, tau));
        u_gamma.expect(r.u * r.lambda <= config.gamma, k, || {
            format!("U lambda = {}", r.u * r.lambda)
        });

        lambdas.push(r.lambda);
        taus.push(r.tau);
        // ξ_k λ_{i-1} >= L_k λ_i + τ_i for i = 1..k; a full rescan is needed
        // only when (ξ, L) changed since the last full check.
        let full = checked_pair != Some((r.xi, r.l));
        let start = if full { 0 } else { taus.len() - 1 };
        for j in start..taus.len() {
            if r.xi * lambdas[j] < r.l * lambdas[j + 1] + taus[j] {
                history.fail(k, || format!("violated for i = {}", j + 1));
                break;
            }
        }
        checked_pair = Some((r.xi, r.l));

        best = best.min(r.phi_y);
        ymin.expect(r.phi_ymin == best, k, || {
            format!("phi_ymin {} but best {}", r.phi_ymin, best)
        });

        prev_lambda = r.lambda;
        prev_xi = r.xi;
        prev_l = r.l;
    }

    let mut checks = vec![
        lambda_mono,
        xi_mono,
        l_mono,
        tau_formula,
        u_gamma,
        history,
        ymin,
    ];
    let slack = constants.curvature_slack;

    match constants.m_bar {
        Some(m_bar) => {
            let floor = if m_bar > zero {
                (config.gamma / (config.theta * m_bar)).min(config.lambda0)
            } else {
                config.lambda0
            };
            // λ/θ and γ/(θ M̄) round differently; allow a few ulps
            let floor_tol = floor * T::lit(16.0) * T::epsilon();
            let mut c = CheckResult::new("lambda_ge_floor");
            let mut u = CheckResult::new("U_le_lipschitz");
            let scale = m_bar.max(T::one());
            for r in rows {
                c.expect(r.lambda >= floor - floor_tol, r.k, || {
                    format!("lambda {} < floor {}", r.lambda, floor)
                });
                u.expect(r.u <= m_bar + slack * scale, r.k, || {
                    format!("U {} > M {}", r.u, m_bar)
                });
            }
            checks.push(c);
            checks.push(u);
        }
        None => {
            checks.push(CheckResult::skipped("lambda_ge_floor"));
            checks.push(CheckResult::skipped("U_le_lipschitz"));
        }
    }

    match constants.m_under {
        Some(m_under) => {
            let ceiling = (T::lit(4.0) * m_under).max(T::one());
            let scale = constants.m_bar.unwrap_or(T::one()).max(T::one());
            let mut c = CheckResult::new("xi_le_ceiling");
            let mut l = CheckResult::new("L_le_lower_curvature");
            for r in rows {
                c.expect(r.xi <= ceiling, r.k, || {
                    format!("xi {} > {}", r.xi, ceiling)
                });
                l.expect(r.l <= m_under + slack * scale, r.k, || {
                    format!("L {} > m {}", r.l, m_under)
                });
            }
            checks.push(c);
            checks.push(l);

            let mut distinct = CheckResult::new("distinct_xi_values");
            let mut values: Vec<T> = vec![zero];
            for r in rows {
                if !values.contains(&r.xi) {
                    values.push(r.xi);
                }
            }
            let bound = distinct_xi_bound(m_under);
            distinct.expect(values.len() <= bound, rows.len(), || {
                format!("{} distinct values, bound {bound}", values.len())
            });
            checks.push(distinct);

            if m_under == zero {
                let mut c = CheckResult::new("convex_xi_and_tau_zero");
                for r in rows {
                    c.expect(r.xi == zero && r.tau == zero, r.k, || {
                        format!("xi = {}, tau = {}", r.xi, r.tau)
                    });
                }
                checks.push(c);
            } else {
                checks.push(CheckResult::skipped("convex_xi_and_tau_zero"));
            }
        }
        None => {
            for name in [
                "xi_le_ceiling",
                "L_le_lower_curvature",
                "distinct_xi_values",
                "convex_xi_and_tau_zero",
            ] {
                checks.push(CheckResult::skipped(name));
            }
        }
    }

    match (constants.m_bar, constants.m_under) {
        (Some(m_bar), Some(m_under)) => {
            let total = trace.k2_executions();
            for (name, bound) in [
                (
                    "inner_loop_bound",
                    inner_loop_bound(rows.len(), config, m_bar, m_under),
                ),
                (
                    "inner_loop_bound_sum",
                    inner_loop_sum_bound(rows.len(), config, m_bar, m_under),
                ),
            ] {
                let mut c = CheckResult::new(name);
                c.expect(total as f64 <= bound, rows.len(), || {
                    format!("{total} k2 executions, bound {bound:.3}")
                });
                checks.push(c);
            }
        }
        _ => {
            checks.push(CheckResult::skipped("inner_loop_bound"));
            checks.push(CheckResult::skipped("inner_loop_bound_sum"));
        }
    }

    AuditReport { checks }
}

/// [`audit_trace`] plus the certificate membership check (prox fixed point at
/// `tol`, for `s` in {0.1, 1, 10}) on converged runs.
pub fn audit_run<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &SolverConfig<T>,
    result: &RunResult<T>,
    certificate_tol: T,
) -> AuditReport {
    let mut report = audit_trace(
        &result.trace,
        config,
        &AuditConstants::from_problem(problem),
    );
    let mut cert = CheckResult::new("certificate_membership");
    if result.converged() {
        for s in [0.1, 1.0, 10.0] {
            let ok = problem
                .verify_certificate(&result.certificate, T::lit(s), certificate_tol)
                .unwrap_or(false);
            cert.expect(ok, result.certificate.iterations, || {
                format!("fails at s = {s}")
            });
        }
        let dom_ok = problem
            .regularizer
            .value(&result.certificate.y_hat)
            .is_finite();
        cert.expect(dom_ok, result.certificate.iterations, || {
            "y_hat outside dom h".into()
        });
    } else {
        cert.status = CheckStatus::Skipped;
    }
    report.checks.push(cert);
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions<T> {
    /// Prox fixed-point tolerance for the certificate check.
    pub certificate_tol: T,
    /// Grid resolution of the `x_k` oracle; `None` skips that check.
    pub xk_resolution: Option<T>,
}

impl<T: Scalar> Default for AuditOptions<T> {
    fn default() -> Self {
        Self {
            certificate_tol: T::lit(1e-8),
            xk_resolution: None,
        }
    }
}

/// Runs the solver and audits it, adding the drift bound `|x_k - x_0| <= C k`
/// (when `dom h` is bounded and the problem has curvature metadata) and, if
/// requested, the `x_k` subproblem oracle at every iteration.
pub fn audited_run<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &SolverConfig<T>,
    y0: &[T],
    options: &AuditOptions<T>,
) -> Result<(RunResult<T>, AuditReport)> {
    let mut xs: Vec<Vec<T>> = Vec::new();
    let mut xk = CheckResult::new("xk_subproblem_optimality");
    let h = problem.regularizer.as_ref();
    let result = run_observed(problem, config, y0, |view| {
        xs.push(view.x.to_vec());
        if let Some(res) = options.xk_resolution {
            let model = ModelFunction::from_view(view, h);
            match check_xk_optimality(&model, view.x, view.x_prev, view.a, &problem.omega, res) {
                Ok(XkCheck::Match { .. }) => {}
                Ok(XkCheck::Mismatch { distance, .. }) => {
                    xk.fail(view.k, || format!("oracle minimizer {distance} away"))
                }
                Ok(XkCheck::Inconclusive) => xk.fail(view.k, || "oracle did not converge".into()),
                Err(e) => xk.fail(view.k, || e.to_string()),
            }
        }
    })?;
    let mut report = audit_run(problem, config, &result, options.certificate_tol);

    if options.xk_resolution.is_none() {
        xk.status = CheckStatus::Skipped;
    }
    report.checks.push(xk);

    let mut drift = CheckResult::new("xk_drift_bound");
    match TheoreticalBounds::from_problem(problem, config) {
        Ok(bounds) if bounds.d_h.is_finite() => {
            let r = check_xk_drift(&xs, y0, &bounds);
            if let Some(k) = r.first_violation {
                drift.fail(k, || format!("|x_k - x_0| exceeds C k = {} k", bounds.c));
            }
        }
        _ => drift.status = CheckStatus::Skipped,
    }
    report.checks.push(drift);
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{QpInstance, QuadraticSpec};
    use crate::solver::{run, TraceRow};

    #[test]
    fn bound_examples() {
        let cfg = SolverConfig::<f64>::new(1e-6);
        // λ̲ = 0.495, so log2(1/0.495) ≈ 1.0145
        let b = inner_loop_bound(10, &cfg, 1.0, 0.0);
        assert!((b - (12.0 + (1.0f64 / 0.495).log2())).abs() < 1e-12);
        // ξ̄ = 8 dominates: 3 doublings
        assert!((inner_loop_bound(10, &cfg, 0.5, 2.0) - 15.0).abs() < 1e-12);
        // λ̲ = 0.2475, ξ̄ = 6: max form 2.585 + 2, sum form 2.015 + 2.585 + 2
        let max_form = inner_loop_bound(40, &cfg, 2.0, 1.5);
        let sum_form = inner_loop_sum_bound(40, &cfg, 2.0, 1.5);
        assert!((max_form - (42.0 + 6f64.log2())).abs() < 1e-12);
        assert!((sum_form - (42.0 + 6f64.log2() + (1.0f64 / 0.2475).log2())).abs() < 1e-12);
        assert_eq!(inner_loop_sum_bound(10, &cfg, 0.1, 0.0), 12.0);
        assert_eq!(distinct_xi_bound(0.0), 2);
        assert_eq!(distinct_xi_bound(0.3), 3);
        assert_eq!(distinct_xi_bound(1.0), 4);
        assert_eq!(distinct_xi_bound(1.1), 5);
    }

    fn solved() -> (CompositeProblem<f64>, SolverConfig<f64>, RunResult<f64>) {
        let p = QpInstance::generate(&QuadraticSpec::new(8, -2.0, 6.0, 21))
            .unwrap()
            .to_problem()
            .unwrap();
        let cfg = SolverConfig::new(1e-8);
        let r = run(&p, &cfg, &[0.0; 8]).unwrap();
        (p, cfg, r)
    }

    #[test]
    fn real_run_passes() {
        let (p, cfg, r) = solved();
        let report = audit_run(&p, &cfg, &r, 1e-8);
        assert!(report.passed(), "{report}");
        assert!(report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Skipped)
            .all(|c| c.name == "convex_xi_and_tau_zero"));
    }

    fn fails_only(
        trace: &IterationTrace<f64>,
        cfg: &SolverConfig<f64>,
        p: &CompositeProblem<f64>,
        name: &str,
    ) {
        let report = audit_trace(trace, cfg, &AuditConstants::from_problem(p));
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert!(failed.contains(&name), "{name} not caught: {report}");
    }

    #[test]
    fn tampered_traces_are_caught() {
        let (p, cfg, r) = solved();
        let k = r.trace.rows.len() / 2;
        let tamper = |f: &dyn Fn(&mut TraceRow<f64>)| {
            let mut t = r.trace.clone();
            f(&mut t.rows[k]);
            t
        };
        fails_only(
            &tamper(&|row| row.lambda *= 1.5),
            &cfg,
            &p,
            "lambda_positive_nonincreasing",
        );
        fails_only(
            &tamper(&|row| row.xi = -1.0),
            &cfg,
            &p,
            "xi_nonnegative_nondecreasing",
        );
        fails_only(
            &tamper(&|row| row.l = -1.0),
            &cfg,
            &p,
            "L_nonnegative_nondecreasing",
        );
        fails_only(
            &tamper(&|row| row.tau += 1e-3),
            &cfg,
            &p,
            "tau_equals_2_xi_lambda_over_a",
        );
        fails_only(
            &tamper(&|row| row.u = 1.0 / row.lambda),
            &cfg,
            &p,
            "U_lambda_le_gamma",
        );
        fails_only(
            &tamper(&|row| row.phi_ymin -= 1.0),
            &cfg,
            &p,
            "ymin_is_best_iterate",
        );
        fails_only(
            &tamper(&|row| row.lambda = 1e-9),
            &cfg,
            &p,
            "lambda_ge_floor",
        );
        fails_only(
            &tamper(&|row| row.inner_repeats += 100),
            &cfg,
            &p,
            "inner_loop_bound",
        );
        fails_only(
            &tamper(&|row| row.inner_repeats += 100),
            &cfg,
            &p,
            "inner_loop_bound_sum",
        );
        let mut t = r.trace.clone();
        for row in &mut t.rows[k..] {
            row.l += 50.0;
        }
        fails_only(&t, &cfg, &p, "xi_lambda_history_inequality");
        fails_only(&t, &cfg, &p, "L_le_lower_curvature");
        let mut t = r.trace.clone();
        for (i, row) in t.rows.iter_mut().enumerate() {
            row.xi = 2f64.powi(i as i32);
            row.tau = 2.0 * row.xi * row.lambda / row.a;
        }
        fails_only(&t, &cfg, &p, "distinct_xi_values");
        fails_only(&t, &cfg, &p, "xi_le_ceiling");
    }

    #[test]
    fn audited_run_adds_oracle_checks() {
        let p = QpInstance::generate(&QuadraticSpec::new(2, -1.0, 3.0, 6))
            .unwrap()
            .to_problem()
            .unwrap();
        let cfg = SolverConfig::new(1e-8);
        let opts = AuditOptions {
            xk_resolution: Some(1e-6),
            ..Default::default()
        };
        let (r, report) = audited_run(&p, &cfg, &[0.0, 0.0], &opts).unwrap();
        assert!(r.converged());
        assert!(report.passed(), "{report}");
        assert_eq!(
            report.get("xk_subproblem_optimality").unwrap().status,
            CheckStatus::Pass
        );
        assert_eq!(
            report.get("xk_drift_bound").unwrap().status,
            CheckStatus::Pass
        );
    }

    #[test]
    fn max_form_bound_is_exceeded_when_both_terms_are_needed() {
        // 3 ξ increases (0, 1, 2, 4) and 2 λ shrinks: 5 repeats against
        // max{2.01, 2.585} + 2
        let mut spec = QuadraticSpec::new(2, -1.5, 2.0, 202);
        spec.c_scale = 0.3;
        let p = QpInstance::generate(&spec).unwrap().to_problem().unwrap();
        let cfg = SolverConfig::new(1e-300).with_max_iterations(100);
        let r = run(&p, &cfg, &[0.0, 0.0]).unwrap();
        let report = audit_trace(&r.trace, &cfg, &AuditConstants::from_problem(&p));
        assert_eq!(r.trace.k2_executions() - r.trace.rows.len(), 5);
        assert_eq!(
            report.get("inner_loop_bound").unwrap().status,
            CheckStatus::Fail
        );
        assert_eq!(
            report.get("inner_loop_bound_sum").unwrap().status,
            CheckStatus::Pass
        );
        let failures: Vec<_> = report.failures().map(|c| c.name).collect();
        assert_eq!(failures, vec!["inner_loop_bound"]);
    }

    #[test]
    fn metadata_free_checks_are_skipped() {
        let (_, cfg, r) = solved();
        let report = audit_trace(&r.trace, &cfg, &AuditConstants::none());
        assert!(report.passed());
        assert_eq!(
            report.get("U_le_lipschitz").unwrap().status,
            CheckStatus::Skipped
        );
        assert_eq!(
            report.get("inner_loop_bound").unwrap().status,
            CheckStatus::Skipped
        );
    }
}
