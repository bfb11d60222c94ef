//! Audited solves over a generated mixed convex/nonconvex corpus.

use rayon::prelude::*;
use varfista::audit::{audited_run, AuditOptions, AuditReport};
use varfista::gallery::{QpInstance, QuadraticSpec};
use varfista::schedule::check_schedule_bounds;
use varfista::{Config, Problem, SmoothOracle};

use crate::cli::SuiteArgs;
use crate::instance::default_start;
use crate::{EXIT_AUDIT, EXIT_OK};

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub label: String,
    pub spec: QuadraticSpec,
}

/// The first half convex (spectrum [1, 10]), the rest nonconvex ([-1, 10]),
/// all on the box [-1, 1]^dim with seeds `seed, seed + 1, ...`.
pub fn corpus(n_instances: usize, seed: u64, dim: usize, convex_only: bool) -> Vec<CorpusEntry> {
    let n_convex = if convex_only {
        n_instances
    } else {
        n_instances.div_ceil(2)
    };
    (0..n_instances)
        .map(|i| {
            let convex = i < n_convex;
            let lo = if convex { 1.0 } else { -1.0 };
            let s = seed.wrapping_add(i as u64);
            CorpusEntry {
                label: format!("{}-{i:02}", if convex { "convex" } else { "nonconvex" }),
                spec: QuadraticSpec::new(dim, lo, 10.0, s),
            }
        })
        .collect()
}

/// Adds a constant to every gradient component while keeping values exact.
pub fn with_gradient_fault(mut problem: Problem, bias: f64) -> Problem {
    let inner = problem.smooth.clone();
    let grad_inner = inner.clone();
    problem.smooth = SmoothOracle::from_fns(
        move |u: &[f64]| inner.value(u),
        move |u: &[f64]| {
            grad_inner
                .gradient(u)
                .into_iter()
                .map(|g| g + bias)
                .collect()
        },
    )
    .with_audit(
        problem.smooth.audit_lipschitz,
        problem.smooth.audit_curvature,
    );
    problem
}

#[derive(Debug, Clone)]
pub struct InstanceOutcome {
    pub label: String,
    pub seed: u64,
    /// `Err` when the solver itself stopped with an error.
    pub report: Result<AuditReport, String>,
    pub iterations: usize,
    pub k2_executions: usize,
    pub xi_max: f64,
    pub lambda_min: f64,
}

impl InstanceOutcome {
    pub fn passed(&self) -> bool {
        matches!(&self.report, Ok(r) if r.passed())
    }
}

pub fn audit_instance(entry: &CorpusEntry, config: &Config, fault: bool) -> InstanceOutcome {
    let mut outcome = InstanceOutcome {
        label: entry.label.clone(),
        seed: entry.spec.seed,
        report: Err(String::new()),
        iterations: 0,
        k2_executions: 0,
        xi_max: 0.0,
        lambda_min: config.lambda0,
    };
    let attempt = || -> varfista::Result<_> {
        let inst = QpInstance::generate(&entry.spec)?;
        let mut problem = inst.to_problem::<f64>()?;
        if fault {
            problem = with_gradient_fault(problem, 0.5);
        }
        let options = AuditOptions {
            certificate_tol: 1e-8,
            xk_resolution: (inst.n <= 2).then_some(1e-4),
        };
        audited_run(&problem, config, &default_start(&inst), &options)
    };
    match attempt() {
        Ok((result, report)) => {
            outcome.iterations = result.certificate.iterations;
            outcome.k2_executions = result.trace.k2_executions();
            for row in &result.trace.rows {
                outcome.xi_max = outcome.xi_max.max(row.xi);
                outcome.lambda_min = outcome.lambda_min.min(row.lambda);
            }
            outcome.report = Ok(report);
        }
        Err(e) => outcome.report = Err(e.to_string()),
    }
    outcome
}

pub fn cmd_audit_suite(args: &SuiteArgs) -> anyhow::Result<i32> {
    let config = Config::new(args.rho).with_max_iterations(args.iters);
    config.validate()?;
    let entries = corpus(args.n_instances, args.seed, args.dim, args.convex_only);
    let outcomes: Vec<InstanceOutcome> = entries
        .par_iter()
        .map(|e| audit_instance(e, &config, args.inject_gradient_fault))
        .collect();

    let mut failed = 0;
    let schedule = check_schedule_bounds::<f64>(args.iters)?;
    for check in &schedule.checks {
        let status = if check.holds { "pass" } else { "FAIL" };
        println!(
            "{status}  schedule {} (k <= {})",
            check.name, schedule.k_max
        );
        if !check.holds {
            failed += 1;
            println!("      first violation at k = {:?}", check.first_violation);
        }
    }

    for o in &outcomes {
        let head = format!(
            "{:<13} seed={:<4} N={:<6} k2={:<6} xi_max={} lambda_min={:.4e}",
            o.label, o.seed, o.iterations, o.k2_executions, o.xi_max, o.lambda_min
        );
        match &o.report {
            Ok(report) if report.passed() => println!("pass  {head}"),
            Ok(report) => {
                failed += 1;
                println!("FAIL  {head}");
                for c in report.failures() {
                    let (k, msg) = c.failure.clone().unwrap_or_default();
                    println!("      {} at iteration {k}: {msg}", c.name);
                }
            }
            Err(msg) => {
                failed += 1;
                println!("FAIL  {head}");
                println!("      solver error: {msg}");
            }
        }
    }
    println!(
        "{} of {} instances passed",
        outcomes.iter().filter(|o| o.passed()).count(),
        outcomes.len()
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_AUDIT })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_layout() {
        let c = corpus(5, 10, 3, false);
        let convex: Vec<bool> = c.iter().map(|e| e.spec.eig_lo > 0.0).collect();
        assert_eq!(convex, vec![true, true, true, false, false]);
        assert_eq!(c[4].spec.seed, 14);
        assert!(corpus(4, 0, 3, true).iter().all(|e| e.spec.eig_lo == 1.0));
    }
}
