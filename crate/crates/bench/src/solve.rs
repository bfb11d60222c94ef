use std::fs::File;
use std::io::BufWriter;

use anyhow::{bail, Context};
use serde::Serialize;
use varfista::audit::{audited_run, AuditOptions, AuditReport, CheckStatus};
use varfista::baseline::{run_fista_constant, run_prox_gradient, BaselineConfig};
use varfista::trace::write_trace;
use varfista::{run, Config, Outcome};

use crate::cli::{SolveArgs, SolverKind};
use crate::instance::{default_start, load_instance};
use crate::{EXIT_AUDIT, EXIT_CAP, EXIT_OK};

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub rho: f64,
    pub lambda0: f64,
    pub theta: f64,
    pub gamma: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub phi: f64,
    pub y_hat: Vec<f64>,
    pub prox_calls: usize,
    pub grad_calls: usize,
    pub value_calls: usize,
    pub k2_executions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    pub name: String,
    pub status: String,
    pub iteration: Option<usize>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub instance: String,
    pub seed: Option<u64>,
    pub solver: String,
    pub config: ConfigEcho,
    pub certificate: CertificateSummary,
    pub trace: Option<String>,
    pub audit: Option<Vec<AuditEntry>>,
}

pub fn audit_entries(report: &AuditReport) -> Vec<AuditEntry> {
    report
        .checks
        .iter()
        .map(|c| AuditEntry {
            name: c.name.to_string(),
            status: match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "fail",
                CheckStatus::Skipped => "skipped",
            }
            .to_string(),
            iteration: c.failure.as_ref().map(|f| f.0),
            detail: c.failure.as_ref().map(|f| f.1.clone()),
        })
        .collect()
}

fn summarize(result: &Outcome, phi: f64) -> CertificateSummary {
    let c = &result.certificate;
    CertificateSummary {
        converged: result.converged(),
        iterations: c.iterations,
        residual: c.residual_norm,
        phi,
        y_hat: c.y_hat.clone(),
        prox_calls: c.prox_calls,
        grad_calls: c.grad_calls,
        value_calls: c.value_calls,
        k2_executions: result.trace.k2_executions(),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> anyhow::Result<i32> {
    let inst = load_instance(&args.instance, args.seed)?;
    let problem = inst.to_problem::<f64>()?;
    let y0 = default_start(&inst);

    let (result, audit, lambda0) = match args.solver {
        SolverKind::VarFista => {
            let lambda0 = args.lambda0.unwrap_or(1.0);
            let config = Config::new(args.rho)
                .with_lambda0(lambda0)
                .with_theta(args.theta)
                .with_gamma(args.gamma)
                .with_max_iterations(args.max_iter);
            if args.audit {
                let options = AuditOptions {
                    certificate_tol: 1e-8,
                    xk_resolution: (inst.n <= 2).then_some(1e-4),
                };
                let (result, report) = audited_run(&problem, &config, &y0, &options)?;
                (result, Some(report), lambda0)
            } else {
                (run(&problem, &config, &y0)?, None, lambda0)
            }
        }
        SolverKind::Fista | SolverKind::Proxgrad => {
            if args.audit {
                bail!("--audit applies to --solver var-fista only");
            }
            let step = args.lambda0.unwrap_or(if inst.lipschitz > 0.0 {
                args.gamma / inst.lipschitz
            } else {
                1.0
            });
            let config = BaselineConfig::new(step, args.rho).with_max_iterations(args.max_iter);
            let result = if args.solver == SolverKind::Fista {
                run_fista_constant(&problem, &config, &y0)?
            } else {
                run_prox_gradient(&problem, &config, &y0)?
            };
            (result, None, step)
        }
    };

    if let Some(path) = &args.trace {
        let file =
            File::create(path).with_context(|| format!("cannot create `{}`", path.display()))?;
        write_trace(&result.trace, BufWriter::new(file))?;
    }

    let phi = problem.phi(&result.certificate.y_hat)?;
    let summary = summarize(&result, phi);
    println!("solver      {}", args.solver.name());
    println!(
        "status      {}",
        if summary.converged {
            "converged"
        } else {
            "iteration limit"
        }
    );
    println!("iterations  {}", summary.iterations);
    println!("k2 runs     {}", summary.k2_executions);
    println!("residual    {:e}", summary.residual);
    println!("phi         {}", summary.phi);
    if let Some(report) = &audit {
        print!("{report}");
    }

    let audit_ok = audit.as_ref().is_none_or(|r| r.passed());
    if let Some(path) = &args.report {
        let report = RunReport {
            instance: args.instance.clone(),
            seed: inst.seed,
            solver: args.solver.name().to_string(),
            config: ConfigEcho {
                rho: args.rho,
                lambda0,
                theta: args.theta,
                gamma: args.gamma,
                max_iter: args.max_iter,
            },
            certificate: summary.clone(),
            trace: args.trace.as_ref().map(|p| p.display().to_string()),
            audit: audit.as_ref().map(audit_entries),
        };
        let file =
            File::create(path).with_context(|| format!("cannot create `{}`", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &report)?;
    }

    Ok(if !audit_ok {
        EXIT_AUDIT
    } else if summary.converged {
        EXIT_OK
    } else {
        EXIT_CAP
    })
}
