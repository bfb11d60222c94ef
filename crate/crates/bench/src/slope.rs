//! Iterations-to-terminate versus tolerance, with an OLS fit of
//! `ln N` on `ln(1/ρ̂)`.

use std::fs::File;
use std::io::BufWriter;

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::Serialize;
use varfista::{run, Config, Problem};

use crate::cli::SlopeArgs;
use crate::instance::{default_start, load_instance};
use crate::{EXIT_CAP, EXIT_OK};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopePoint {
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub k2_executions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeTable {
    pub instance: String,
    pub points: Vec<SlopePoint>,
    /// `None` when fewer than two tolerances converged.
    pub slope: Option<f64>,
    /// Some tolerance hit the iteration cap and was left out of the fit.
    pub partial: bool,
}

/// `a,b,c`, `hi..lo` (one value per decade) or `hi..lo:count`.
pub fn parse_rho_list(text: &str) -> anyhow::Result<Vec<f64>> {
    let parse = |s: &str| -> anyhow::Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .with_context(|| format!("bad tolerance `{s}`"))?;
        if !(v > 0.0 && v.is_finite()) {
            bail!("tolerances must be positive, got {v}");
        }
        Ok(v)
    };
    let values = if let Some((hi, rest)) = text.split_once("..") {
        let (lo, count) = match rest.split_once(':') {
            Some((lo, count)) => (
                lo,
                Some(count.trim().parse::<usize>().context("bad count")?),
            ),
            None => (rest, None),
        };
        let (a, b) = (parse(hi)?.log10(), parse(lo)?.log10());
        let count = count.unwrap_or_else(|| (a - b).abs().round() as usize + 1);
        if count == 0 {
            bail!("empty tolerance range");
        }
        if count == 1 {
            vec![10f64.powf(a)]
        } else {
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    } else {
        text.split(',')
            .map(parse)
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(anyhow!("no tolerances given"));
    }
    Ok(values)
}

/// Least-squares slope of `ln N` against `ln(1/ρ̂)` over converged points.
pub fn fit_slope(points: &[SlopePoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.converged)
        .map(|p| ((1.0 / p.rho).ln(), (p.iterations as f64).ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One run per tolerance (in parallel), all from `y0` with `config`'s other settings.
pub fn slope_points(
    problem: &Problem,
    y0: &[f64],
    rhos: &[f64],
    config: &Config,
) -> anyhow::Result<Vec<SlopePoint>> {
    rhos.par_iter()
        .map(|&rho| {
            let mut cfg = config.clone();
            cfg.rho_hat = rho;
            let r = run(problem, &cfg, y0)?;
            Ok(SlopePoint {
                rho,
                iterations: r.certificate.iterations,
                converged: r.converged(),
                residual: r.certificate.residual_norm,
                k2_executions: r.trace.k2_executions(),
            })
        })
        .collect()
}

pub fn cmd_slope(args: &SlopeArgs) -> anyhow::Result<i32> {
    let rhos = parse_rho_list(&args.rho_list)?;
    let inst = load_instance(&args.instance, args.seed)?;
    let problem = inst.to_problem::<f64>()?;
    let config = Config::new(rhos[0])
        .with_lambda0(args.lambda0)
        .with_theta(args.theta)
        .with_gamma(args.gamma)
        .with_max_iterations(args.max_iter);
    let points = slope_points(&problem, &default_start(&inst), &rhos, &config)?;
    let table = SlopeTable {
        instance: args.instance.clone(),
        slope: fit_slope(&points),
        partial: points.iter().any(|p| !p.converged),
        points,
    };

    println!("{:>12} {:>10} {:>10} {:>12}", "rho", "N", "k2", "residual");
    for p in &table.points {
        let flag = if p.converged { "" } else { "  (cap)" };
        println!(
            "{:>12e} {:>10} {:>10} {:>12.3e}{flag}",
            p.rho, p.iterations, p.k2_executions, p.residual
        );
    }
    match table.slope {
        Some(s) => println!("slope {s:.4}"),
        None => println!("slope n/a"),
    }
    if table.partial {
        println!("partial: runs marked (cap) are excluded from the fit");
    }
    if let Some(path) = &args.out {
        let file =
            File::create(path).with_context(|| format!("cannot create `{}`", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &table)?;
    }
    Ok(if table.partial { EXIT_CAP } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(rho: f64, n: usize, converged: bool) -> SlopePoint {
        SlopePoint {
            rho,
            iterations: n,
            converged,
            residual: 0.0,
            k2_executions: n,
        }
    }

    #[test]
    fn rho_lists() {
        let v = parse_rho_list("1e-1..1e-5").unwrap();
        assert_eq!(v.len(), 5);
        for (got, want) in v.iter().zip([1e-1, 1e-2, 1e-3, 1e-4, 1e-5]) {
            assert!((got / want - 1.0).abs() < 1e-12);
        }
        assert_eq!(parse_rho_list("1e-2..1e-4:5").unwrap().len(), 5);
        assert_eq!(parse_rho_list("0.5, 0.25").unwrap(), vec![0.5, 0.25]);
        assert_eq!(parse_rho_list("1e-3").unwrap(), vec![1e-3]);
        assert!(parse_rho_list("0").is_err());
        assert!(parse_rho_list("a,b").is_err());
        assert!(parse_rho_list("1e-1..1e-3:0").is_err());
    }

    #[test]
    fn slope_of_power_law() {
        // N = 3 (1/ρ)^(2/3)
        let pts: Vec<_> = [1e-3f64, 1e-6, 1e-9]
            .iter()
            .map(|&r| point(r, (3.0 * (1.0 / r).powf(2.0 / 3.0)).round() as usize, true))
            .collect();
        assert!((fit_slope(&pts).unwrap() - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn slope_skips_capped_and_needs_two_points() {
        let pts = vec![
            point(1e-1, 10, true),
            point(1e-2, 100, true),
            point(1e-3, 5, false),
        ];
        assert!((fit_slope(&pts).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fit_slope(&pts[..1]), None);
        assert_eq!(
            fit_slope(&[point(1e-1, 10, true), point(1e-1, 12, true)]),
            None
        );
    }
}
