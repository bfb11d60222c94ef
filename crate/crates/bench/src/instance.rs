//! Instance sources: JSON files or inline generator specs.

use anyhow::{anyhow, bail, Context};
use varfista::gallery::{QpInstance, QuadraticSpec};

use crate::cli::GenerateArgs;
use crate::EXIT_OK;

pub const GEN_PREFIX: &str = "gen:";

/// Parses `gen:n=..,eig=lo:hi[,c=..][,box=lo:hi][,seed=..]`. `seed` falls
/// back to `default_seed`, then 0; giving both with different values is an error.
pub fn parse_gen_spec(text: &str, default_seed: Option<u64>) -> anyhow::Result<QuadraticSpec> {
    let body = text
        .strip_prefix(GEN_PREFIX)
        .ok_or_else(|| anyhow!("generator spec must start with `{GEN_PREFIX}`"))?;
    let mut n = None;
    let mut eig = None;
    let mut c_scale = 1.0;
    let mut bounds = (-1.0, 1.0);
    let mut seed = None;
    for part in body.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{part}`"))?;
        match key.trim() {
            "n" => {
                n = Some(
                    value
                        .trim()
                        .parse::<usize>()
                        .with_context(|| format!("bad n `{value}`"))?,
                )
            }
            "eig" => eig = Some(parse_range(value)?),
            "c" => {
                c_scale = value
                    .trim()
                    .parse()
                    .with_context(|| format!("bad c `{value}`"))?
            }
            "box" => bounds = parse_range(value)?,
            "seed" => {
                seed = Some(
                    value
                        .trim()
                        .parse::<u64>()
                        .with_context(|| format!("bad seed `{value}`"))?,
                )
            }
            other => bail!("unknown generator key `{other}`"),
        }
    }
    let seed = match (seed, default_seed) {
        (Some(a), Some(b)) if a != b => bail!("seed {a} in spec conflicts with --seed {b}"),
        (s, d) => s.or(d).unwrap_or(0),
    };
    let n = n.ok_or_else(|| anyhow!("generator spec needs n"))?;
    let (eig_lo, eig_hi) = eig.ok_or_else(|| anyhow!("generator spec needs eig=lo:hi"))?;
    let mut spec = QuadraticSpec::new(n, eig_lo, eig_hi, seed);
    spec.c_scale = c_scale;
    spec.box_lo = bounds.0;
    spec.box_hi = bounds.1;
    Ok(spec)
}

fn parse_range(text: &str) -> anyhow::Result<(f64, f64)> {
    // a leading minus is part of the number, so split on the last ':'
    let (a, b) = text
        .rsplit_once(':')
        .ok_or_else(|| anyhow!("expected lo:hi, got `{text}`"))?;
    let lo = a
        .trim()
        .parse()
        .with_context(|| format!("bad number `{a}`"))?;
    let hi = b
        .trim()
        .parse()
        .with_context(|| format!("bad number `{b}`"))?;
    Ok((lo, hi))
}

/// Loads an instance file or generates from a spec.
pub fn load_instance(source: &str, seed: Option<u64>) -> anyhow::Result<QpInstance> {
    if source.starts_with(GEN_PREFIX) {
        let spec = parse_gen_spec(source, seed)?;
        return Ok(QpInstance::generate(&spec)?);
    }
    QpInstance::load(source).with_context(|| format!("cannot read instance `{source}`"))
}

/// The projection of the origin onto the box: a feasible default start.
pub fn default_start(inst: &QpInstance) -> Vec<f64> {
    inst.box_lo
        .iter()
        .zip(&inst.box_hi)
        .map(|(&lo, &hi)| 0f64.clamp(lo, hi))
        .collect()
}

pub fn cmd_generate(args: &GenerateArgs) -> anyhow::Result<i32> {
    let spec = parse_gen_spec(&args.spec, args.seed)?;
    let inst = QpInstance::generate(&spec)?;
    inst.save(&args.out)
        .with_context(|| format!("cannot write `{}`", args.out.display()))?;
    println!(
        "wrote {} (n = {}, M = {}, m = {})",
        args.out.display(),
        inst.n,
        inst.lipschitz,
        inst.lower_curvature
    );
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_spec_parsing() {
        let s = parse_gen_spec("gen:n=20,eig=-1:10,box=-2:0.5,c=3,seed=7", None).unwrap();
        assert_eq!(
            (s.n, s.eig_lo, s.eig_hi, s.box_lo, s.box_hi, s.c_scale, s.seed),
            (20, -1.0, 10.0, -2.0, 0.5, 3.0, 7)
        );
        let s = parse_gen_spec("gen:n=1,eig=-3:-2", Some(4)).unwrap();
        assert_eq!(
            (s.eig_lo, s.eig_hi, s.seed, s.box_lo),
            (-3.0, -2.0, 4, -1.0)
        );
        assert!(parse_gen_spec("gen:n=1,eig=1:2,seed=1", Some(2)).is_err());
        assert!(parse_gen_spec("gen:eig=1:2", None).is_err());
        assert!(parse_gen_spec("gen:n=2,eig=1", None).is_err());
        assert!(parse_gen_spec("gen:n=2,eig=1:2,bogus=1", None).is_err());
        assert!(parse_gen_spec("n=2,eig=1:2", None).is_err());
    }

    #[test]
    fn start_is_feasible() {
        let spec = parse_gen_spec("gen:n=3,eig=1:2,box=0.5:2", None).unwrap();
        let inst = QpInstance::generate(&spec).unwrap();
        assert_eq!(default_start(&inst), vec![0.5; 3]);
    }
}
