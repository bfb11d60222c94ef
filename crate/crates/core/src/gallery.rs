//! Box-constrained quadratic test problems with a prescribed spectrum, their
//! file format, and grid/enumeration oracles for tiny instances.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::{CompositeProblem, Projector, SmoothFunction, SmoothOracle};
use crate::prox::BoxIndicator;
use crate::scalar::{cast_vec, Scalar};

/// `f(u) = ½ uᵀQu + cᵀu` with a dense row-major `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<T> {
    n: usize,
    q: Vec<T>,
    c: Vec<T>,
}

impl<T: Scalar> Quadratic<T> {
    pub fn new(n: usize, q: Vec<T>, c: Vec<T>) -> Result<Self> {
        check_dim(n * n, q.len())?;
        check_dim(n, c.len())?;
        Ok(Self { n, q, c })
    }

    fn row(&self, i: usize) -> &[T] {
        &self.q[i * self.n..(i + 1) * self.n]
    }
}

impl<T: Scalar> SmoothFunction<T> for Quadratic<T> {
    fn value(&self, u: &[T]) -> T {
        let half = T::lit(0.5);
        (0..self.n).fold(T::zero(), |acc, i| {
            let qu = crate::scalar::dot(self.row(i), u);
            acc + u[i] * (half * qu + self.c[i])
        })
    }

    fn gradient(&self, u: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| crate::scalar::dot(self.row(i), u) + self.c[i])
            .collect()
    }
}

/// Parameters of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec {
    pub n: usize,
    pub eig_lo: f64,
    pub eig_hi: f64,
    /// `c` is drawn uniformly from `[-c_scale, c_scale]^n`.
    pub c_scale: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    pub seed: u64,
}

impl QuadraticSpec {
    pub fn new(n: usize, eig_lo: f64, eig_hi: f64, seed: u64) -> Self {
        Self {
            n,
            eig_lo,
            eig_hi,
            c_scale: 1.0,
            box_lo: -1.0,
            box_hi: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(self.eig_lo <= self.eig_hi) || !self.eig_lo.is_finite() || !self.eig_hi.is_finite() {
            return bad(format!("bad spectrum [{}, {}]", self.eig_lo, self.eig_hi));
        }
        if !(self.box_lo < self.box_hi) || !self.box_lo.is_finite() || !self.box_hi.is_finite() {
            return bad(format!("bad box [{}, {}]", self.box_lo, self.box_hi));
        }
        if !(self.c_scale >= 0.0) {
            return bad("c_scale must be non-negative".into());
        }
        Ok(())
    }

    /// Diagonal of the prescribed spectrum: evenly spaced from `eig_lo` to
    /// `eig_hi` (just `eig_lo` when n = 1).
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.eig_lo];
        }
        let span = self.eig_hi - self.eig_lo;
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.eig_hi
                } else {
                    self.eig_lo + span * i as f64 / (self.n - 1) as f64
                }
            })
            .collect()
    }
}

pub const INSTANCE_FORMAT: &str = "varfista-qp/1";

/// Serialized QP instance: `min ½uᵀQu + cᵀu` over the box `[box_lo, box_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpInstance {
    pub format: String,
    pub n: usize,
    /// Row-major `n × n`.
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    /// Largest absolute eigenvalue of `Q`.
    pub lipschitz: f64,
    /// `max(0, -λ_min(Q))`
    pub lower_curvature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

impl QpInstance {
    /// Instance from explicit data; curvature metadata must be supplied by the caller.
    pub fn from_parts(
        q: Vec<f64>,
        c: Vec<f64>,
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        lipschitz: f64,
        lower_curvature: f64,
    ) -> Result<Self> {
        let inst = Self {
            format: INSTANCE_FORMAT.into(),
            n: c.len(),
            q,
            c,
            box_lo,
            box_hi,
            lipschitz,
            lower_curvature,
            seed: None,
            eigenvalues: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Draws `Q = H_n ⋯ H_1 diag(eigs) H_1 ⋯ H_n` with random Householder
    /// reflections `H_j`, and `c` uniform in `[-c_scale, c_scale]^n`.
    pub fn generate(spec: &QuadraticSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let eigs = spec.eigenvalues();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut q = vec![0.0; n * n];
        for (i, &e) in eigs.iter().enumerate() {
            q[i * n + i] = e;
        }
        if n > 1 {
            for _ in 0..n {
                let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                reflect_both_sides(&mut q, n, &v);
            }
            for i in 0..n {
                for j in 0..i {
                    let s = 0.5 * (q[i * n + j] + q[j * n + i]);
                    q[i * n + j] = s;
                    q[j * n + i] = s;
                }
            }
        }
        let c: Vec<f64> = (0..n)
            .map(|_| spec.c_scale * rng.gen_range(-1.0..=1.0))
            .collect();
        let lipschitz = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let lower_curvature = eigs.iter().fold(0.0f64, |m, e| m.max(-e));
        Ok(Self {
            format: INSTANCE_FORMAT.into(),
            n,
            q,
            c,
            box_lo: vec![spec.box_lo; n],
            box_hi: vec![spec.box_hi; n],
            lipschitz,
            lower_curvature,
            seed: Some(spec.seed),
            eigenvalues: Some(eigs),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Instance(m));
        if self.format != INSTANCE_FORMAT {
            return bad(format!("unknown format tag {:?}", self.format));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.q.len() != self.n * self.n
            || self.c.len() != self.n
            || self.box_lo.len() != self.n
            || self.box_hi.len() != self.n
        {
            return bad(format!("field lengths do not match n = {}", self.n));
        }
        if self.q.iter().chain(&self.c).any(|x| !x.is_finite()) {
            return bad("Q and c must be finite".into());
        }
        if self
            .box_lo
            .iter()
            .zip(&self.box_hi)
            .any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
        {
            return bad("box bounds must be finite with lo <= hi".into());
        }
        if !(self.lipschitz >= 0.0) || !(self.lower_curvature >= 0.0) {
            return bad("curvature metadata must be non-negative".into());
        }
        Ok(())
    }

    pub fn is_convex(&self) -> bool {
        self.lower_curvature == 0.0
    }

    pub fn quadratic<T: Scalar>(&self) -> Quadratic<T> {
        Quadratic {
            n: self.n,
            q: cast_vec(&self.q),
            c: cast_vec(&self.c),
        }
    }

    /// The problem with `Ω = R^n`.
    pub fn to_problem<T: Scalar>(&self) -> Result<CompositeProblem<T>> {
        self.to_problem_with_omega(Projector::Identity)
    }

    pub fn to_problem_with_omega<T: Scalar>(
        &self,
        omega: Projector<T>,
    ) -> Result<CompositeProblem<T>> {
        self.validate()?;
        let smooth = SmoothOracle::new(self.quadratic::<T>()).with_audit(
            Some(T::lit(self.lipschitz)),
            Some(T::lit(self.lower_curvature)),
        );
        let h = BoxIndicator::new(cast_vec(&self.box_lo), cast_vec(&self.box_hi))?;
        CompositeProblem::new(smooth, Arc::new(h), omega, self.n)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Instance(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(text).map_err(|e| Error::Instance(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Stationary points from enumerating the `3^n` active-set patterns
    /// (each coordinate at its lower bound, free, or at its upper bound).
    /// Patterns with a singular free block are skipped. Only for n <= 2.
    pub fn active_set_stationary_points(&self) -> Result<Vec<Vec<f64>>> {
        if self.n > 2 {
            return Err(Error::Unsupported(
                "active-set enumeration needs n <= 2".into(),
            ));
        }
        let n = self.n;
        let q = |i: usize, j: usize| self.q[i * n + j];
        let mut out = Vec::new();
        for pattern in 0..3usize.pow(n as u32) {
            // 0 = at lo, 1 = free, 2 = at hi
            let states: Vec<usize> = (0..n)
                .map(|i| (pattern / 3usize.pow(i as u32)) % 3)
                .collect();
            let mut u = vec![0.0; n];
            for i in 0..n {
                match states[i] {
                    0 => u[i] = self.box_lo[i],
                    2 => u[i] = self.box_hi[i],
                    _ => {}
                }
            }
            let free: Vec<usize> = (0..n).filter(|&i| states[i] == 1).collect();
            // Q_FF u_F = -(c_F + Q_FA u_A)
            let rhs: Vec<f64> = free
                .iter()
                .map(|&i| {
                    -(self.c[i]
                        + (0..n)
                            .filter(|j| states[*j] != 1)
                            .map(|j| q(i, j) * u[j])
                            .sum::<f64>())
                })
                .collect();
            match free.len() {
                0 => {}
                1 => {
                    let d = q(free[0], free[0]);
                    if d.abs() < 1e-14 {
                        continue;
                    }
                    u[free[0]] = rhs[0] / d;
                }
                _ => {
                    let (a, b, c, d) = (q(0, 0), q(0, 1), q(1, 0), q(1, 1));
                    let det = a * d - b * c;
                    if det.abs() < 1e-14 {
                        continue;
                    }
                    u[0] = (d * rhs[0] - b * rhs[1]) / det;
                    u[1] = (a * rhs[1] - c * rhs[0]) / det;
                }
            }
            let tol = 1e-12;
            let feasible = free
                .iter()
                .all(|&i| u[i] >= self.box_lo[i] - tol && u[i] <= self.box_hi[i] + tol);
            if !feasible {
                continue;
            }
            let grad: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| q(i, j) * u[j]).sum::<f64>() + self.c[i])
                .collect();
            let signs_ok = (0..n).all(|i| match states[i] {
                0 => grad[i] >= -tol,
                2 => grad[i] <= tol,
                _ => true,
            });
            if signs_ok {
                out.push(u);
            }
        }
        Ok(out)
    }

    /// Grid scan plus active-set enumeration.
    pub fn brute_force_stationary(&self, grid_resolution: f64) -> Result<Vec<Vec<f64>>> {
        let mut pts = brute_force_stationary(&self.to_problem::<f64>()?, grid_resolution)?;
        pts.extend(self.active_set_stationary_points()?);
        Ok(pts)
    }
}

/// `Q ← H Q H` with `H = I - 2 v vᵀ / vᵀv`.
fn reflect_both_sides(q: &mut [f64], n: usize, v: &[f64]) {
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv == 0.0 {
        return;
    }
    // Q H = Q - 2 (Q v) vᵀ / vv
    let qv: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j] * v[j]).sum())
        .collect();
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] -= 2.0 * qv[i] * v[j] / vv;
        }
    }
    // H (Q H) = (Q H) - 2 v (vᵀ Q H) / vv
    let vq: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| v[i] * q[i * n + j]).sum())
        .collect();
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] -= 2.0 * v[i] * vq[j] / vv;
        }
    }
}

/// Builds `f(u) = ½uᵀQu + cᵀu` on the box from a spec, with `Ω = R^n` and the
/// analytic `M̄`, `m̲` attached as audit metadata.
pub fn generate_qp<T: Scalar>(spec: &QuadraticSpec) -> Result<CompositeProblem<T>> {
    QpInstance::generate(spec)?.to_problem()
}

/// Grid coordinates on `[lo, hi]` with spacing at most `res`, always including
/// both ends and 0 when it lies inside.
fn axis(lo: f64, hi: f64, res: f64) -> Vec<f64> {
    let steps = ((hi - lo) / res).ceil().max(1.0) as usize;
    let mut pts: Vec<f64> = (0..=steps)
        .map(|i| {
            if i == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / steps as f64
            }
        })
        .collect();
    if lo < 0.0 && hi > 0.0 && !pts.contains(&0.0) {
        pts.push(0.0);
        pts.sort_by(f64::total_cmp);
    }
    if lo == hi {
        pts.truncate(1);
    }
    pts
}

fn for_each_grid_point(axes: &[Vec<f64>], mut visit: impl FnMut(&[f64])) {
    match axes.len() {
        1 => {
            for &x in &axes[0] {
                visit(&[x]);
            }
        }
        2 => {
            for &x in &axes[0] {
                for &y in &axes[1] {
                    visit(&[x, y]);
                }
            }
        }
        _ => unreachable!("grid oracles are limited to n <= 2"),
    }
}

fn finite_domain(problem: &CompositeProblem<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if problem.dimension() > 2 {
        return Err(Error::Unsupported(format!(
            "grid oracle needs n <= 2, got {}",
            problem.dimension()
        )));
    }
    let (lo, hi) = problem.regularizer.domain_box();
    if lo.iter().chain(hi).any(|x| !x.is_finite()) {
        return Err(Error::Unsupported(
            "grid oracle needs a bounded dom h".into(),
        ));
    }
    Ok((lo.to_vec(), hi.to_vec()))
}

/// Grid points of `dom h` whose exact stationarity residual
/// `dist(-∇f(u), ∂h(u))` is at most `M̄ √n · spacing`.
///
/// Each coordinate grid contains the box ends and 0, so the grid point nearest
/// to a stationary point shares its active faces and ℓ1 kinks; its residual is
/// then at most `M̄ √n · spacing / 2`. A coarse pass finds candidate regions
/// and a fine pass at `grid_resolution` scans only those.
pub fn brute_force_stationary(
    problem: &CompositeProblem<f64>,
    grid_resolution: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(grid_resolution > 0.0) {
        return Err(Error::InvalidArgument(
            "grid resolution must be positive".into(),
        ));
    }
    let (lo, hi) = finite_domain(problem)?;
    let n = problem.dimension();
    let lipschitz = problem.smooth.audit_lipschitz.ok_or_else(|| {
        Error::Unsupported("grid stationarity oracle needs the Lipschitz audit constant".into())
    })?;
    let residual = |u: &[f64]| -> Result<f64> {
        let g = problem.smooth.gradient(u);
        problem
            .regularizer
            .stationarity_residual(u, &g)
            .ok_or_else(|| Error::Unsupported("regularizer has no closed-form residual".into()))
    };
    let tol_for = |res: f64| lipschitz * (n as f64).sqrt() * res + 1e-12;

    let span = lo.iter().zip(&hi).fold(0.0f64, |m, (l, h)| m.max(h - l));
    let coarse_res = grid_resolution.max(span / 100.0);
    let coarse_axes: Vec<Vec<f64>> = (0..n).map(|i| axis(lo[i], hi[i], coarse_res)).collect();
    let coarse_tol = tol_for(coarse_res);
    let mut candidates = Vec::new();
    let mut err = None;
    for_each_grid_point(&coarse_axes, |p| match residual(p) {
        Ok(r) if r <= coarse_tol => candidates.push(p.to_vec()),
        Ok(_) => {}
        Err(e) => err = Some(e),
    });
    if let Some(e) = err {
        return Err(e);
    }
    if coarse_res <= grid_resolution {
        return Ok(candidates);
    }

    let fine_tol = tol_for(grid_resolution);
    let mut found: BTreeSet<Vec<u64>> = BTreeSet::new();
    for p in &candidates {
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = (p[i] - coarse_res).max(lo[i]);
                let b = (p[i] + coarse_res).min(hi[i]);
                axis(a, b, grid_resolution)
            })
            .collect();
        for_each_grid_point(&axes, |u| {
            if let Ok(r) = residual(u) {
                if r <= fine_tol {
                    found.insert(u.iter().map(|x| x.to_bits()).collect());
                }
            }
        });
    }
    Ok(found
        .into_iter()
        .map(|bits| bits.into_iter().map(f64::from_bits).collect())
        .collect())
}

/// Dense-grid minimizer of `φ` over `dom h` (n <= 2).
pub fn global_min_phi(
    problem: &CompositeProblem<f64>,
    grid_resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(grid_resolution > 0.0) {
        return Err(Error::InvalidArgument(
            "grid resolution must be positive".into(),
        ));
    }
    let (lo, hi) = finite_domain(problem)?;
    let axes: Vec<Vec<f64>> = (0..problem.dimension())
        .map(|i| axis(lo[i], hi[i], grid_resolution))
        .collect();
    let mut best = (Vec::new(), f64::INFINITY);
    for_each_grid_point(&axes, |u| {
        let v = problem.smooth.value(u) + problem.regularizer.value(u);
        if v < best.1 {
            best = (u.to_vec(), v);
        }
    });
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(q: f64, c: f64, lo: f64, hi: f64, lip: f64, m: f64) -> QpInstance {
        QpInstance::from_parts(vec![q], vec![c], vec![lo], vec![hi], lip, m).unwrap()
    }

    #[test]
    fn one_d_convex_instance() {
        // f(u) = u^2 - 4u on [0, 1]
        let inst = one_d(2.0, -4.0, 0.0, 1.0, 2.0, 0.0);
        let p = inst.to_problem::<f64>().unwrap();
        assert_eq!(p.smooth.value(&[1.0]), -3.0);
        let (u, phi) = global_min_phi(&p, 1e-4).unwrap();
        assert_eq!(u, vec![1.0]);
        assert_eq!(phi, -3.0);
        assert_eq!(
            inst.active_set_stationary_points().unwrap(),
            vec![vec![1.0]]
        );
        let pts = inst.brute_force_stationary(1e-4).unwrap();
        assert!(pts.iter().all(|u| (u[0] - 1.0).abs() <= 2e-4), "{pts:?}");
    }

    #[test]
    fn concave_one_d_stationary_set() {
        // f(u) = -u^2/2 on [-1, 1]: stationary at -1, 0, 1
        let inst = one_d(-1.0, 0.0, -1.0, 1.0, 1.0, 1.0);
        let mut exact = inst.active_set_stationary_points().unwrap();
        exact.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(exact, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let grid = brute_force_stationary(&inst.to_problem().unwrap(), 1e-4).unwrap();
        for g in &grid {
            assert!(
                [-1.0, 0.0, 1.0].iter().any(|s| (g[0] - s).abs() <= 2e-4),
                "{g:?}"
            );
        }
        for s in [-1.0, 0.0, 1.0] {
            assert!(grid.iter().any(|g| (g[0] - s).abs() <= 1e-4));
        }
        let (u, phi) = global_min_phi(&inst.to_problem().unwrap(), 1e-3).unwrap();
        assert_eq!(u[0].abs(), 1.0);
        assert_eq!(phi, -0.5);
    }

    #[test]
    fn constant_objective_is_stationary_everywhere() {
        let inst = QpInstance::from_parts(
            vec![0.0; 4],
            vec![0.0; 2],
            vec![-1.0; 2],
            vec![1.0; 2],
            0.0,
            0.0,
        )
        .unwrap();
        let p = inst.to_problem::<f64>().unwrap();
        let pts = brute_force_stationary(&p, 0.05).unwrap();
        assert_eq!(pts.len(), 41 * 41);
        let (_, phi) = global_min_phi(&p, 0.1).unwrap();
        assert_eq!(phi, 0.0);
    }

    #[test]
    fn spectral_metadata() {
        let convex = QpInstance::generate(&QuadraticSpec::new(5, 1.0, 10.0, 1)).unwrap();
        assert!(convex.is_convex());
        assert_eq!(convex.lipschitz, 10.0);
        let nc = QpInstance::generate(&QuadraticSpec::new(5, -1.0, 10.0, 1)).unwrap();
        assert_eq!((nc.lipschitz, nc.lower_curvature), (10.0, 1.0));
        let one = QpInstance::generate(&QuadraticSpec {
            c_scale: 0.0,
            ..QuadraticSpec::new(1, 2.0, 2.0, 0)
        })
        .unwrap();
        assert_eq!(one.q, vec![2.0]);
    }

    #[test]
    fn generation_is_deterministic_and_validated() {
        let spec = QuadraticSpec::new(6, -2.0, 3.0, 42);
        assert_eq!(
            QpInstance::generate(&spec).unwrap(),
            QpInstance::generate(&spec).unwrap()
        );
        assert!(QpInstance::generate(&QuadraticSpec::new(0, 1.0, 2.0, 0)).is_err());
        assert!(QpInstance::generate(&QuadraticSpec::new(2, 3.0, 2.0, 0)).is_err());
        let mut bad_box = QuadraticSpec::new(2, 1.0, 2.0, 0);
        bad_box.box_hi = -2.0;
        assert!(QpInstance::generate(&bad_box).is_err());
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let inst = QpInstance::generate(&QuadraticSpec::new(3, -1.0, 4.0, 9)).unwrap();
        let back = QpInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
        let mut broken = inst.clone();
        broken.q.pop();
        let text = serde_json::to_string(&broken).unwrap();
        assert!(matches!(
            QpInstance::from_json(&text),
            Err(Error::Instance(_))
        ));
        assert!(QpInstance::from_json("{ not json").is_err());
    }

    #[test]
    fn grid_oracles_reject_large_n() {
        let inst = QpInstance::generate(&QuadraticSpec::new(3, 1.0, 2.0, 0)).unwrap();
        let p = inst.to_problem::<f64>().unwrap();
        assert!(matches!(
            brute_force_stationary(&p, 0.1),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            global_min_phi(&p, 0.1),
            Err(Error::Unsupported(_))
        ));
    }
}
