//! Adaptive FISTA-type solver for composite problems `min f(u) + h(u)` with a
//! smooth, possibly nonconvex `f` and a prox-friendly convex `h`.
//!
//! The solver needs only values and gradients of `f` and the prox of `h`.
//! Its stepsize `λ` and curvature penalty `ξ` adapt as it runs, and `ξ` stays
//! at zero whenever `f` is convex.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common double-precision case.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod audit;
pub mod baseline;
pub mod diagnostics;
pub mod error;
pub mod gallery;
pub mod problem;
pub mod prox;
pub mod scalar;
pub mod schedule;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use problem::{
    Certificate, CompositeProblem, FnSmooth, Projector, ProjectorKind, ProxRegularizer,
    SmoothFunction, SmoothOracle,
};
pub use scalar::Scalar;
pub use solver::{run, run_observed, RunResult, SolverConfig, Termination};

pub type Problem = CompositeProblem<f64>;
pub type Config = SolverConfig<f64>;
pub type Outcome = RunResult<f64>;
pub type Trace = solver::IterationTrace<f64>;
pub type Cert = Certificate<f64>;

pub type ProblemF32 = CompositeProblem<f32>;
pub type ConfigF32 = SolverConfig<f32>;
pub type OutcomeF32 = RunResult<f32>;
