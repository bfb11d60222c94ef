//! Command-line front end for the `varfista` solver: solve instances, write
//! traces, audit runs and fit iteration-count slopes.

pub mod cli;
pub mod instance;
pub mod slope;
pub mod solve;
pub mod suite;

use cli::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CAP: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;

/// Runs one parsed command and returns the process exit code.
pub fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve(args) => solve::cmd_solve(&args),
        Command::Slope(args) => slope::cmd_slope(&args),
        Command::AuditSuite(args) => suite::cmd_audit_suite(&args),
        Command::Generate(args) => instance::cmd_generate(&args),
    }
}
