//! `robust-reserve`: compute, verify and stress-test the robust
//! second-price auction equilibrium from the command line.
//!
//! Exit status: 0 on success or a passing check, 1 when a check fails,
//! 2 on usage or configuration errors.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommandKind, CommonArgs, RunConfig, VerifyArgs};

#[derive(Debug, Parser)]
#[command(name = "robust-reserve", version, about = "Robust second-price auctions with a random reserve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute k, alpha and the selection weights.
    Equilibrium(CommonArgs),
    /// Certify the saddle point and write a verification report.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// Solve the discretized game as a linear program (at most 3 bidders).
    Oracle(CommonArgs),
    /// Monte Carlo revenue of the equilibrium and of adversarial laws.
    Simulate(CommonArgs),
    /// Symmetric-mean table over a range of bidder counts.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Bidder counts: `2..10` (inclusive), `2..=10` or `2,5,10`.
        #[arg(long)]
        n_range: Option<String>,
    },
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let resolved = match &cli.command {
        Command::Equilibrium(c) => RunConfig::resolve(CommandKind::Equilibrium, c, None, None),
        Command::Verify { common, verify } => RunConfig::resolve(CommandKind::Verify, common, Some(verify), None),
        Command::Oracle(c) => RunConfig::resolve(CommandKind::Oracle, c, None, None),
        Command::Simulate(c) => RunConfig::resolve(CommandKind::Simulate, c, None, None),
        Command::Sweep { common, n_range } => RunConfig::resolve(CommandKind::Sweep, common, None, n_range.as_deref()),
    };
    let result = resolved.map_err(commands::CliError::from).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
