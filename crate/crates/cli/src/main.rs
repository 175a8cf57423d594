use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use maxent_cli::{load_config, run_and_write, CliOverrides};
use maxent_core::config::Subcommand;

/// Maximum-entropy estimation from uncertain moments, moment closure and
/// approximate dynamic programming.
#[derive(Parser)]
#[command(name = "maxent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Certified density estimation over a list of accuracies.
    Solve(Common),
    /// Polynomial Slater density and the max-entropy density, sampled.
    Slater(Common),
    /// Entropy estimation on a finite state space.
    Discrete(Common),
    /// Moment-closure trajectories for the dimerization network.
    Closure(Common),
    /// Approximate dynamic programming for the inventory model.
    Mdp(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (key = value lines with [section] headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override one key, as KEY=VALUE or SECTION.KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common) = match cli.command {
        Command::Solve(c) => (Subcommand::Solve, c),
        Command::Slater(c) => (Subcommand::Slater, c),
        Command::Discrete(c) => (Subcommand::Discrete, c),
        Command::Closure(c) => (Subcommand::Closure, c),
        Command::Mdp(c) => (Subcommand::Mdp, c),
    };
    let flags = CliOverrides {
        config: common.config,
        output: common.output,
        epsilon: common.epsilon,
        seed: common.seed,
        set: common.set,
    };
    let result = load_config(sub, &flags).and_then(|cfg| run_and_write(&cfg));
    match result {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
