//! `msupport`: minimax support, two-groups fits, validation experiments and
//! capacity priors from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{capacity, case_study, fit, simulate, support, synth};

#[derive(Debug, Parser)]
#[command(name = "msupport", version, about = "Minimax-optimal support for a null versus alternative hypothesis")]
struct Cli {
    /// TOML file with one table per subcommand; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Support for one or more folded t statistics.
    Support(support::Args),
    /// End-to-end case study on an abundance table.
    CaseStudy(case_study::Args),
    /// Fit the two-groups mixture to a list of statistics.
    FitMixture(fit::Args),
    /// Validation experiments.
    #[command(subcommand)]
    Simulate(simulate::Experiment),
    /// Capacity-achieving prior by Blahut–Arimoto.
    CapacityPrior(capacity::Args),
    /// Seeded synthetic abundance table.
    Synth(synth::Args),
}

/// Outcome of a command that did not fail outright.
pub enum Status {
    Success,
    Partial,
}

/// Errors surface as a message for the user.
pub type CliResult<T> = Result<T, String>;

fn run(cli: Cli) -> CliResult<Status> {
    let file = config::FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Support(a) => support::run(a.merge(file.support)),
        Command::CaseStudy(a) => case_study::run(a.merge(file.case_study)),
        Command::FitMixture(a) => fit::run(a.merge(file.fit_mixture)),
        Command::Simulate(e) => simulate::run(e, file.simulate),
        Command::CapacityPrior(a) => capacity::run(a.merge(file.capacity_prior)),
        Command::Synth(a) => synth::run(a.merge(file.synth)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
