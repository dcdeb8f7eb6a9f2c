use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use bidomain::config::parse_config;
use bidomain::run::{run, RunOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Assemble the discrete operators and check their structure.
    Assemble,
    /// Eigenpairs of the bidomain form and coercivity estimates.
    Eigens,
    /// Certificate constants for the ionic model and their lattice checks.
    CheckAssumptions,
    /// Integrate the Galerkin system from an initial state.
    SolveIvp,
    /// Find the time-periodic solution as a fixed point of the period map.
    SolvePeriodic,
    /// Energy inequality, energy identity and weak residuals on the orbit.
    VerifyEnergy,
    /// Tolerance-perturbation test of uniqueness.
    VerifyUniqueness,
    /// Self-convergence of periodic solutions in the Galerkin order.
    Convergence,
    /// Re-render SVG plots from the CSVs in the output directory.
    EmitPlots,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Assemble => Subcommand::Assemble,
            Command::Eigens => Subcommand::Eigens,
            Command::CheckAssumptions => Subcommand::CheckAssumptions,
            Command::SolveIvp => Subcommand::SolveIvp,
            Command::SolvePeriodic => Subcommand::SolvePeriodic,
            Command::VerifyEnergy => Subcommand::VerifyEnergy,
            Command::VerifyUniqueness => Subcommand::VerifyUniqueness,
            Command::Convergence => Subcommand::Convergence,
            Command::EmitPlots => Subcommand::EmitPlots,
        }
    }
}

/// Time-periodic solutions of the bidomain equations by spectral Galerkin
/// approximation.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// INI configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Seed for every random stream (probes, ball samples, random starts).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Only print errors.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match run(cli.command.into(), config, &opts) {
        Ok(report) if report.passed() => ExitCode::SUCCESS,
        Ok(_) => {
            if !opts.quiet {
                eprintln!("one or more asserted checks failed");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
