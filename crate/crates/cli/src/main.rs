//! `dyson`: densities of states, Dyson solutions, derivatives, covariance
//! evolution, bound verification and random matrix comparisons from the
//! command line. Exit codes: 0 success, 1 a check failed, 2 bad input,
//! 3 numerical non-convergence.

mod commands;
mod failure;
mod output;
mod params;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Artifact, CauchyArgs, DerivativeArgs, DosArgs, EvolveArgs, RandmatArgs, SubordinateArgs, VerifyArgs};
use failure::Failure;
use params::{Flags, Params};

#[derive(Parser, Debug)]
#[command(name = "dyson", version, about = "Operator-valued semicircular densities and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Smoothed density of states on a grid, as CSV.
    Dos(DosArgs),
    /// Scalar Cauchy transform with certified errors.
    Cauchy(CauchyArgs),
    /// Fréchet derivative of the solution in a direction.
    Derivative(DerivativeArgs),
    /// Burgers equation along an affine covariance path.
    Evolve(EvolveArgs),
    /// Subordination of one covariance over another.
    Subordinate(SubordinateArgs),
    /// Property-based checks of the analytic bounds.
    Verify(VerifyArgs),
    /// Kronecker random matrices against the density of states.
    Randmat(RandmatArgs),
}

fn run(cli: &Cli) -> Result<std::path::PathBuf, Failure> {
    let params = Params::resolve(&cli.flags)?;
    if let Some(n) = params.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("cannot size the thread pool: {e}")))?;
    }
    let artifact: Artifact = match &cli.command {
        Command::Dos(a) => commands::dos(a, &params)?,
        Command::Cauchy(a) => commands::cauchy(a, &params)?,
        Command::Derivative(a) => commands::derivative(a, &params)?,
        Command::Evolve(a) => commands::evolve(a, &params)?,
        Command::Subordinate(a) => commands::subordinate_cmd(a, &params)?,
        Command::Verify(a) => commands::verify(a, &params)?,
        Command::Randmat(a) => commands::randmat(a, &params)?,
    };
    let target = cli.flags.out.clone().unwrap_or_else(|| artifact.default_name.into());
    let written = output::write_atomic(&target, &artifact.contents)?;
    println!("{}", written.display());
    match artifact.violation {
        Some(v) => Err(Failure::Verification(v)),
        None => Ok(written),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}
