mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polystab::search::Norm;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve for the extremal affine function of a bundle.
    Extremal,
    /// Donaldson–Futaki value of a PL function.
    Df,
    /// J-norm of a PL function.
    Jnorm,
    /// Delzant verdict for a polytope or a test-configuration polytope.
    Delzant,
    /// Exact fibration identity battery.
    Identities,
    /// Mabuchi energies and compatible-lift residuals.
    Mabuchi,
    /// Grid estimate of the stability constant with certificate.
    Stability,
    /// Stability estimates across Kähler parameters.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Extremal => "extremal",
            Command::Df => "df",
            Command::Jnorm => "jnorm",
            Command::Delzant => "delzant",
            Command::Identities => "identities",
            Command::Mabuchi => "mabuchi",
            Command::Stability => "stability",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
pub struct Options {
    /// Input JSON document.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Grid resolutions, comma separated.
    #[arg(long = "N", value_delimiter = ',', global = true)]
    pub resolutions: Option<Vec<usize>>,
    /// Normalization for the stability LP.
    #[arg(long, global = true, value_parser = parse_norm)]
    pub norm: Option<Norm>,
    /// Relative tolerance for quadrature.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for sampled checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    s.parse()
}

#[derive(Parser)]
#[command(name = "polystab", version, about = "Exact polytope functionals for weighted toric K-stability")]
struct Invocation {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

fn main() -> ExitCode {
    let invocation = match Invocation::try_parse() {
        Ok(i) => i,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(invocation.command, &invocation.options) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
