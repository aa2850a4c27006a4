//! `simulate`: run the field engine, the direct solver, their comparison or
//! the revival analysis for one scenario file.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Write the fields requested in the scenario's [output] section.
    Field,
    /// Solve the Schrodinger equation directly with the [oracle] settings.
    Oracle,
    /// Compare the analytic field against the direct solve.
    Compare,
    /// Detect revivals at the barrier edge and write packet moments.
    Analyze,
    /// Check the scenario file without running anything.
    Validate,
}

#[derive(Debug, Parser)]
#[command(name = "simulate", version, about = "Evanescent matter-wave packets under comoving pulses")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file.
    pub scenario: PathBuf,
    /// Output directory (default: the scenario's `dir`, else ./out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the number of spectral quadrature nodes.
    #[arg(long)]
    pub nquad: Option<usize>,
    /// Run and export in units with hbar = m = k0 = 1.
    #[arg(long)]
    pub dimensionless: bool,
    /// Suppress the run summary.
    #[arg(long)]
    pub quiet: bool,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_SCENARIO: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SIM_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SIM_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot configure thread pool: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(m) = configure_threads() {
        eprintln!("simulate: {m}");
        return ExitCode::from(EXIT_SCENARIO);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simulate: {e}");
            ExitCode::from(match e {
                metaoptics::Error::Io { .. } => EXIT_IO,
                e if e.is_input_error() => EXIT_SCENARIO,
                _ => EXIT_NUMERIC,
            })
        }
    }
}
