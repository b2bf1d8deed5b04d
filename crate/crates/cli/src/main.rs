//! Command-line front end: config-driven simulations, invariant verification,
//! spectrum tables, and data export for the phase-space evolution library.
//!
//! Exit codes: 0 success, 1 configuration (or I/O) error, 2 numerical
//! failure, 3 invariant failure.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::Sink;

/// Classified failures, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, schema violations, unknown names, I/O problems.
    Config(String),
    /// The mathematics failed: integration, state construction, divergence.
    Numerical(String),
    /// A verified invariant did not hold.
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Numerical(m) => write!(f, "numerical: {m}"),
            CliError::Invariant(m) => write!(f, "invariant: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "starflow",
    version,
    about = "Phase-space quantization of linear dissipative systems: \
             simulations, spectra, and invariant checks"
)]
struct Cli {
    /// TOML run configuration (defaults are used when omitted)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for artifacts; without it tables print to stdout
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Artifact format (overrides output.format from the config)
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,

    /// Dotted-path config override, repeatable: --override model.alpha=0.2
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured eigenstate and export expectation-value series
    Simulate,
    /// Run the invariant battery and write a machine-readable report
    Verify,
    /// Print eigenvalue tables for the configured model
    Spectrum,
    /// List the model catalogue with parameter documentation
    Models,
    /// Export the structure tables Ω(t), B(t), C(t), Δ(t) along the grid
    ActionData,
    /// Sample the state's phase-space symbol on a coordinate grid
    WignerGrid,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    let format = cli
        .format
        .clone()
        .unwrap_or_else(|| cfg.output.format.clone());
    let mut sink = Sink::new(cli.out.clone());
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &mut sink, &format),
        Command::Verify => commands::verify(&cfg, &mut sink),
        Command::Spectrum => commands::spectrum(&cfg, &mut sink, &format),
        Command::Models => commands::models(&format),
        Command::ActionData => commands::action_data(&cfg, &mut sink, &format),
        Command::WignerGrid => commands::wigner_grid(&cfg, &mut sink, &format),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
