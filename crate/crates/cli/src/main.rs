//! `hemicap`: exact hemisphere probabilities, asymptotic limits and seeded
//! Monte Carlo experiments for the unsourced random access channel.
//!
//! Exit codes: 0 success, 2 invalid parameters or configuration, 3 runtime
//! failure.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::Settings;

#[derive(Debug)]
pub enum CliError {
    Param(String),
    Runtime(String),
}

impl From<hemicap::Error> for CliError {
    fn from(e: hemicap::Error) -> Self {
        match e {
            hemicap::Error::InvalidParameter(_) | hemicap::Error::Domain { .. } => {
                CliError::Param(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "hemicap", version, about)]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Probability that N random points in R^n share an open hemisphere.
    Wendel,
    /// Asymptotic regime of that probability at user density beta.
    Regime,
    /// Closed-form limits at (beta, P).
    Limits,
    /// Alignment of the normalized output with the codeword sum.
    Align,
    /// Cap retention of transmitted codewords.
    Retention,
    /// Cap occupancy by unsent codewords.
    Capcount,
    /// Cap filter followed by ML decoding; per-user error.
    Decode,
    /// Dominant union-bound term against its exponent.
    Exponent,
    /// Concentration of |Delta_l|^2 / n.
    Delta,
    /// Alignment and retention across blocklengths.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Wendel => "wendel",
            Command::Regime => "regime",
            Command::Limits => "limits",
            Command::Align => "align",
            Command::Retention => "retention",
            Command::Capcount => "capcount",
            Command::Decode => "decode",
            Command::Exponent => "exponent",
            Command::Delta => "delta",
            Command::Sweep => "sweep",
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = match &cli.config {
        Some(path) => cli.settings.overlay(Settings::load(path)?),
        None => cli.settings,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = settings.threads {
        if threads == 0 {
            return Err(CliError::Param("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(threads);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let out = pool.install(|| commands::dispatch(cli.command, &settings))?;

    let config = serde_json::to_string(&settings).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("command {}", cli.command.name());
    println!("config {config}");
    print!("{}", out.text);

    if let Some(path) = &settings.output {
        let doc = json!({
            "command": cli.command.name(),
            "config": settings,
            "result": out.result,
        });
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    if let Some(path) = &settings.csv {
        match &out.csv {
            Some(bytes) => write_file(path, bytes)?,
            None => {
                return Err(CliError::Param(format!(
                    "{} has no table for --csv",
                    cli.command.name()
                )))
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Param(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
