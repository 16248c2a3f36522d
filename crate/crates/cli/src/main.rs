//! Chart-to-signal pipeline CLI.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use triplei_cli::commands;
use triplei_cli::{RunConfig, ValidationError};

#[derive(Parser)]
#[command(
    name = "triplei",
    version,
    about = "Render price charts, train residual networks, extract image-induced \
             importance weights, enhance technical signals, and backtest them"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "run.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a panel (or ingest a CSV) into the run directory.
    Synth,
    /// Summarize renderable chart windows and write sample charts.
    Render,
    /// Train the model ensemble on rendered windows.
    Train,
    /// Compute triple-I weight panels and localization overlays.
    Explain,
    /// Build original and TWMA-enhanced signal panels.
    Enhance,
    /// Backtest original vs enhanced signals.
    Backtest,
    /// Evaluate the trading-rule universe with and without enhancement.
    Rules,
    /// Time-scale transfer: condensed-bar weights for longer holding periods.
    Transfer,
    /// Consolidated report tables.
    Report,
    /// Validate the configuration and print its hash.
    Check,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = RunConfig::from_path(&cli.config)?;
    match cli.command {
        Command::Synth => commands::cmd_synth(config),
        Command::Render => commands::cmd_render(config),
        Command::Train => commands::cmd_train(config),
        Command::Explain => commands::cmd_explain(config),
        Command::Enhance => commands::cmd_enhance(config),
        Command::Backtest => commands::cmd_backtest(config),
        Command::Rules => commands::cmd_rules(config),
        Command::Transfer => commands::cmd_transfer(config),
        Command::Report => commands::cmd_report(config),
        Command::Check => {
            config.validate()?;
            println!("{}", config.hash());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let validation = err.is::<ValidationError>()
                || err.downcast_ref::<toml::de::Error>().is_some();
            if validation {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
