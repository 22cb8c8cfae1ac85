mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use crate::commands::Command;
use crate::config::{resolve_seed, FileConfig, SEED_ENV};
use crate::error::CliError;
use crate::output::{render, Format};

#[derive(Parser, Debug)]
#[command(name = "sqm", version, about = "Perception measures, typicalities and posterior inference reports")]
struct Cli {
    /// Seed for sampled quantities (default: $SQM_SEED, else 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// TOML file presetting any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = resolve_seed(cli.seed, cfg.seed, std::env::var(SEED_ENV).ok(), sqm_core::reproduce::DEFAULT_SEED)?;
    let format = cli.format.or(cfg.format).unwrap_or(Format::Json);
    let output = cli.output.clone().or_else(|| cfg.output.clone());

    let (name, result, failed) = commands::run(&cli.command, &cfg, seed.seed)?;
    let report = json!({
        "command": name,
        "provenance": {
            "seed": seed.seed,
            "seedSource": seed.seed_source,
            "envSeed": seed.env_seed,
            "version": env!("CARGO_PKG_VERSION"),
        },
        "result": result,
    });
    let bytes = render(&report, format)?;
    match output {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failed.join("; ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sqm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
