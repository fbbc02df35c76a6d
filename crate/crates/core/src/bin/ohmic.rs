//! Experiment runner CLI.
//!
//! ```text
//! ohmic run <config> [--out DIR] [--workers N] [--seed-override U64]
//! ohmic validate <config>
//! ohmic version
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical-contract
//! violation, 4 I/O failure.

use clap::{Parser, Subcommand};
use ohmic::experiment::{export_results, parse_config, run_experiment, ExperimentError};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "ohmic", version, about = "Driven lattice-fermion thermodynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file and write its outputs.
    Run {
        /// Path to the flat key-value config.
        config: PathBuf,
        /// Output directory; overrides the config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the disorder ensemble.
        #[arg(long)]
        workers: Option<usize>,
        /// Replace the config's seed_base.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Parse a config, report every problem, and show the effective values.
    Validate { config: PathBuf },
    /// Print the tool version.
    Version,
}

fn read_config(path: &PathBuf) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        EXIT_IO
    })
}

fn run() -> Result<(), u8> {
    match Cli::parse().command {
        Command::Version => {
            println!("ohmic {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::Validate { config } => {
            let text = read_config(&config)?;
            match parse_config(&text) {
                Ok(effective) => {
                    println!("ok: {}", config.display());
                    println!("config_hash = {}", effective.hash());
                    print!("{}", effective.canonical_text());
                    Ok(())
                }
                Err(errors) => {
                    eprintln!("{} invalid:", config.display());
                    eprintln!("{errors}");
                    Err(EXIT_CONFIG)
                }
            }
        }
        Command::Run {
            config,
            out,
            workers,
            seed_override,
        } => {
            let text = read_config(&config)?;
            let mut effective = match parse_config(&text) {
                Ok(c) => c,
                Err(errors) => {
                    eprintln!("{} invalid:", config.display());
                    eprintln!("{errors}");
                    return Err(EXIT_CONFIG);
                }
            };
            if let Some(seed) = seed_override {
                effective.seed_base = seed;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&effective.out_dir));

            let record = run_experiment(&effective, workers).map_err(|e| {
                eprintln!("run failed: {e}");
                match e {
                    ExperimentError::Config(_) => EXIT_CONFIG,
                    ExperimentError::Io { .. } => EXIT_IO,
                    _ => EXIT_NUMERICAL,
                }
            })?;

            let target = out_dir.join(&record.config_hash);
            let written = export_results(&record, &target).map_err(|e| {
                eprintln!("export failed: {e}");
                match e {
                    ExperimentError::Io { .. } => EXIT_IO,
                    _ => EXIT_NUMERICAL,
                }
            })?;

            println!(
                "{} [{}] -> {}",
                effective.kind.id(),
                record.config_hash,
                target.display()
            );
            for (name, mean, stderr) in &record.aggregates {
                if *stderr > 0.0 {
                    println!("  {name} = {mean} ± {stderr}");
                } else {
                    println!("  {name} = {mean}");
                }
            }
            for w in &record.warnings {
                println!("  warning: {w}");
            }
            println!("  files: {}", written.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
