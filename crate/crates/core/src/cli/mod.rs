//! Config-driven batch runner behind the `antibody-lab` binary.
//!
//! Every command reads one JSON config (or the defaults), applies dotted
//! overrides such as `--sim.seed=7`, and writes CSV/JSON artifacts whose
//! first line is `# config_hash=<sha256> seed=<seed>`.

mod commands;
mod config;
mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{run_command, Outcome};
pub use config::{
    GridConfig, ModelConfig, OutputConfig, OutputFormat, ParamRange, RunConfig, SimConfig, SweepConfig, VerifyConfig,
};
pub use verify::{run_verification, VerifyCheck};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Version of the verdict JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "antibody-lab", version, about = "Antibody-level jump process: simulation, densities, stability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Monte Carlo paths, histogram and moments.
    Simulate,
    /// Density snapshots at the checkpoints.
    Evolve,
    /// Invariant density.
    Stationary,
    /// Stable / sweeping verdict for the configured model.
    Classify,
    /// Formula-verification battery.
    Verify,
    /// Power-law phase diagram over (a, b, lambda).
    Sweep,
}

/// Splits `--a.b=value` overrides from the arguments clap understands.
fn split_overrides(args: Vec<OsString>) -> (Vec<OsString>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for arg in args {
        if let Some(s) = arg.to_str() {
            if let Some(body) = s.strip_prefix("--") {
                if let Some((key, value)) = body.split_once('=') {
                    if key.contains('.') {
                        overrides.push((key.to_string(), value.to_string()));
                        continue;
                    }
                }
            }
        }
        rest.push(arg);
    }
    (rest, overrides)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let (args, overrides) = split_overrides(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        },
        None => String::new(),
    };
    let result = RunConfig::from_json(&text, &overrides).and_then(|cfg| run_command(cli.command, &cfg));
    match result {
        Ok(Outcome { passed: true, .. }) => EXIT_OK,
        Ok(_) => EXIT_RUNTIME,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
