//! `mixtura <command> --config <path> [--out <dir>] [--force]`
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure
//! (a `diagnostic.json` is written next to the other outputs).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{execute, Command, Invocation, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "mixtura", version, about = "Two-component compressible mixture simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// TOML config with [mixture], [grid], [time], [initial] and [output] sections.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides MIXTURA_OUT and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Nonlinear run: series.csv and final_state.json.
    Simulate(Common),
    /// Spectrum of the constant-state linearization: spectrum.json.
    Linearize(Common),
    /// Primitive vs entropic runs across resolutions: equivalence.csv.
    Equivalence(Common),
    /// Reference-frame identities and remainder scaling: lagrangian.json.
    LagrangianCheck(Common),
    /// Manufactured-solution sweeps: convergence.csv.
    Convergence(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Linearize(a) => (Command::Linearize, a),
        Cmd::Equivalence(a) => (Command::Equivalence, a),
        Cmd::LagrangianCheck(a) => (Command::LagrangianCheck, a),
        Cmd::Convergence(a) => (Command::Convergence, a),
    };
    ExitCode::from(execute(&Invocation {
        command,
        config: args.config,
        out: args.out,
        force: args.force,
    }))
}
