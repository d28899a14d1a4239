//! `rephase`: simulate, sweep and fit dynamically rephased ORCA memories.
//!
//! Exit codes: 0 success, 2 configuration or input error (parse failure,
//! missing file, empty sweep axis, malformed CSV), 3 validation error,
//! 4 numerical divergence, 5 fit failure.

mod config;
mod fit;
mod output;
mod simulate;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rephase_core::Error;

#[derive(Debug, Parser)]
#[command(name = "rephase", version, about = "Maxwell-Bloch simulation of rephased ORCA quantum memories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its manifest and field trace.
    Simulate {
        config: PathBuf,
        /// Worker threads (overrides the config and REPHASE_WORKERS).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the Cartesian product of the config's sweep axes. Finished points
    /// are reused on re-runs.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit measured or simulated data.
    Fit {
        #[command(subcommand)]
        kind: fit::FitCommand,
    },
    /// Protocol catalogue.
    Protocols {
        #[command(subcommand)]
        action: ProtocolsAction,
    },
}

#[derive(Debug, Subcommand)]
enum ProtocolsAction {
    /// List the named protocols and their parameters.
    List,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io { .. } | Error::Lookup(_) => 2,
        Error::Validation(_) | Error::Domain(_) => 3,
        Error::Divergence { .. } => 4,
        Error::Fit(_) => 5,
    }
}

fn list_protocols() {
    let rows = [
        ("standard", "storage_ns", "write at 0, read at storage_ns"),
        ("rephased", "storage_ns | t_ns, ratio", "shelve in d between two transfers; read when the phase closes"),
        ("multimode", "bins_ns, storage_ns, group_size, ratio", "several time bins, each read storage_ns after input"),
        ("reorder", "t1_ns, t2_ns", "two bins retrieved in reverse order"),
        ("interference", "t1_ns, t2_ns, mix_area", "two bins mixed by a partial transfer"),
    ];
    println!("{:<13} {:<40} description", "name", "parameters");
    for (name, params, what) in rows {
        println!("{name:<13} {params:<40} {what}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, workers } => simulate::run(&config, workers),
        Command::Sweep { config, workers } => sweep::run(&config, workers),
        Command::Fit { kind } => fit::run(kind),
        Command::Protocols { action: ProtocolsAction::List } => {
            list_protocols();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
