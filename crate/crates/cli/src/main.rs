//! `bichro`: command-line workflows over `bichro-core`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible request, 4 numerical
//! failure.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use bichro_core::ErrorClass;
use clap::Parser;

use args::{Cli, Command};

fn exit_code(err: &anyhow::Error) -> u8 {
    let class = err
        .chain()
        .find_map(|c| c.downcast_ref::<bichro_core::Error>())
        .map(|e| e.class());
    match class {
        Some(ErrorClass::Infeasible) => 3,
        Some(ErrorClass::Numerical) => 4,
        // unreadable or malformed inputs are configuration errors
        Some(ErrorClass::Validation | ErrorClass::Io) | None => 2,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(bichro_core::Error::InvalidParameter("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Sweep(a) => commands::sweep(cli, a),
        Command::Atlas(a) => commands::atlas(cli, a),
        Command::Plan(a) => commands::plan(cli, a),
        Command::Chevron(a) => commands::chevron(cli, a),
        Command::Calibrate(a) => commands::calibrate(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
