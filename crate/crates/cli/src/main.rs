//! `vnd` — the visual narration detection pipeline on the command line.
//!
//! Exit codes: 0 on success, 1 when a command fails at runtime, 2 on usage
//! errors (bad flags, missing or out-of-range parameters).

mod args;
mod cmd;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::manifest::Run;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut run = Run::start(&cli.command);
    let result = match &cli.command {
        Command::Synth(a) => cmd::synth::run(a, &mut run),
        Command::Curate(a) => cmd::curate::run(a, &mut run),
        Command::Train(a) => cmd::train::run(a, &mut run),
        Command::Pseudo(a) => cmd::pseudo::run(a, &mut run),
        Command::Eval(a) => cmd::eval::run(a, &mut run),
        Command::Grid(a) => cmd::grid::run(a, &mut run),
        Command::Audio(a) => cmd::audio::run(a, &mut run),
    };
    let (code, error) = match result {
        Ok(()) => (0u8, None),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            (2, Some(msg))
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            (1, Some(format!("{e:#}")))
        }
    };
    if let Err(e) = run.finish(code, error) {
        eprintln!("warning: could not write run manifest: {e:#}");
    }
    ExitCode::from(code)
}
