//! Command-line front end: `score`, `curve`, `sgr`, `correlate` and `simulate`.
//!
//! Every subcommand writes its outputs plus a `manifest.json` into `--out`.
//! The manifest is written first with `"complete": false` and rewritten with
//! `true` once all outputs exist.

pub mod args;
pub mod commands;
pub mod pipeline;
pub mod svg;

use std::fmt;

use args::{Cli, Command};

/// Error with the process exit code: 2 for invalid input, 3 for numeric failure.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Score(a) => commands::cmd_score(a),
        Command::Curve(a) => commands::cmd_curve(a),
        Command::Sgr(a) => commands::cmd_sgr(a),
        Command::Correlate(a) => commands::cmd_correlate(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
    }
}
