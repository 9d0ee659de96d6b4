//! Command-line front end: `verify`, `train`, `eval`, `repr`, `decompose`.
//!
//! Exit codes: 0 success, 1 validation failure (bad flags or flag
//! combinations), 2 runtime failure (I/O, shape mismatches), 3 verification
//! failure (a property check did not pass).

mod commands;

use clap::error::ErrorKind;
use clap::Parser;
use commands::{Cli, CliError};

/// Parses arguments from the environment and runs the selected command,
/// returning the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not failures.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Verification) => 3,
    }
}
