//! Command-line driver: simulate, classify, equilibria, montecarlo and
//! landscape.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or malformed input, 4 numeric
//! failure.

pub mod args;
pub mod commands;
pub mod error;
pub mod landscape;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use error::{CliError, Result};

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match commands::dispatch(cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("balflow: {e}");
            e.exit_code()
        }
    }
}
