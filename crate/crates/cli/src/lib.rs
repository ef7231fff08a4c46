//! Command-line front end for `redsim-core`.
//!
//! Every subcommand resolves its parameters (flags, then `--config` file,
//! then `REDSIM_SEED`, then defaults), echoes them as `# key=value` header
//! lines and writes CSV, JSON lines or an aligned table.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 no design available,
//! 3 simulation underrun, 4 invalid or unsupported parameters.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::Path;

use clap::Parser;

pub mod args;
pub mod commands;
pub mod config_file;
pub mod output;

pub use args::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(redsim_core::Error),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        use redsim_core::Error;
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(Error::NoDesignAvailable(_)) => 2,
            CliError::Core(Error::SimulationUnderrun { .. }) => 3,
            CliError::Core(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<redsim_core::Error> for CliError {
    fn from(e: redsim_core::Error) -> Self {
        CliError::Core(e)
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the exit code.
pub fn run(argv: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match config_file::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // --help and --version are not failures.
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match commands::dispatch(cfg, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
