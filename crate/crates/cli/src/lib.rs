//! The `elgauss` command-line tool. The binary is a thin wrapper around
//! [`main_with_args`]; the pieces are public so tests can drive them directly.

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use elgauss_core::Error;

pub mod args;
pub mod commands;
pub mod render;

pub use args::Cli;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) => EXIT_USAGE,
        Error::Io { .. } | Error::Parse { .. } | Error::Image { .. } => EXIT_IO,
        Error::Numerical(_) | Error::Divergence { .. } => EXIT_NUMERICAL,
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version go to stdout and are not errors.
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    init_logging(cli.verbose);
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
