//! Command-line front end: `prepare`, `train`, `translate`, `evaluate` and
//! `analyze`.

pub mod args;
mod commands;
pub mod manifest;

use std::io::Write;

pub use args::Cli;
pub use commands::{resolve_config, run};

use polyg2p::G2pError;

/// Exit status for a failed command: 1 for problems with the user's input
/// or environment, 2 for internal failures.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<G2pError>() {
            return match e {
                G2pError::NonFinite(_)
                | G2pError::Shape { .. }
                | G2pError::IndexOutOfRange { .. }
                | G2pError::NonScalarLoss(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

/// Parses `args`, runs the command and returns the process exit code.
/// Normal output goes to `out`; errors are written to `err`.
pub fn main_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}
