use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let outcome = std::panic::catch_unwind(|| {
        let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
        polyg2p_cli::main_with(std::env::args_os(), &mut out, &mut err)
    });
    // A panic is always an internal failure.
    ExitCode::from(outcome.unwrap_or(2) as u8)
}
