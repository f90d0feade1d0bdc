//! `svi`: solve, sweep and inspect parametric set-valued inclusions and ideal
//! efficiency problems described by JSON problem files.

mod commands;
mod props;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

/// Exit codes: 0 success, 1 usage or input error, 2 solver failure,
/// 3 internal error (including failed property checks).
fn exit_code(err: &anyhow::Error) -> u8 {
    use svi::Error;
    if err.downcast_ref::<commands::UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NoDescentStep { .. } | Error::MaxItersExceeded { .. }) => 2,
        Some(
            Error::Parse(_)
            | Error::InvalidConfig(_)
            | Error::InvalidData(_)
            | Error::DimensionMismatch { .. }
            | Error::ParameterOutOfRange { .. }
            | Error::UnsupportedCombination(_)
            | Error::HypothesisViolated(_),
        ) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SVI_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
