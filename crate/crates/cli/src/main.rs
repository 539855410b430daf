use std::process::ExitCode;

use clap::Parser;
use mscca_cli::commands::{execute, Cli};
use mscca_cli::CliError;

/// Caps the global worker pool at `MSCCA_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MSCCA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!("MSCCA_THREADS={raw:?} is not a positive count"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mscca: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
