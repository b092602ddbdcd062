//! Command-line front end: argument parsing, config resolution and the
//! subcommand implementations behind the `cvm` binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::panic::{self, AssertUnwindSafe};

use args::{Cli, Command};
pub use error::CliError;

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Contrast(a) => commands::contrast(a),
        Command::Segment(a) => commands::segment(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Losses(a) => commands::losses(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::Render(a) => commands::render(a),
    }
}

/// Runs one parsed invocation on a pool of `--jobs` threads. Panics are
/// reported as internal errors.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    panic::catch_unwind(AssertUnwindSafe(|| pool.install(|| dispatch(&cli.command))))
        .unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(CliError::Internal(msg))
        })
}
