//! `otflow` command-line front end. Exit codes: 0 success, 2 usage error,
//! 3 numerical failure.

mod commands;
mod config;
mod error;
mod initial;
mod output;

use config::Command;
use error::{CliError, CliResult};
use output::Context;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run() {
        Ok(()) => 0,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("otflow: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run() -> CliResult<()> {
    let inv = config::parse(std::env::args_os().collect())?;
    configure_threads()?;
    let ctx = Context { command: inv.command, resolved: inv.resolved };
    match &inv.cli.command {
        Command::Distance(a) => commands::distance(&ctx, a),
        Command::Geodesic(a) => commands::geodesic(&ctx, a),
        Command::Energy(a) => commands::energy(&ctx, a),
        Command::Hessian(a) => commands::hessian(&ctx, a),
        Command::Lambda(a) => commands::lambda(&ctx, a),
        Command::Counterexample(a) => commands::counterexample_sweep(&ctx, a),
        Command::Flow(a) => commands::flow(&ctx, a),
        Command::Pde(a) => commands::pde(&ctx, a),
        Command::Compare(a) => commands::compare(&ctx, a),
        Command::Certify(a) => commands::certify(&ctx, a),
    }
}

/// `OTFLOW_THREADS` caps the worker pool.
fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("OTFLOW_THREADS") else { return Ok(()) };
    let threads: usize = match value.trim().parse() {
        Ok(t) if t > 0 => t,
        _ => return Err(CliError::Usage(format!("OTFLOW_THREADS must be a positive integer, got `{value}`"))),
    };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    log::debug!("built without parallelism, OTFLOW_THREADS = {threads} has no effect");
    Ok(())
}
