//! `evla` command implementations. Every command returns a
//! [`PipelineReport`]; the binary prints it as JSON and maps errors to exit
//! codes (2 usage, 3 I/O, 4 failed numeric check).

pub mod cmd;
mod error;
mod report;

pub use error::CliError;
pub use report::{sha256_hex, Check, FileDigest, PipelineReport};

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "evla", version, about = "Event-camera windowing, rendering, fusion checks and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize an episode: sharp and degraded frames, events, manifest.
    Simulate(cmd::simulate::Args),
    /// Render event windows to pixmaps.
    Render(cmd::render::Args),
    /// Paint window events over an RGB image.
    Overlay(cmd::overlay::Args),
    /// Report adapter shapes, parameter count and FLOPs; optionally run gradient checks.
    AdapterCheck(cmd::adapter_check::Args),
    /// Measure ingest, windowing and accumulation throughput.
    Bench(cmd::bench::Args),
}

/// Thread cap from `EVLA_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>, CliError> {
    match std::env::var("EVLA_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("EVLA_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn run(cli: Cli) -> Result<PipelineReport, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => cmd::simulate::run(&a),
        Command::Render(a) => cmd::render::run(&a),
        Command::Overlay(a) => cmd::overlay::run(&a),
        Command::AdapterCheck(a) => cmd::adapter_check::run(&a),
        Command::Bench(a) => cmd::bench::run(&a),
    })
}
