//! Command-line front end of the `segdetect` change point detector.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

use std::time::Instant;

use args::{Cli, Command};
use error::CliResult;
use manifest::RunManifest;

/// Runs one command and writes its manifest; returns the manifest path.
pub fn run(cli: &Cli) -> CliResult<std::path::PathBuf> {
    let start = Instant::now();
    let (name, outcome) = match &cli.command {
        Command::Detect(a) => ("detect", commands::cmd_detect(a, cli.seed)?),
        Command::Refit(a) => ("refit", commands::cmd_refit(a, cli.seed)?),
        Command::Simulate(a) => ("simulate", commands::cmd_simulate(a, cli.seed)?),
        Command::Benchmark(a) => ("benchmark", commands::cmd_benchmark(a, cli.seed)?),
        Command::Trace(a) => ("trace", commands::cmd_trace(a, cli.seed)?),
    };
    let manifest = RunManifest {
        command: name.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cli.seed,
        workers: cli.workers,
        config: outcome.config,
        outputs: outcome.outputs,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&outcome.primary)
}
