//! Command-line front end for downward-continuation experiments.
//!
//! Subcommands: `synth` generates observations from configured point
//! sources; `scan` solves the continuation problem over a depth grid and
//! writes the residual curve; `continue` solves at one depth and writes the
//! density grid; `select` applies the residual criterion to pick the
//! working depth; `peel` runs the iterative source estimation.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numerical
//! non-convergence in a mandatory solve, 4 I/O error.

// Guards written as `!(x > 0.0)` are deliberate: they reject NaN along
// with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error(transparent)]
    Core(#[from] gravicont::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                gravicont::Error::Usage(_)
                | gravicont::Error::InvalidGeometry(_)
                | gravicont::Error::InvalidDepth { .. }
                | gravicont::Error::ShapeMismatch(_)
                | gravicont::Error::NonFiniteData(_)
                | gravicont::Error::SingularKernel { .. }
                | gravicont::Error::Capacity(_) => 2,
            },
        }
    }
}

#[derive(Parser)]
#[command(name = "gravicont", version, about = "Downward continuation of gravity anomalies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the configuration file).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Relative noise level (overrides the configuration file).
    #[arg(long)]
    delta: Option<f64>,
    /// Noise seed (overrides the configuration file).
    #[arg(long)]
    seed: Option<u64>,
    /// First scanned depth (overrides the configuration file).
    #[arg(long)]
    depth_start: Option<f64>,
    /// Last scanned depth (overrides the configuration file).
    #[arg(long)]
    depth_stop: Option<f64>,
    /// Depth step (overrides the configuration file).
    #[arg(long)]
    depth_step: Option<f64>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            output_directory: self.out_dir.clone(),
            delta: self.delta,
            seed: self.seed,
            depth_start: self.depth_start,
            depth_stop: self.depth_stop,
            depth_step: self.depth_step,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize observations from the configured point sources.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve over the configured depth grid and write the residual curve.
    Scan {
        #[command(flatten)]
        common: CommonArgs,
        /// Observations file produced by `synth`.
        #[arg(long)]
        observations: PathBuf,
        /// Also write a density grid per depth.
        #[arg(long)]
        densities: bool,
    },
    /// Solve at a single continuation depth and write the density grid.
    #[command(name = "continue")]
    Continue {
        #[command(flatten)]
        common: CommonArgs,
        /// Observations file produced by `synth`.
        #[arg(long)]
        observations: PathBuf,
        /// Continuation depth.
        #[arg(long)]
        depth: f64,
        /// Print the solver iteration trace to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Pick the deepest depth whose residual stays within the noise level.
    Select {
        #[command(flatten)]
        common: CommonArgs,
        /// Scan file produced by `scan`.
        #[arg(long)]
        scan: PathBuf,
        /// Observations file the scan was run against.
        #[arg(long)]
        observations: PathBuf,
    },
    /// Iteratively estimate equivalent point sources.
    Peel {
        #[command(flatten)]
        common: CommonArgs,
        /// Observations file produced by `synth`.
        #[arg(long)]
        observations: PathBuf,
        /// Maximum number of peeling rounds.
        #[arg(long, default_value_t = 8)]
        max_rounds: usize,
        /// Stop once the working data norm drops below this fraction of the
        /// original.
        #[arg(long, default_value_t = 0.05)]
        stop_fraction: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { common } => commands::synth(&common.config, &common.overrides()),
        Command::Scan { common, observations, densities } => {
            commands::scan(&common.config, &common.overrides(), &observations, densities)
        }
        Command::Continue { common, observations, depth, trace } => {
            commands::continue_at(&common.config, &common.overrides(), &observations, depth, trace)
        }
        Command::Select { common, scan, observations } => {
            commands::select(&common.config, &common.overrides(), &scan, &observations)
        }
        Command::Peel { common, observations, max_rounds, stop_fraction } => commands::peel(
            &common.config,
            &common.overrides(),
            &observations,
            max_rounds,
            stop_fraction,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
