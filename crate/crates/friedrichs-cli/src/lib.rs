//! Command-line front end for the decay laboratory.
//!
//! Every subcommand reads a TOML model file, writes CSV/JSON artifacts
//! into an output directory, and records a `metadata.json` with the model
//! hash, the resolved options, and the library version, so any run can be
//! reproduced byte for byte from its output directory alone.

pub mod model_file;
pub mod runs;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

/// Environment variable consulted for the default output directory.
pub const OUT_ENV: &str = "FRIEDRICHS_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "friedrichs",
    version,
    about = "Multichannel decay in the Lee-Friedrichs model: kernels, poles, trajectories, and checks"
)]
pub struct Cli {
    /// Model description file (TOML).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Output directory; defaults to $FRIEDRICHS_OUT, then ./friedrichs-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Time step for grids and integrators.
    #[arg(long, global = true)]
    pub step: Option<f64>,

    /// Final time for grids and trajectories.
    #[arg(long, global = true)]
    pub tmax: Option<f64>,

    /// Modes per channel in the discretized reference.
    #[arg(long, global = true)]
    pub grid_m: Option<usize>,

    /// Seed recorded in metadata and used wherever randomness appears.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Newton convergence tolerance for pole searches.
    #[arg(long, global = true)]
    pub tol_root: Option<f64>,

    /// Eigenvalue clustering tolerance for projectors.
    #[arg(long, global = true)]
    pub tol_deg: Option<f64>,

    /// Explicit lambda grid, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda_sweep: Option<Vec<f64>>,

    /// Propagator to evolve or compare against.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,

    /// Initial amplitudes as re,im pairs, one pair per level; normalized.
    #[arg(long, global = true, value_delimiter = ',')]
    pub state: Option<Vec<f64>>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Pole-approximation propagator (pole sum).
    Ww,
    /// Exact reduced propagator from the memory-kernel equation.
    Exact,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ww => "ww",
            Mode::Exact => "exact",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the memory kernel in time and its frame function in z.
    Kernel,
    /// Evolve the reduced amplitude: memory-kernel and Markovian runs.
    Evolve,
    /// Locate resolvent poles and export residues and projectors.
    Poles,
    /// Tabulate the non-pole contour contribution to the propagator.
    Background,
    /// Evolve the discretized-continuum reference and export its spectrum.
    Oracle,
    /// Measure semigroup deviation and cross-pole mixing.
    Semigroup,
    /// Run the verification suite; exit code reflects the verdict.
    Check {
        /// Run only these criterion indices (1-8), comma separated.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<usize>>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Evolve => "evolve",
            Command::Poles => "poles",
            Command::Background => "background",
            Command::Oracle => "oracle",
            Command::Semigroup => "semigroup",
            Command::Check { .. } => "check",
        }
    }
}
