//! `frit` command-line front end.
//!
//! Exit codes: 0 ok, 1 file I/O failure, 2 usage (including unknown example
//! names and sample-time mismatches between config and data), 3 violated
//! data assumption, 4 malformed data or config, 5 numerical failure.

mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::benchlab::BenchError;
use crate::idfrit::IdfritError;

pub use config::{parse_seeds, ModelSpec, RunConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    SampleTime(String),
    #[error("{0}")]
    Assumption(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) | CliError::SampleTime(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Data(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }

    pub(crate) fn io(path: &Path, err: impl Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: err.to_string() }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::UnknownCase(_) => CliError::Usage(e.to_string()),
            BenchError::Idfrit(inner) => inner.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<IdfritError> for CliError {
    fn from(e: IdfritError) -> Self {
        match e {
            IdfritError::ReferenceHeadZero | IdfritError::UnstableReferenceModel => {
                CliError::Assumption(e.to_string())
            }
            IdfritError::SampleTimeMismatch(..) => CliError::SampleTime(e.to_string()),
            IdfritError::ImproperReferenceModel | IdfritError::LengthMismatch(..) => {
                CliError::Data(e.to_string())
            }
            IdfritError::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "frit", version, about = "One-shot data-driven FOPID tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a builtin benchmark end to end: collect data, tune, validate.
    Reproduce {
        /// example1, example2, example3_io or example3_fo
        example: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Tune from a data file; no plant model needed.
    Tune {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's data path.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Close the loop around a known plant and report stability and tracking.
    Validate {
        /// Config with a `plant` entry.
        #[arg(long, conflicts_with = "example", required_unless_present = "example")]
        config: Option<PathBuf>,
        /// Use a builtin benchmark's plant, reference model and controller.
        #[arg(long)]
        example: Option<String>,
        /// Comma-separated parameter vector.
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a builtin benchmark's initial experiment data and matching config.
    Collect {
        example: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunOpts {
    /// Seeds, e.g. `1..5` or `1,4,9`; falls back to FRIT_SEED.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub swarm_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
