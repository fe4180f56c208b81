//! Command-line workflows around [`zoh_funnel`]: design certificates,
//! simulation traces, trace audits, parameter sweeps and variant comparisons.
//!
//! Exit codes: `0` success, `2` infeasible run or failed audit, `3`
//! configuration error, `4` numerical blowup.

pub mod certificate;
pub mod commands;
pub mod config;
pub mod error;
pub mod sweep;
pub mod trace_csv;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{Experiment, VariantName};
use crate::error::CliError;
use crate::sweep::Grid;

#[derive(Debug, Parser)]
#[command(
    name = "zoh-funnel",
    version,
    about = "Derivative-free sampled-data funnel control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the design constants and the sampling bound.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Certificate file (TOML).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accept an explicit tau above tau_max.
        #[arg(long = "unsafe")]
        allow_unsafe: bool,
    },
    /// Run the closed loop and write the trace CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long = "unsafe")]
        allow_unsafe: bool,
    },
    /// Audit a trace CSV against a certificate.
    Verify {
        trace: PathBuf,
        certificate: PathBuf,
    },
    /// Simulate every point of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// For example `tau=1.8e-3,0.07;beta=25.2,5;lambda=0.7`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Run both laws and write plot-ready columns.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "unsafe")]
        allow_unsafe: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VariantArg {
    Free,
    Deriv,
}

impl From<VariantArg> for zoh_funnel::controller::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Free => VariantName::Free.into(),
            VariantArg::Deriv => VariantName::Deriv.into(),
        }
    }
}

/// Runs a parsed command; returns stdout text and the exit code.
pub fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::Design {
            config,
            out,
            allow_unsafe,
        } => commands::cmd_design(&Experiment::load(&config)?, out.as_deref(), allow_unsafe),
        Command::Simulate {
            config,
            out,
            variant,
            allow_unsafe,
        } => {
            let x = Experiment::load(&config)?;
            commands::cmd_simulate(&x, out.as_deref(), variant.map(Into::into), allow_unsafe)
                .map(|(o, _)| o)
        }
        Command::Verify { trace, certificate } => commands::cmd_verify(&trace, &certificate),
        Command::Sweep {
            config,
            grid,
            out,
            variant,
        } => {
            let grid = Grid::parse(&grid)?;
            commands::cmd_sweep(
                &Experiment::load(&config)?,
                &grid,
                out.as_deref(),
                variant.map(Into::into),
            )
        }
        Command::Compare {
            config,
            out,
            allow_unsafe,
        } => commands::cmd_compare(&Experiment::load(&config)?, out.as_deref(), allow_unsafe)
            .map(|(o, _)| o),
    }
}
