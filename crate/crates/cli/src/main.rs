//! `confgauge`: curvature dumps, symbol certificates, gauge solves, symbol
//! smoothing and the acceptance suites from one binary.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::run::Usage;

#[derive(Debug, Parser)]
#[command(name = "confgauge", version, about = "Conformal curvature and gauge toolkit")]
pub struct Cli {
    /// Metric spec file, or the name of a bundled spec (`flat3`, `sphere3`, ...).
    #[arg(long, global = true)]
    pub spec: Option<String>,
    /// Directory for reports and tables.
    #[arg(long, global = true, default_value = "confgauge-out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the pass threshold of the command's check.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Print the report JSON on stdout instead of a summary.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curvature tensors at sample points.
    Curvature {
        /// Comma-separated tensor set.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        which: Vec<Quantity>,
        #[command(flatten)]
        points: PointArgs,
    },
    /// Ellipticity certificate of the gauge-fixed Bach symbol at one point.
    Certify {
        /// Background point, comma-separated; defaults to the box centre.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        at: Option<Vec<f64>>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// `Γ^k − Γ̃^k` in the metric's own coordinates.
    GaugeCheck {
        #[command(flatten)]
        points: PointArgs,
    },
    /// Dirichlet solve for n-harmonic coordinates with identity boundary data.
    Solve {
        /// Solver config JSON (`grid`, `box`, `max_iter`, `tol`, `eps_reg`, `memory`, `gauge_check`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Nodes per axis, overriding the config.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Symbol smoothing of a synthetic rough symbol on the torus.
    Smooth {
        /// Smoothing config JSON (`symbol`, `delta`, `tau`, `j0`, `rate_grid`, `rate_tol`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        j0: Option<u32>,
    },
    /// Acceptance suite: `invariance`, `symbols`, `solver` or `smoothing`.
    Suite { name: String },
}

#[derive(Debug, Clone, clap::Args)]
pub struct PointArgs {
    /// Explicit point, comma-separated; repeatable.
    #[arg(long, allow_negative_numbers = true)]
    pub at: Vec<String>,
    /// Number of seeded random points when no `--at` is given.
    #[arg(long, default_value_t = 5)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    All,
    Christoffel,
    Riemann,
    Ricci,
    Scalar,
    Schouten,
    Weyl,
    Cotton,
    Bach,
    Obstruction,
    Gauge,
}

/// 0 pass, 1 failed check, 2 bad input, 3 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    use confgauge_core::Error as E;
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::Syntax { .. }
            | E::UnknownIdentifier { .. }
            | E::WrongArity { .. }
            | E::VariableOutOfRange { .. }
            | E::InvalidSpec(_)
            | E::NotSpd { .. }
            | E::Domain { .. }
            | E::DimensionTooSmall { .. }
            | E::DimensionTooLarge { .. }
            | E::UnsupportedDimension { .. }
            | E::Shape(_)
            | E::ZeroCovector
            | E::NonTraceFreePerturbation { .. }
            | E::NotUnimodular { .. }
            | E::BadRegularity { .. }
            | E::PartitionCoverage { .. }
            | E::InvalidConfig(_),
        ) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
