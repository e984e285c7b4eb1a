//! `dc`: batch frontend for the data collaboration toolkit.

mod commands;
mod layout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dc_core::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(
    name = "dc",
    version,
    about = "Data collaboration: generate, align, verify, cost and benchmark"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// JSON config (ScenarioSpec for gen, CostParams for cost, SweepSpec for bench)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (or file for single-report commands)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; `csv` adds CSV mirrors of matrices and tabular reports
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Cap on BLAS/LAPACK threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed override
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Odc,
    Imakura,
    Kawakami,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct TargetOpts {
    /// Alignment method
    #[arg(long, value_enum, default_value_t = MethodArg::Odc)]
    pub method: MethodArg,
    /// Seed of the Haar target O (ODC); defaults to --seed, then 0
    #[arg(long)]
    pub target_seed: Option<u64>,
    /// Imakura target factor R (DCM1 or .csv); identity when absent
    #[arg(long, conflicts_with = "r_seed")]
    pub r_matrix: Option<PathBuf>,
    /// Draw Imakura's R as a seeded Gaussian matrix
    #[arg(long)]
    pub r_seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scenario: private data plus analyst-visible bundles
    Gen,
    /// Align the analyst bundles of a generated scenario
    Align {
        /// Generated scenario directory (or its analyst/ subdirectory)
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        target: TargetOpts,
    },
    /// Check concordance against the private bases; exit 0 iff satisfied
    Verify {
        /// Generated scenario directory (needs private/)
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        target: TargetOpts,
    },
    /// Evaluate the FLOP, memory, traffic and time models
    Cost {
        /// Also write an R* grid over sample counts, model sizes and participation
        #[arg(long)]
        rstar_grid: Option<PathBuf>,
    },
    /// Run a timing sweep
    Bench,
    /// Reconstruct a secret basis from the anchor (collusion demonstration)
    Demo {
        /// Generated scenario directory
        #[arg(long)]
        input: PathBuf,
        /// Target user index; defaults to the last user
        #[arg(long)]
        user: Option<usize>,
    },
}

/// Exit codes: 0 success, 1 validation, 2 numerical, 3 I/O.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.class() {
                ErrorClass::Validation => 1,
                ErrorClass::Numerical => 2,
                ErrorClass::Io => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 1;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(status) => status,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
