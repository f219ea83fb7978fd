//! `phasebal` command line. [`run`] parses arguments, resolves flags over
//! the optional config file over built-in defaults, runs one subcommand and
//! maps the outcome to an exit code.

pub mod commands;
pub mod output;
pub mod params;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::output::CliError;
use crate::params::*;

#[derive(Debug, Parser)]
#[command(name = "phasebal", version, about = "Phase balancing of distribution feeder loads")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML file of `key = value` settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "phasebal-out")]
    pub out: PathBuf,
    /// Record wall-clock times; outputs are then no longer reproducible.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic balancing of the mean demand.
    Balance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataParams,
        #[command(flatten)]
        objective: ObjectiveParams,
        #[command(flatten)]
        solver: SolverParams,
    },
    /// Robust balancing against a demand box.
    Robust {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataParams,
        #[command(flatten)]
        uncertainty: BoxParams,
        #[command(flatten)]
        solver: SolverParams,
    },
    /// One robust look-ahead plan with a swap budget.
    Lookahead {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataParams,
        #[command(flatten)]
        horizon: HorizonParams,
        #[command(flatten)]
        solver: SolverParams,
    },
    /// Rolling-horizon operation, optionally over several swap budgets.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataParams,
        #[command(flatten)]
        horizon: HorizonParams,
        #[command(flatten)]
        sim: SimParams,
        #[command(flatten)]
        solver: SolverParams,
    },
    /// Writes a model in MPS format with a name-map sidecar.
    ExportMps {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        export: ExportParams,
        #[command(flatten)]
        data: DataParams,
        #[command(flatten)]
        objective: ObjectiveParams,
        #[command(flatten)]
        uncertainty: BoxParams,
        #[command(flatten)]
        horizon: HorizonParams,
    },
    /// Summary statistics and sorted curves over evaluation files.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        report: ReportParams,
    },
    /// Writes a synthetic hourly load dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        generate: GenerateParams,
    },
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("PHASEBAL_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
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
            eprintln!("phasebal: {e}");
            e.exit_code()
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
