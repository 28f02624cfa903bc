//! Command-line front end.
//!
//! Each subcommand resolves a [`RunConfig`] (defaults, then `--config`,
//! then flags), validates it in full, and only then touches data. Reports
//! go to `--out` and every file is written once via rename.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O or file format, 3 solver
//! non-convergence.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{RunConfig, SchemeKind, StepKind, SvmKind};

use crate::error::{Error, ErrorKind};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cskl",
    version,
    about = "Controlled-sparsity multiple kernel learning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the two-Gaussian benchmark bank.
    GenSynthetic(RunArgs),
    /// Train one solver on a train/test split and write the model.
    Train(RunArgs),
    /// Train CSKL over a range of t.
    Sweep(RunArgs),
    /// Train several solvers on the same tasks and tabulate accuracies.
    Compare(RunArgs),
    /// Describe a bank file.
    InspectBank(RunArgs),
}

/// Flags shared by all subcommands. Each overrides the matching key of
/// `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the keys below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSKB bank file, or comma-separated CSV kernel files with --labels.
    #[arg(long, value_delimiter = ',')]
    pub bank: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// `kernel_index,group_name` lines.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated: cskl, simplemkl, lpmkl, uniform; `name:param` sets t or p.
    #[arg(long, value_delimiter = ',')]
    pub solver: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub svm: Option<SvmKind>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub gamma_step: Option<StepKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub t_min: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Independent splits (or generated datasets), seeded `seed..seed+runs`.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,
    /// Sample count of the generated benchmark.
    #[arg(long)]
    pub m: Option<usize>,
}

impl RunArgs {
    /// Config file (if any) with flags applied on top.
    pub fn to_config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                }
            )*};
        }
        set!(bank, solver, svm, c, nu, epsilon, gamma_step, seed, threads, t_min, runs, scheme, m);
        set_opt!(labels, groups, out, t, p, t_max);
        Ok(cfg)
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Solver => EXIT_SOLVER,
    }
}

/// Runs the command and returns the exit code. Messages go to stdout and
/// errors to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

pub fn main_exit() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
