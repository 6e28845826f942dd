//! `qbranch` command-line front end: argument parsing, the JSON config
//! splice, report formatting and the exit-code contract.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qbranch_core::Error;

mod commands;
mod config;
mod output;
pub mod verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_UNCONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qbranch", version, about = "Branching-ensemble probabilities, splitter statistics and damping fits")]
struct Cli {
    /// JSON file whose keys mirror the flags; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Occupation statistics of n photons at a beam splitter.
    Splitter(SplitterArgs),
    /// Sample a ground-state probability trace as CSV.
    RabiTrace(TraceArgs),
    /// Fit a damping rate to a trace CSV.
    Fit(FitArgs),
    /// Damping rates across the Rabi frequency ladder and their power law.
    Eid(EidArgs),
    /// Run the oracle-equivalence and reduction suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    All,
    Scattered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Closed,
    Binomial,
    Multinomial,
    Enumerate,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Closed,
    Indist,
    Approx,
    Dist,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SplitterArgs {
    #[arg(long)]
    n: usize,
    /// Reflection probability R.
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_r: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_t: f64,
    #[arg(long, default_value_t = 1.0)]
    w_b: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::All)]
    convention: ConventionArg,
    #[arg(long, value_enum, default_value_t = Method::All)]
    method: Method,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct TraceArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    omega: f64,
    /// Mean interval between environment events.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, conflicts_with = "eta")]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = qbranch_core::rabi::DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long)]
    t_max: f64,
    #[arg(long, default_value_t = 401)]
    samples: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct FitArgs {
    /// Trace CSV with columns `t,p_g` (a `p_e` column is ignored).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    omega: f64,
    #[arg(long, default_value_t = 0.0)]
    t_min: f64,
    /// Defaults to the last sample time.
    #[arg(long)]
    t_max: Option<f64>,
    /// Upper end of the damping-rate search; defaults to omega.
    #[arg(long)]
    gamma_hi: Option<f64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EidArgs {
    /// Rabi frequency of level 0.
    #[arg(long)]
    omega0: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = qbranch_core::rabi::DEFAULT_DEPTH)]
    depth: usize,
    /// Inclusive range `A..B` or a comma list.
    #[arg(long, default_value = "0..6")]
    levels: String,
    /// Per-level window `LEVEL:T_MIN:T_MAX`; repeatable.
    #[arg(long = "window")]
    windows: Vec<String>,
    #[arg(long, default_value_t = 100)]
    samples_per_period: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct VerifyArgs {
    /// Shrink the parameter grids.
    #[arg(long)]
    quick: bool,
    /// Run only the named suites; repeatable.
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[arg(long, hide = true, value_name = "SUITE")]
    inject_fault: Option<String>,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Core(Error),
    Io(std::io::Error),
    Unconverged(String),
    VerifyFailed(Vec<String>),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Unconverged(_) => EXIT_UNCONVERGED,
            CliError::VerifyFailed(_) => EXIT_VERIFY,
            CliError::Core(e) => match e.root() {
                Error::ResourceLimit(_) => EXIT_RESOURCE,
                Error::Unconverged { .. } | Error::NonFinite { .. } => EXIT_UNCONVERGED,
                _ => EXIT_USAGE,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Unconverged(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::VerifyFailed(names) => write!(f, "failed suites: {}", names.join(", ")),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub(crate) type CliResult<T> = std::result::Result<T, CliError>;

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = match config::expand(args.into_iter().map(Into::into).collect()) {
        Ok(argv) => argv,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Splitter(a) => commands::splitter(&a, stdout),
        Command::RabiTrace(a) => commands::rabi_trace(&a, stdout),
        Command::Fit(a) => commands::fit(&a, stdout),
        Command::Eid(a) => commands::eid(&a, stdout, stderr),
        Command::Verify(a) => commands::verify(&a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
