//! Command-line surface of `wfh-sim`. [`run`] executes one invocation
//! in-process so the binary and the tests share a single code path.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use commands::Outcome;

pub const JOBS_ENV: &str = "WFH_SIM_JOBS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] wfh_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Core(e) => e.code(),
            Self::Io { .. } => "io_error",
            Self::Usage(_) => "usage_error",
        }
    }

    /// Single-line JSON for the diagnostic stream.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            code: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper { error: Body { code: self.code(), message: self.to_string() } })
            .expect("error serializes")
    }
}

pub(crate) fn io_err(path: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Lossless detectors, perfect heralding and mode overlap.
    Ideal,
    /// Calibrated experimental parameters.
    Table1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shift {
    CountingDifference,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefModel {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    LogLinear,
    GaussNewton,
}

#[derive(Debug, Parser)]
#[command(name = "wfh-sim", version, about = "Weak-field homodyne detection models and analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Parameter preset; overrides the parameters of --config.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (the WFH_SIM_JOBS environment variable takes precedence).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file for single-table commands (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output directory for multi-file commands.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub shift_convention: Option<Shift>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantum photon-number difference distribution.
    ModelQuantum {
        #[arg(long)]
        j: u32,
        #[arg(long)]
        alpha_sq: f64,
    },
    /// Classical-field approximation of the difference distribution.
    ModelClassical {
        #[arg(long)]
        j: u32,
        #[arg(long)]
        alpha_sq: f64,
    },
    /// Residual metric against a reference model over an |alpha|^2 grid.
    TransitionScan {
        #[arg(long)]
        j: u32,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Measured difference distributions, one per grid point.
        #[arg(long, value_delimiter = ',')]
        observed: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "classical")]
        reference: RefModel,
    },
    /// Exponential fit of a transition scan and the threshold |alpha|^2.
    FitAlphaMin {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        lower_cut: Option<f64>,
        #[arg(long, value_enum, default_value = "log-linear")]
        method: Method,
    },
    /// Threshold |alpha|^2 for several herald outcomes and its linear fit
    /// against the signal mean photon number.
    Scaling {
        #[arg(long, value_delimiter = ',')]
        js: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        lower_cut: Option<f64>,
    },
    /// Submultinomial and sub-Poissonian witnesses per herald outcome.
    Nonclassicality {
        #[arg(long)]
        tally: PathBuf,
        #[arg(long)]
        max_outcome: Option<u32>,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Expectation-valued event tally from the quantum model.
    ModelTally {
        #[arg(long, value_delimiter = ',')]
        js: Vec<u32>,
        #[arg(long, default_value_t = 0.0)]
        alpha_sq: f64,
        #[arg(long, default_value_t = 1e6)]
        events: f64,
        #[arg(long)]
        max_outcome: Option<u32>,
    },
    /// Herald-mode state conditioned on a homodyne outcome.
    Engineer {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        alpha_sq: f64,
        #[arg(long)]
        no_interference: bool,
    },
    /// Efficiencies, squeezing and coherent-state strength from counts.
    Calibrate {
        #[arg(long)]
        counts: PathBuf,
    },
    /// Photon-number, quadrature and Wigner tables of the heralded signal.
    States {
        #[arg(long)]
        j: u32,
        /// Wigner grid as `min,max,points` on both axes.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        wigner_grid: Option<Vec<f64>>,
        /// Quadrature grid as `min,max,points`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        quadrature_grid: Option<Vec<f64>>,
    },
    /// Photon-number labels from detector pulse energies.
    BinPulses {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        max_outcome: Option<u32>,
    },
    /// Residual metric between two difference distributions.
    ResidualMetric {
        #[arg(long)]
        observed: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

/// Worker count: environment variable, then `--jobs`, then all cores.
pub fn resolve_jobs(flag: Option<usize>) -> Result<usize, CliError> {
    if let Ok(v) = std::env::var(JOBS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{JOBS_ENV} must be a positive integer, got {v:?}"))),
        };
    }
    match flag {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing stdout-bound output to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send)) -> Result<Outcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    execute(&cli, stdout)
}

pub fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<Outcome, CliError> {
    let jobs = resolve_jobs(cli.global.jobs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| commands::dispatch(cli, stdout))
}
