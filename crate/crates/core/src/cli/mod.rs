//! Command-line front end: subcommand dispatch, snapshot ingestion, reports
//! and plot tables.
//!
//! Exit codes: 0 ok, 2 invariant-audit failure, 3 input error, 4 config error.

mod commands;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::axisym::AxisymError;
use crate::criticality::CriticalityError;
use crate::fields::snapshot::SnapshotError;
use crate::fields::FieldError;
use crate::flux::FluxError;
use crate::geometry::GeometryError;
use crate::solver::SolverError;

pub use commands::{ingest, Ingested};
pub use report::{AuditEntry, DiagnosticsReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Config(_) | CliError::Output(_) => EXIT_CONFIG,
        }
    }
}

fn field_kind(e: &FieldError) -> fn(String) -> CliError {
    match e {
        FieldError::InvalidParameter(_)
        | FieldError::RegionTooLarge { .. }
        | FieldError::OutsideCoverage { .. }
        | FieldError::InvalidGrid(_) => CliError::Config,
        _ => CliError::Input,
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        field_kind(&e)(e.to_string())
    }
}

impl From<SnapshotError> for CliError {
    fn from(e: SnapshotError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match &e {
            SolverError::Field(f) => field_kind(f)(e.to_string()),
            SolverError::NonZeroMean { .. } => CliError::Input(e.to_string()),
            SolverError::Sink(_) => CliError::Output(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FluxError> for CliError {
    fn from(e: FluxError) -> Self {
        match &e {
            FluxError::Field(f) => field_kind(f)(e.to_string()),
            FluxError::InvalidParameter(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<CriticalityError> for CliError {
    fn from(e: CriticalityError) -> Self {
        match &e {
            CriticalityError::Field(f) => field_kind(f)(e.to_string()),
            CriticalityError::InvalidParameter(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match &e {
            GeometryError::Field(f) => field_kind(f)(e.to_string()),
            GeometryError::Threshold(_) | GeometryError::Options(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AxisymError> for CliError {
    fn from(e: AxisymError) -> Self {
        match &e {
            AxisymError::Field(f) => field_kind(f)(e.to_string()),
            AxisymError::InvalidParameter(_) | AxisymError::OutOfDomain { .. } => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nsgeom", version, about = "Vorticity geometry and flux diagnostics for periodic Navier-Stokes fields")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "NSGEOM_THREADS")]
    pub threads: Option<usize>,
    /// Seed for every random choice; echoed in reports.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the spectral solver and write snapshots plus a run manifest.
    Simulate(SimulateArgs),
    /// All diagnostics on one series, in a single report.
    Diagnose(DiagnoseArgs),
    /// Fit the double cone to the vorticity directions of one snapshot.
    Cone(ConeArgs),
    /// Vorticity-flux audit table over dyadic radii.
    Flux(FluxArgs),
    /// Scale-invariant quantities over dyadic cylinders.
    #[command(name = "typeI")]
    TypeI(TypeIArgs),
    /// Axisymmetric decomposition, stream function and exploration trace.
    Axisym(AxisymArgs),
    /// Ingest snapshots and audit them.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Abc,
    Tg,
    Tg2d,
    /// Taylor-Green plus a seeded random perturbation.
    Perturbed,
    File,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value = "abc")]
    pub init: Init,
    /// Initial snapshot for `--init file`.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "t-end", default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long = "snap-every", default_value_t = 0.05)]
    pub snap_every: f64,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Relative size of the random modes for `--init perturbed`.
    #[arg(long, default_value_t = 0.1)]
    pub perturbation: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    /// Snapshot directory; without it the series is simulated first.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solve: SolveArgs,
    /// Cone threshold as a fraction of max |omega|.
    #[arg(long = "M", default_value_t = 0.5)]
    pub m: f64,
    /// Random probe points for the stretching factor.
    #[arg(long, default_value_t = 2)]
    pub probes: usize,
    #[arg(long, default_value_t = 3)]
    pub scales: usize,
    #[arg(long)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
    #[arg(long = "plot-dir")]
    #[serde(skip)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConeArgs {
    /// Snapshot file, or a directory whose last snapshot is used.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Threshold as a fraction of max |omega|.
    #[arg(long = "M", default_value_t = 0.5)]
    pub m: f64,
    /// Gap below which the direction set counts as obstructed.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
    #[arg(long = "plot-dir")]
    #[serde(skip)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FluxArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Largest disc radius.
    #[arg(long, default_value_t = 0.45)]
    pub a: f64,
    /// Dyadic levels below `a`.
    #[arg(long, default_value_t = 5)]
    pub scales: usize,
    /// Probe axis `x,y,z`; defaults to the node of largest |omega_3|.
    #[arg(long, value_parser = parse_vec3)]
    pub center: Option<[f64; 3]>,
    /// CSV table; the JSON report goes next to it with extension `.json`.
    #[arg(long)]
    #[serde(skip)]
    pub report: PathBuf,
    #[arg(long = "plot-dir")]
    #[serde(skip)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TypeIArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `grid:K` for K^3 cell centers, or `x,y,z;x,y,z;...`.
    #[arg(long, default_value = "grid:1")]
    pub centers: String,
    #[arg(long, default_value_t = 6)]
    pub scales: usize,
    #[arg(long, default_value_t = 1.8)]
    pub q: f64,
    /// Largest radius; defaults to what the data covers.
    #[arg(long = "r-max")]
    pub r_max: Option<f64>,
    /// Top of the cylinders; defaults to the last snapshot time.
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
    #[arg(long = "plot-dir")]
    #[serde(skip)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AxisymArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 11.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 11.0)]
    pub c2: f64,
    /// Start `r,z` of the exploration.
    #[arg(long, value_parser = parse_pair, default_value = "0.0005,0.0")]
    pub start: [f64; 2],
    /// Axis origin `x,y,z` (vertical axis); defaults to the box center.
    #[arg(long, value_parser = parse_vec3)]
    pub origin: Option<[f64; 3]>,
    #[arg(long = "r-max", default_value_t = 2e-3)]
    pub r_max: f64,
    #[arg(long, default_value_t = 41)]
    pub nr: usize,
    /// Heights span `[-z_half, z_half]` around the origin.
    #[arg(long = "z-half", default_value_t = 2e-3)]
    pub z_half: f64,
    #[arg(long, default_value_t = 41)]
    pub nz: usize,
    /// Cone check gap.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Cone check speed threshold.
    #[arg(long = "M", default_value_t = 0.0)]
    pub m: f64,
    /// Allowed angular deviation relative to the peak speed.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Allowed relative divergence per snapshot.
    #[arg(long = "div-tol", default_value_t = 1e-8)]
    pub div_tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_floats(s)?
        .try_into()
        .map_err(|_| format!("expected x,y,z, got `{s}`"))
}

pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_floats(s)?
        .try_into()
        .map_err(|_| format!("expected two comma-separated numbers, got `{s}`"))
}

/// Outcome of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub report: DiagnosticsReport,
    pub exit_code: i32,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let report = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, cli.seed)?,
        Command::Diagnose(a) => commands::diagnose(a, cli.seed)?,
        Command::Cone(a) => commands::cone(a, cli.seed)?,
        Command::Flux(a) => commands::flux(a, cli.seed)?,
        Command::TypeI(a) => commands::type_i(a, cli.seed)?,
        Command::Axisym(a) => commands::axisym(a, cli.seed)?,
        Command::Validate(a) => commands::validate(a, cli.seed)?,
    };
    let exit_code = if report.pass { EXIT_OK } else { EXIT_AUDIT };
    Ok(Outcome { report, exit_code })
}

/// Parses `args` (program name first), runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(o) => {
            if o.exit_code != EXIT_OK {
                eprintln!("nsgeom: invariant audit failed");
                for a in o.report.audits.iter().filter(|a| !a.pass) {
                    eprintln!("  {}: {:e} (tolerance {:e}) {}", a.name, a.value, a.tolerance, a.detail);
                }
            }
            o.exit_code
        }
        Err(e) => {
            eprintln!("nsgeom: {e}");
            e.exit_code()
        }
    }
}
