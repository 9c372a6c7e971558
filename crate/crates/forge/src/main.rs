use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod report;

pub use report::ForgeError;

/// Gaussian stabilizer toolkit for GKP codes: group enumeration, Clifford
/// compilation, phase-space simulation, and logical benchmarking.
#[derive(Debug, Parser)]
#[command(name = "gkp-forge", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate the Gaussian stabilizer group of a lattice code.
    Group(GroupArgs),
    /// Compile a logical Clifford circuit into Gaussian operations.
    Compile(CompileArgs),
    /// Sample a Wigner section of a prepared logical state.
    Wigner(WignerArgs),
    /// Logical randomized benchmarking with decay-curve fits.
    Lrb(LrbArgs),
    /// Synthesize small-Big-small stabilization rounds.
    Sbs(SbsArgs),
}

#[derive(Debug, Args)]
struct GroupArgs {
    /// Built-in lattice name (`square`) or path to a lattice JSON file.
    #[arg(long)]
    lattice: String,
    /// Mode count for built-in lattice names.
    #[arg(long)]
    modes: Option<usize>,
    /// Also emit the deduplicated table of generator walks up to this length.
    #[arg(long)]
    walks: Option<usize>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path (default `<out>.manifest.json`; skipped for stdout).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompileArgs {
    /// Built-in lattice name (`square`) or path to a lattice JSON file.
    #[arg(long)]
    lattice: String,
    /// Mode count for built-in names (default: the circuit's qubit span).
    #[arg(long)]
    modes: Option<usize>,
    /// Circuit file: JSON list of {"gate": "H", "qubits": [0]}.
    #[arg(long)]
    circuit: PathBuf,
    /// Word-selection strategy per gate.
    #[arg(long, value_parser = ["constant", "random", "gs"])]
    kind: String,
    /// Walk-length bound for candidate implementations.
    #[arg(long, default_value_t = gkp_core::compiler::DEFAULT_WALK_LENGTH)]
    n: usize,
    /// Seed for the random-walk strategy (generated when omitted).
    #[arg(long)]
    seed: Option<u64>,
    /// Envelope parameter, one value or a comma list per mode.
    #[arg(long, default_value = "0.1")]
    epsilon: String,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path (default `<out>.manifest.json`; skipped for stdout).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WignerArgs {
    /// State spec file: {"lattice": ..., "logicals": [...], "gauge": [...]}.
    #[arg(long)]
    state: PathBuf,
    /// Envelope parameter, one value or a comma list per mode.
    #[arg(long, default_value = "0.1")]
    epsilon: String,
    /// Section grid as min:max:resolution.
    #[arg(long, default_value = "-4:4:400", allow_hyphen_values = true)]
    grid: String,
    /// Quadrature axes spanning the section, as `i,j` (default `0,N`).
    #[arg(long)]
    axes: Option<String>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path (default `<out>.manifest.json`; skipped for stdout).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LrbArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Decay-curve CSV path (kind,length,mean,stderr,n).
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides the config value (generated when both absent).
    #[arg(long)]
    seed: Option<u64>,
    /// Compare compilers over these loss strengths instead of one decay run.
    #[arg(long, value_name = "G1,G2,...")]
    sweep_gamma: Option<String>,
    /// Fit companion path (default `fits.json` beside the curve).
    #[arg(long)]
    fits: Option<PathBuf>,
    /// Optional envelope-metric companion CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Sampling threads (default: GKP_FORGE_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Manifest path (default `<out>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SbsArgs {
    /// Built-in lattice name (`square`) or path to a lattice JSON file.
    #[arg(long)]
    lattice: String,
    /// Mode count for built-in lattice names.
    #[arg(long)]
    modes: Option<usize>,
    /// Envelope parameter, one value or a comma list per mode.
    #[arg(long, default_value = "0.1")]
    epsilon: String,
    /// Envelope center, comma-separated quadrature values (default origin).
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    mu: String,
    /// Envelope frame: `identity`, `diag:a,b,...`, `shear:c`, or a JSON
    /// matrix file.
    #[arg(long = "M", default_value = "identity")]
    frame: String,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path (default `<out>.manifest.json`; skipped for stdout).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<(), ForgeError> {
    match cli.command {
        Command::Group(args) => commands::group::run(&args),
        Command::Compile(args) => commands::compile::run(&args),
        Command::Wigner(args) => commands::wigner::run(&args),
        Command::Lrb(args) => commands::lrb::run(&args),
        Command::Sbs(args) => commands::sbs::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code())
        }
    }
}
