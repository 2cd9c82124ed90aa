//! `physarum`: batch front-end for the Physarum LP dynamics.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use physarum::Method;

/// Exit code for a failed check (bound assertion or trajectory deviation).
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_STEP_COLLAPSE: u8 = 2;
/// Validation, parse, I/O and usage errors.
pub const EXIT_INVALID: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "physarum", version, about = "Integrate Physarum dynamics for LPs and check their guarantees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the dynamics and write a trace CSV and a summary JSON per instance.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Accuracy used for the bound times and the achieved time.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 100.0)]
        max_time: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Integrate to the guaranteed time for each eps and check the cost.
    VerifyBounds {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated accuracies.
        #[arg(long, value_delimiter = ',', default_value = "1,0.3,0.1")]
        eps: Vec<f64>,
    },
    /// Compare the dynamics with mirror descent on a unit-simplex instance.
    MdCompare {
        #[command(flatten)]
        run: RunArgs,
        /// Comparison horizon.
        #[arg(long, default_value_t = 20.0)]
        max_time: f64,
        /// Also write the Lyapunov trace here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the exact optimum from vertex enumeration as JSON.
    Oracle {
        #[arg(long, required = true)]
        instance: Vec<PathBuf>,
    },
    /// Write a seeded random instance and a strictly positive feasible start.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Kind::Network)]
        kind: Kind,
        /// Node limit for networks.
        #[arg(long, default_value_t = 4)]
        nodes: usize,
        /// Edge limit for networks; variable count otherwise.
        #[arg(long, default_value_t = 8)]
        edges: usize,
        /// Constraint rows for dense instances.
        #[arg(long, default_value_t = 2)]
        rows: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Network,
    Dense,
    Simplex,
}

/// Flags shared by the integrating subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Instance file; repeat to process several.
    #[arg(long, required = true)]
    pub instance: Vec<PathBuf>,
    /// Starting point: comma-separated values or `uniform`.
    #[arg(long, default_value = "uniform")]
    pub x0: String,
    #[arg(long, default_value = "rk4")]
    pub method: Method,
    /// Initial step size.
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    /// Local error tolerance of the adaptive stepper.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.1)]
    pub trace_interval: f64,
    /// Instances processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // keep exit code 2 for step collapse
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_INVALID);
        }
        Err(e) => e.exit(),
    };
    let code = match cli.command {
        Command::Solve { run, eps, max_time, out_dir } => commands::solve(&run, eps, max_time, &out_dir),
        Command::VerifyBounds { run, eps } => commands::verify_bounds(&run, &eps),
        Command::MdCompare { run, max_time, out_dir } => commands::md_compare(&run, max_time, out_dir.as_deref()),
        Command::Oracle { instance } => commands::oracle(&instance),
        Command::Generate { seed, kind, nodes, edges, rows, out_dir } => {
            commands::generate(seed, kind, nodes, edges, rows, &out_dir)
        }
    };
    ExitCode::from(code)
}
