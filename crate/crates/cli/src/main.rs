//! `sushi`: generate, solve, diagnose and benchmark M-NAREs from the shell.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::{CliError, Format};

#[derive(Parser, Debug)]
#[command(name = "sushi", version, about = "Solvers for nonsymmetric algebraic Riccati equations of M-matrix type")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a benchmark problem and write it as JSON or a Matrix Market bundle.
    Gen(GenArgs),
    /// Solve with the structured doubling algorithm.
    Solve(SolveArgs),
    /// Solve with the subspace shift followed by doubling.
    Sushi(SolveArgs),
    /// Report gap, Cayley gap, sep and related separation measures.
    Diagnose(DiagnoseArgs),
    /// Run SDA and SuShi over a parameter grid and tabulate the results.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Transport,
    Random,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum QuadratureArg {
    /// n/4 panels of 4-point Gauss-Legendre
    Composite4,
    /// one n-point Gauss-Legendre rule
    GaussLegendre,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenFormat {
    Json,
    Mm,
}

/// Where the problem comes from: a file, or a generator spec.
#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// JSON envelope file or directory holding A.mtx, B.mtx, C.mtx, D.mtx
    #[arg(long, short, conflicts_with = "family", required_unless_present = "family")]
    pub input: Option<PathBuf>,
    /// Generate the problem instead of loading it
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Transport only: sets (alpha, c) = (beta, 1 - beta)
    #[arg(long, conflicts_with_all = ["alpha", "c"])]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Transport only
    #[arg(long)]
    pub c: Option<f64>,
    /// Random only
    #[arg(long)]
    pub seed: Option<u64>,
    /// Transport only
    #[arg(long, value_enum, default_value = "composite4")]
    pub quadrature: QuadratureArg,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Stopping tolerance on the relative change of the iterate
    #[arg(long, default_value_t = 1e-15)]
    pub tol: f64,
    #[arg(long, default_value_t = 60)]
    pub max_steps: usize,
    /// Cayley parameter (defaults to the largest diagonal entry of A and D)
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1e13)]
    pub breakdown_threshold: f64,
    /// Skip the M-matrix check
    #[arg(long)]
    pub force: bool,
    /// Write one JSON line per doubling step to standard error
    #[arg(long)]
    pub trace: bool,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: GenFormat,
    /// Output file (json, default standard output) or directory (mm, required)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Dimension of the central subspace (sushi only; adaptive when absent)
    #[arg(long)]
    pub k: Option<usize>,
    /// Shift parameter (sushi only; modulus rule when absent)
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Also write the computed solution X as a Matrix Market file
    #[arg(long)]
    pub save_x: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Dimension of the central subspace
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Problem sizes
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Transport parameters
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-6, 1e-12])]
    pub beta: Vec<f64>,
    /// Random-family parameters
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3])]
    pub alpha: Vec<f64>,
    /// Random-family seeds
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    /// Worker threads (defaults to the number of cores)
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let err = CliError::usage(text.trim_start_matches("error: ").trim_end());
            return output::report_error(&err, output::json_requested());
        }
    };
    let (result, json) = match cli.command {
        Command::Gen(a) => {
            let json = a.format == GenFormat::Json;
            (commands::gen(&a), json)
        }
        Command::Solve(a) => {
            let json = a.format == Format::Json;
            (commands::solve(&a), json)
        }
        Command::Sushi(a) => {
            let json = a.format == Format::Json;
            (commands::sushi(&a), json)
        }
        Command::Diagnose(a) => {
            let json = a.format == Format::Json;
            (commands::diagnose(&a), json)
        }
        Command::Bench(a) => {
            let json = a.format == Format::Json;
            (commands::bench(&a), json)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => output::report_error(&e, json),
    }
}
