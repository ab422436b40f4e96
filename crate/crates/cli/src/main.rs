mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

/// Parallel coordinate descent: instance generation, certificate analysis,
/// solving and the sampling and speedup experiments.
#[derive(Debug, Parser)]
#[command(name = "pcdm", version)]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel solving and Monte-Carlo validation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; reports go to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated instance in the pcdm-instance v1 format.
    Generate(GenerateArgs),
    /// Certificate table: E|S|, beta, w summary and speedup per law.
    Analyze(AnalyzeArgs),
    /// Run PCDM1 or PCDM2 on an instance.
    Solve(SolveArgs),
    /// Monte-Carlo check of the ESO inequality.
    ValidateEso(ValidateArgs),
    /// Empirical inclusion, cardinality and pair frequencies of a law.
    SamplingStats(StatsArgs),
    /// Serial versus tau-nice iteration counts on equal-row problems.
    BenchSpeedup(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// LASSO with a planted optimum.
    Lasso,
    /// 0-1 matrix with equal row and column counts.
    Tight,
    /// Equal-valued rows with exactly omega nonzeros, consistent targets.
    Eqrow,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Columns (blocks).
    #[arg(long)]
    pub n: usize,
    /// Rows.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 20)]
    pub nnz_per_col: usize,
    #[arg(long, default_value_t = 10)]
    pub support: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Nonzeros per row for `tight` and `eqrow`.
    #[arg(long, default_value_t = 5)]
    pub omega: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Loss {
    Square,
    Logistic,
    /// Hinge-loss SVM dual on the examples of the dataset.
    SvmDual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reg {
    Zero,
    L1,
    L2,
}

/// Where the problem comes from.
#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// pcdm-instance v1 file, solved as LASSO.
    #[arg(long, conflicts_with = "libsvm")]
    pub instance: Option<PathBuf>,
    /// LIBSVM dataset.
    #[arg(long)]
    pub libsvm: Option<PathBuf>,
    /// Loss for LIBSVM input.
    #[arg(long, value_enum, default_value_t = Loss::Square, requires = "libsvm")]
    pub loss: Loss,
    /// Regulariser for LIBSVM input (the SVM dual always uses [0, 1]).
    #[arg(long, value_enum, default_value_t = Reg::L1, requires = "libsvm")]
    pub reg: Reg,
    /// Regularisation weight for LIBSVM input.
    #[arg(long, default_value_t = 1.0, requires = "libsvm")]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Block count for analysis from metadata only (unit Lipschitz constants).
    #[arg(long, requires = "omega", conflicts_with_all = ["instance", "libsvm"])]
    pub n: Option<usize>,
    /// Degree of partial separability for metadata-only analysis.
    #[arg(long, requires = "n")]
    pub omega: Option<usize>,
    /// Sampling law, repeatable: serial, full, nice:T, indep:T, binom:T:P,
    /// nu:FILE, du:FILE.
    #[arg(long = "law", default_values_t = ["serial".to_string(), "full".to_string()])]
    pub laws: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sim,
    Par,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "serial")]
    pub law: String,
    #[arg(long, default_value = "pcdm1")]
    pub variant: String,
    #[arg(long, value_enum, default_value_t = Mode::Sim)]
    pub mode: Mode,
    /// Stop once F - F* drops to this value.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Optimal value, overriding the one stored in the instance.
    #[arg(long)]
    pub f_star: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: u64,
    #[arg(long)]
    pub max_epochs: Option<f64>,
    /// Trace CSV path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub trace_every: u64,
    /// File for the final iterate, one value per line.
    #[arg(long)]
    pub x_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long = "law", required = true)]
    pub laws: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
    /// Multiply the computed beta by this factor before testing.
    #[arg(long, default_value_t = 1.0)]
    pub beta_scale: f64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub law: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    /// Number of random pairs (i, j) whose joint frequency is reported.
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 3000)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 50, 100])]
    pub omegas: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8, 16, 32, 64])]
    pub taus: Vec<usize>,
    /// Target `F(x) <= eps F(0)`.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Solver seeds averaged per iteration count.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, default_value_t = 10_000.0)]
    pub max_epochs: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
