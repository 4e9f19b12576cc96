use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fsva", version, about = "Frozen surrogate variable analysis for single-sample prediction")]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Delimiter for matrix and label files that are written.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,

    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Csv,
}

impl Format {
    pub fn delimiter(self) -> fsva::io::Delimiter {
        match self {
            Format::Tsv => fsva::io::Delimiter::Tab,
            Format::Csv => fsva::io::Delimiter::Comma,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Tsv => "tsv",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    Variance,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Fast,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a database and a set of new samples.
    Simulate(SimulateArgs),
    /// Fit SVA on a labelled database and train the classifier.
    Train(TrainArgs),
    /// Correct new samples with a frozen model.
    Correct(CorrectArgs),
    /// Correct new samples and classify them.
    Predict(PredictArgs),
    /// Simulation sweep over confounding levels.
    Sweep(SweepArgs),
    /// Repeated database/new-sample splits of one study.
    SplitEval(SplitEvalArgs),
    /// Time exact against fast correction.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Built-in scenario (1, 2 or 3).
    #[arg(long, default_value_t = 1)]
    pub scenario: usize,

    /// Number of features (defaults to the scenario's).
    #[arg(long)]
    pub m: Option<usize>,

    /// Database samples.
    #[arg(long)]
    pub n_db: Option<usize>,

    /// New samples.
    #[arg(long)]
    pub n_new: Option<usize>,

    /// Read the scenario's dispersions as variances or standard deviations.
    #[arg(long, value_enum, default_value_t = Convention::Variance)]
    pub convention: Convention,

    /// Raise an infeasible batch/outcome overlap instead of failing.
    #[arg(long)]
    pub raise_overlap: bool,

    /// Override the batch coefficient dispersion.
    #[arg(long)]
    pub gamma_dispersion: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Correlation between batch and outcome in the database.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SurrogateArgs {
    /// Use this many surrogates instead of estimating the number.
    #[arg(long)]
    pub num_sv: Option<usize>,

    /// Permutations for the estimate.
    #[arg(long, default_value_t = 20)]
    pub n_perm: usize,

    /// Significance level of the estimate.
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,

    /// Maximum weighting iterations.
    #[arg(long, default_value_t = 5)]
    pub max_iter: usize,

    /// Convergence threshold on the change in weights.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,

    /// Fixed classifier threshold (cross-validated when omitted).
    #[arg(long)]
    pub shrinkage: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Expression matrix, features by samples.
    #[arg(long)]
    pub expr: PathBuf,

    /// Outcome labels (sample_id, label).
    #[arg(long)]
    pub labels: PathBuf,

    #[command(flatten)]
    pub surrogates: SurrogateArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CorrectArgs {
    /// Frozen model written by `train`.
    #[arg(long)]
    pub model: PathBuf,

    /// New samples, features by samples.
    #[arg(long)]
    pub expr: PathBuf,

    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub correct: CorrectArgs,

    /// Classifier written by `train`.
    #[arg(long)]
    pub classifier: PathBuf,

    /// True labels; when given, accuracy is reported.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Replicates.
    #[arg(long, default_value_t = 25)]
    pub iterations: usize,

    /// Comma-separated subset of none, sva_db_only, fsva_exact, fsva_fast.
    #[arg(long, value_delimiter = ',', default_value = "none,sva_db_only,fsva_exact,fsva_fast")]
    pub methods: Vec<String>,

    #[command(flatten)]
    pub surrogates: SurrogateArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Comma-separated confounding levels.
    #[arg(long, value_delimiter = ',', default_value = "0,0.3,0.6,0.9")]
    pub rho: Vec<f64>,

    /// Full-size design: 10000 features and 100 iterations unless overridden.
    #[arg(long)]
    pub full_scale: bool,

    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SplitEvalArgs {
    #[arg(long)]
    pub expr: PathBuf,

    #[arg(long)]
    pub labels: PathBuf,

    /// Fraction of samples in the database half.
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,

    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Surrogates to fit.
    #[arg(long, default_value_t = 1)]
    pub num_sv: usize,
}
