use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "aqlmr",
    version,
    about = "Translate AQL structural aggregations into MapReduce jobs and run them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a chunked array and its metadata.
    GenData(GenDataArgs),
    /// Translate a query into a job parameter file.
    Translate(TranslateArgs),
    /// Execute a query or a job parameter file.
    Run(RunArgs),
    /// Run a query in both modes and compare results and counters.
    Bench(BenchArgs),
    /// Print the analyzed query and its plan.
    Explain(ExplainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Naive,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TypeArg {
    Float64,
    Int64,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Extents per dimension, e.g. 1024x1024.
    #[arg(long)]
    pub dims: String,
    /// Chunk shape, e.g. 128x128. Defaults to min(extent, 128) per dimension.
    #[arg(long)]
    pub chunk: Option<String>,
    /// constant:<value>, ramp, or uniform.
    #[arg(long, default_value = "uniform")]
    pub fill: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long = "type", value_enum, default_value_t = TypeArg::Float64)]
    pub element_type: TypeArg,
    #[arg(long, default_value = "Val")]
    pub attribute: String,
    /// Comma-separated dimension names. Defaults to x, y, z, w, d4, d5, ...
    #[arg(long)]
    pub dim_names: Option<String>,
    /// Start coordinate per dimension, e.g. -5x0. Defaults to 0.
    #[arg(long, allow_hyphen_values = true)]
    pub origin: Option<String>,
}

#[derive(Debug, Args)]
pub struct QuerySource {
    /// AQL query text.
    #[arg(long)]
    pub query: Option<String>,
    /// File holding the AQL query text.
    #[arg(long, conflicts_with = "query")]
    pub query_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub source: QuerySource,
    #[arg(long, default_value = ".")]
    pub data_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: QuerySource,
    /// Job parameter file written by `translate`.
    #[arg(long, conflicts_with_all = ["query", "query_file"])]
    pub config: Option<PathBuf>,
    /// Directory holding the arrays. With --config, defaults to the directory of array.path.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto, conflicts_with = "config")]
    pub mode: ModeArg,
    /// Overrides the worker count of a config file.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: QuerySource,
    #[arg(long, default_value = ".")]
    pub data_dir: PathBuf,
    /// Comma-separated worker counts.
    #[arg(long, default_value = "1")]
    pub workers_list: String,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub source: QuerySource,
    #[arg(long, default_value = ".")]
    pub data_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
}
