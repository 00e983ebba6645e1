//! Command-line front-end for the document-linking pipeline.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 backend
//! error. Messages go to standard error.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use udl_core::{ErrorClass, UdlError};

pub use config::ConfigFile;

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.class)
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Data => 2,
        ErrorClass::Backend => 3,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<UdlError> for CliError {
    fn from(e: UdlError) -> Self {
        CliError {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "udl",
    version,
    about = "Link similar documents before synthetic query generation"
)]
pub struct Cli {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    pub log_level: Option<String>,

    /// Base URL of the model adapter for remote backends.
    #[arg(long, global = true, env = "UDL_ADAPTER_URL")]
    pub adapter_url: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Term-entropy report and similarity-model decision.
    Analyze(AnalyzeArgs),
    /// Link documents and write the decision report, link set and units.
    Link(LinkArgs),
    /// Turn merged units into generation requests, optionally generating queries.
    ExportUnits(ExportArgs),
    /// Join generated queries with their units into training pairs.
    ImportQueries(ImportArgs),
    /// Compare synthetic queries with real training queries.
    Quality(QualityArgs),
    /// Rank corpus documents for each query and write a TREC run.
    Rank(RankArgs),
    /// NDCG@k and Recall@k of a TREC run.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub doc_cap: Option<usize>,
    /// Number of highest and lowest entropy terms to list.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub doc_cap: Option<usize>,
    /// concatenation or random-permutation.
    #[arg(long)]
    pub merge: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_queries: Option<usize>,
    #[arg(long)]
    pub v_general: Option<u64>,
    #[arg(long)]
    pub v_specialized: Option<u64>,
    #[arg(long)]
    pub general_gazetteer: Option<PathBuf>,
    #[arg(long)]
    pub specialized_gazetteer: Option<PathBuf>,
    /// gazetteer or remote.
    #[arg(long)]
    pub ner_backend: Option<String>,
    /// Precomputed embeddings used when semantic similarity is selected.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// none, file or remote.
    #[arg(long)]
    pub embed_backend: Option<String>,
    /// Leave documents whose translation fails out of keyword counting.
    #[arg(long)]
    pub skip_translation_failures: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Units file written by `link`.
    #[arg(long)]
    pub units: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_queries: Option<usize>,
    /// Also generate queries: stub or remote.
    #[arg(long)]
    pub generate: Option<String>,
    /// Where generated queries go (required with --generate).
    #[arg(long)]
    pub queries_out: Option<PathBuf>,
    /// Tokens per stub query.
    #[arg(long, default_value_t = 8)]
    pub stub_tokens: usize,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Generation units written by `export-units`.
    #[arg(long)]
    pub units: PathBuf,
    /// Generated queries, one `{"query_id","unit_id","text"}` per line.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QualityArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub train_queries: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Training pairs written by `import-queries`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Embeddings covering documents and queries; TF-IDF when absent.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Embeddings covering documents and queries; TF-IDF when absent.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, default_value = "udl")]
    pub tag: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Comma-separated cutoffs.
    #[arg(long, default_value = "1,10,100")]
    pub k: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
