use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cuebench_core::report::ExportFormat;
use tracing_subscriber::EnvFilter;

mod commands;

#[derive(Parser)]
#[command(name = "cuebench", version, about = "Bias-sensitivity evaluation over paired dilemmas")]
struct Cli {
    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and verify every pair against its Horn-clause programs.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Assign quartile complexity tiers.
    Tier {
        #[arg(long)]
        dataset: PathBuf,
        /// Write the dataset back with tiers filled in.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the experiment grid described by a config.
    Run(RunArgs),
    /// Sensitivity tables, tests and (if configured) human-label statistics.
    Analyze(AnalyzeArgs),
    /// Lexicon feature rate ratios between sensitive and other responses.
    Lexicon(LexiconArgs),
    /// Corpus triage, cue extraction, alignment and prevalence.
    Mine(MineArgs),
    /// Re-export saved tables.
    Report {
        #[arg(long)]
        from: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical utilities.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Print the preset strategy registry as JSON.
    Presets,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Run the oracle checks.
    Selftest,
    /// Percentile bootstrap interval of the mean of the given values.
    Bootstrap {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Serve every call from the cache; a miss is an error.
    #[arg(long)]
    pub replay_only: bool,
    /// Continue an existing archive, skipping finished trials.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Archive directory; defaults to the config's output directory.
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Defaults to `<archive>/analysis`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Args)]
pub struct LexiconArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Strategy whose responses are coded.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Defaults to `<archive>/analysis`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct MineArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub replay_only: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_ansi(std::io::stderr().is_terminal()).with_target(false).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Validate { dataset } => commands::validate(&dataset),
        Command::Tier { dataset, output } => commands::tier(&dataset, output.as_deref()),
        Command::Run(args) => commands::run(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Lexicon(args) => commands::lexicon(&args),
        Command::Mine(args) => commands::mine(&args),
        Command::Report { from, format, out } => commands::report(&from, format, &out),
        Command::Stats { command: StatsCommand::Selftest } => commands::selftest(),
        Command::Stats { command: StatsCommand::Bootstrap { seed, resamples, values } } => {
            commands::bootstrap(&values, resamples, seed)
        }
        Command::Presets => commands::presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
