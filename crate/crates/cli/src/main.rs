//! `nudgelab`: run the service, seed the corpus, simulate cohorts and
//! analyse exported data.
//!
//! Exit status: 0 success, 1 usage error, 2 validation error, 3 I/O error,
//! 4 audit violations found.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod participants;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "nudgelab", version, about = "Nudge experiment service and analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the HTTP API until interrupted.
    Serve(ServeArgs),
    /// Load the intervention message corpus into a store.
    SeedCorpus(SeedCorpusArgs),
    /// Drive a synthetic cohort through an in-process service.
    Simulate(SimulateArgs),
    /// Run the analysis pipeline over an event export or group summaries.
    Report(ReportArgs),
    /// Write a store's events as CSV.
    Export(ExportArgs),
    /// Score a survey file and check scale reliability.
    SurveyScore(SurveyScoreArgs),
    /// Re-check the intervention policy over a store or an export.
    Audit(AuditArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Service config file (TOML). NUDGELAB_* variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Listen address, overriding config and environment.
    #[arg(long)]
    pub bind: Option<String>,
    /// SQLite store, overriding config and environment.
    #[arg(long)]
    pub database: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SeedCorpusArgs {
    #[arg(long)]
    pub database: PathBuf,
    /// Corpus CSV; the bundled corpus when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Cohort config (TOML); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Policy config (TOML). Its rng_seed defaults to the cohort seed.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_group1: Option<usize>,
    #[arg(long)]
    pub n_group2: Option<usize>,
    #[arg(long)]
    pub days: Option<u32>,
    /// Mean share attempts per user-day.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Also replay the request log with this fraction of duplicated
    /// submissions and check the resulting store matches.
    #[arg(long, default_value_t = 0.0)]
    pub duplicates: f64,
    /// Keep the store in this file instead of in memory.
    #[arg(long)]
    pub database: Option<PathBuf>,
    /// Directory for manifest.json, events.csv, participants.csv and
    /// requests.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Event export (CSV).
    #[arg(long, conflicts_with = "summary", required_unless_present = "summary")]
    pub events: Option<PathBuf>,
    /// Survey responses (CSV); adds the construct comparisons.
    #[arg(long, requires = "events")]
    pub survey: Option<PathBuf>,
    /// Participant list (user_id,app_variant) so users without events count.
    #[arg(long, requires = "events")]
    pub participants: Option<PathBuf>,
    /// Per-group descriptives (variable,group,n,mean,sd) instead of events.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Experiment length, for the exposure ratio.
    #[arg(long, default_value_t = 7)]
    pub days: u32,
    #[arg(long, default_value_t = 5)]
    pub max_per_day: u32,
    /// Minutes within which a share counts as the retry of an edit.
    #[arg(long, default_value_t = 30)]
    pub pairing_window: i64,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub database: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SurveyScoreArgs {
    #[arg(long)]
    pub survey: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Audit a store: pop-up tokens and events.
    #[arg(long, conflicts_with = "events", required_unless_present = "events")]
    pub database: Option<PathBuf>,
    /// Audit an event export.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Policy config (TOML); defaults when omitted.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return CliError::Usage(String::new()).exit_code();
        }
    };
    let result = match cli.command {
        Command::Serve(a) => commands::serve(a),
        Command::SeedCorpus(a) => commands::seed_corpus(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Report(a) => commands::report(a),
        Command::Export(a) => commands::export(a),
        Command::SurveyScore(a) => commands::survey_score(a),
        Command::Audit(a) => commands::audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nudgelab: {e}");
            e.exit_code()
        }
    }
}
