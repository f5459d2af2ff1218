//! Command-line driver: ingest, segment, prompt, analyze, parse and
//! evaluate, plus synthetic data, rule ablation and cost reports.

mod commands;
pub mod pipeline;
pub mod settings;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    Partial = 2,
    Failed = 3,
}

impl Status {
    pub fn from_counts(failed: usize, total: usize) -> Status {
        match failed {
            0 => Status::Success,
            f if f < total => Status::Partial,
            _ => Status::Failed,
        }
    }
}

/// A problem with the command line or a configuration file.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "spade", version, about = "Soil-moisture irrigation and anomaly analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    LocalRules,
    Remote,
}

impl From<BackendArg> for spade_gateway::BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::LocalRules => spade_gateway::BackendKind::LocalRules,
            BackendArg::Remote => spade_gateway::BackendKind::RemoteHttp,
        }
    }
}

/// Flags shared by the commands that run the analysis pipeline.
#[derive(Args, Debug, Clone, Default)]
pub struct PipelineArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// `key=value` file with backend, detector and segmentation settings.
    /// Flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub window_days: Option<u32>,
    /// Token budget per segment.
    #[arg(long, value_name = "N")]
    pub budget: Option<usize>,
    /// Detector parameter file (`key=value`).
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Prompt rule template.
    #[arg(long, value_name = "FILE")]
    pub rules: Option<PathBuf>,
    /// Leave a rule out of the prompt, e.g. `domain.2`. Repeatable.
    #[arg(long, value_name = "RULE_ID")]
    pub disable: Vec<String>,
    /// Rules whose absence from the prompt makes the local backend report
    /// irrigation rises as anomalies. Repeatable; defaults to domain.2 and
    /// anomaly.7.
    #[arg(long, value_name = "RULE_ID")]
    pub no_suppression_map: Vec<String>,
    /// Write prompts and a cost estimate without calling the backend.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analyze CSV series and write one report per segment.
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Score report files against truth files with the same basenames.
    Evaluate {
        reports: PathBuf,
        truth: PathBuf,
        /// Matching tolerance, e.g. `1h` or `30m`.
        #[arg(long, value_name = "DURATION")]
        tolerance: Option<String>,
        /// Evaluation JSON; per-segment tallies go next to it.
        #[arg(long, default_value = "evaluation.json")]
        out: PathBuf,
        /// Only list the report/truth pairs.
        #[arg(long)]
        list: bool,
    },
    /// Generate synthetic series with labels.
    Synth {
        /// Scenario file (`key=value`).
        spec: Option<PathBuf>,
        /// Generate the 100-segment standard corpus instead of one scenario.
        #[arg(long, conflicts_with = "spec")]
        standard_corpus: bool,
        /// Overrides the scenario seed; for the standard corpus, the first seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = spade_core::segment::DEFAULT_WINDOW_DAYS)]
        window_days: u32,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
    /// Run each segment with all rules and with the `--disable` rules off.
    Ablate {
        input: PathBuf,
        #[arg(long, default_value = "ablation")]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Sum a usage log.
    Cost {
        log: PathBuf,
        /// Recompute costs from token counts at these prices.
        #[arg(long)]
        reprice: bool,
        #[arg(long, value_name = "USD_PER_M")]
        price_in: Option<f64>,
        #[arg(long, value_name = "USD_PER_M")]
        price_out: Option<f64>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Usage as i32 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(status) => status as i32,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                Status::Usage as i32
            } else {
                Status::Failed as i32
            }
        }
    }
}
