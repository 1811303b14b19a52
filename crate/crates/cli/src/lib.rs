//! `recos` command-line runner for the RECOS experiments.
//!
//! Exit codes: 0 success, 2 config or range error, 3 data or I/O error,
//! 4 a checked equivalence was violated.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult, EXIT_ASSERTION, EXIT_CONFIG, EXIT_DATA, EXIT_OK};
pub use report::ExperimentReport;

#[derive(Debug, Parser)]
#[command(name = "recos", version, about = "RECOS experiments on LeNet-5 and MNIST")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Train LeNet-5 and score the test set.
    Train,
    /// Score a checkpoint on the clean, reversed or background test set.
    Eval,
    /// Original and sign-flipped networks on clean and reversed test images.
    ReversalStudy,
    /// Accuracy drop on background-composited digits, then retraining.
    BackgroundStudy,
    /// Compound anchor matrices of two cascaded layers.
    AnalyzeCascade,
    /// Per-channel response images of the first two conv layers.
    DumpResponses,
    /// Print and validate the AlexNet layer table.
    AlexnetSpec,
}

/// Flags override values from `--config`, which override defaults.
#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// Directory holding the MNIST IDX files [env: RECOS_DATA_DIR].
    #[arg(long, global = true)]
    pub data_dir: Option<String>,
    /// Plain-text `key = value` file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<String>,
    #[arg(long, global = true)]
    pub batch: Option<String>,
    #[arg(long, global = true)]
    pub lr: Option<String>,
    #[arg(long, global = true)]
    pub momentum: Option<String>,
    /// relu, sigmoid, leaky_relu or leaky_relu:<slope>.
    #[arg(long, global = true)]
    pub activation: Option<String>,
    /// average or max.
    #[arg(long, global = true)]
    pub pooling: Option<String>,
    /// Evaluate sequentially (results are identical either way).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<String>,
    #[arg(long, global = true)]
    pub out_dir: Option<String>,
    /// Checkpoint to read; `train` writes here instead of <out-dir>/lenet.ckpt.
    #[arg(long, global = true)]
    pub checkpoint: Option<String>,
    /// Use only the first N training images.
    #[arg(long, global = true)]
    pub train_limit: Option<String>,
    /// Use only the first N test images.
    #[arg(long, global = true)]
    pub test_limit: Option<String>,
    /// clean, reversed or background (eval).
    #[arg(long, global = true)]
    pub eval_set: Option<String>,
    /// Test image to dump (dump-responses).
    #[arg(long, global = true)]
    pub image_index: Option<String>,
    /// prepool or postpool (dump-responses).
    #[arg(long, global = true)]
    pub stage: Option<String>,
    /// Random anchor matrices instead of a checkpoint (analyze-cascade).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub synthetic: Option<String>,
    /// N,K,L of the synthetic matrices.
    #[arg(long, global = true)]
    pub dims: Option<String>,
    /// Synthetic A is the identity (needs N == K).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub identity_a: Option<String>,
    /// Inputs averaged into the agreement fraction.
    #[arg(long, global = true)]
    pub cascade_samples: Option<String>,
    /// Number of background textures, 0 to 10.
    #[arg(long, global = true)]
    pub textures: Option<String>,
    #[arg(long, global = true)]
    pub background_seed: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("data_dir", &self.data_dir),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("batch", &self.batch),
            ("lr", &self.lr),
            ("momentum", &self.momentum),
            ("activation", &self.activation),
            ("pooling", &self.pooling),
            ("deterministic", &self.deterministic),
            ("out_dir", &self.out_dir),
            ("checkpoint", &self.checkpoint),
            ("train_limit", &self.train_limit),
            ("test_limit", &self.test_limit),
            ("eval_set", &self.eval_set),
            ("image_index", &self.image_index),
            ("stage", &self.stage),
            ("synthetic", &self.synthetic),
            ("dims", &self.dims),
            ("identity_a", &self.identity_a),
            ("cascade_samples", &self.cascade_samples),
            ("textures", &self.textures),
            ("background_seed", &self.background_seed),
        ]
    }

    /// Defaults, then `RECOS_DATA_DIR`, then the config file, then flags.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::from_env();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn execute(command: Command, cfg: &RunConfig) -> CliResult<ExperimentReport> {
    match command {
        Command::Train => commands::cmd_train(cfg),
        Command::Eval => commands::cmd_eval(cfg),
        Command::ReversalStudy => commands::cmd_reversal_study(cfg),
        Command::BackgroundStudy => commands::cmd_background_study(cfg),
        Command::AnalyzeCascade => commands::cmd_analyze_cascade(cfg),
        Command::DumpResponses => commands::cmd_dump_responses(cfg),
        Command::AlexnetSpec => commands::cmd_alexnet_spec(cfg),
    }
}

/// Runs one experiment, writes its report into the output directory and
/// returns the report. Violated assertions come back as an error after the
/// report is on disk.
pub fn run_experiment(command: Command, cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let start = Instant::now();
    let mut rep = execute(command, cfg)?;
    rep.wall_clock_seconds = start.elapsed().as_secs_f64();
    rep.write(&cfg.out_dir)?;
    print!("{}", rep.human_summary());
    let failed = rep.failed_assertions();
    if !failed.is_empty() {
        return Err(CliError::Assertion(failed.join(", ")));
    }
    Ok(rep)
}

/// Parses `args` (program name first) and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.exit_code() {
                0 => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let result = cli.flags.resolve().and_then(|cfg| run_experiment(cli.command, &cfg));
    match result {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("recos: {e}");
            e.exit_code()
        }
    }
}
