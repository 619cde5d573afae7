//! `rpt`: reaction-prediction pre-training of a SMILES transformer, with
//! fine-tuning, paired cross-validation comparison, and SMILES utilities.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{Precision, RunConfig};

/// Errors split by exit code: user and configuration problems exit 1,
/// internal invariant violations exit 2.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn user(msg: impl std::fmt::Display) -> Self {
        CliError::User(msg.to_string())
    }

    pub fn internal(msg: impl std::fmt::Display) -> Self {
        CliError::Internal(msg.to_string())
    }

    /// Classifies a training error: non-finite numerics are internal,
    /// everything else is a user or data problem.
    pub fn from_train(e: rpt_core::train::TrainError) -> Self {
        use rpt_core::train::TrainError;
        match &e {
            TrainError::NonFiniteLoss { .. } => CliError::internal(e),
            TrainError::Nn(inner) => Self::from_nn_ref(inner, e.to_string()),
            _ => CliError::user(e),
        }
    }

    pub fn from_eval(e: rpt_core::eval::EvalError) -> Self {
        use rpt_core::eval::EvalError;
        match e {
            EvalError::Train(inner) => Self::from_train(inner),
            other => CliError::user(other),
        }
    }

    fn from_nn_ref(e: &rpt_core::nn::NnError, rendered: String) -> Self {
        use rpt_core::nn::NnError;
        match e {
            NnError::NonFiniteGradient { .. } | NnError::NonFinite { .. } => {
                CliError::Internal(rendered)
            }
            _ => CliError::User(rendered),
        }
    }
}

impl<E: std::fmt::Display> From<E> for CliError
where
    E: Into<std::io::Error>,
{
    fn from(e: E) -> Self {
        CliError::user(e)
    }
}

#[derive(Parser)]
#[command(name = "rpt", version, about = "Reaction-prediction pre-training for SMILES transformers")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fold-count override for cross-validation.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Validate the configuration and print its resolved form, then exit.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "rpt-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train on a reaction corpus.
    Pretrain,
    /// Fine-tune on one property dataset (rotation 0 of the fold plan).
    Finetune {
        /// Dataset name from the config's data section.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Cross-validate a single arm over every rotation.
    Crossval {
        #[arg(long)]
        dataset: Option<String>,
        /// Initialize from the configured pre-trained checkpoint.
        #[arg(long)]
        pretrained: bool,
    },
    /// Paired comparison of pre-trained vs randomly initialized models.
    Compare,
    /// Line-oriented SMILES utilities (stdin to stdout).
    Smiles {
        #[command(subcommand)]
        tool: SmilesTool,
    },
}

#[derive(Subcommand)]
pub(crate) enum SmilesTool {
    /// Emit the canonical form of each input SMILES.
    Canonicalize,
    /// Emit a seeded random linearization of each input SMILES.
    Randomize,
    /// Emit space-separated ASCII token ids of each input line.
    Tokenize,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(folds) = cli.folds {
        config.stats.n_folds = folds;
    }
    config.validate()?;

    if cli.dry_run {
        println!("{}", config.resolved_json());
        eprintln!("config_hash {}", config.hash());
        return Ok(());
    }

    match cli.command {
        Command::Pretrain => commands::pretrain::run(&config, &cli.out_dir),
        Command::Finetune { dataset } => {
            commands::finetune::run(&config, dataset.as_deref(), &cli.out_dir)
        }
        Command::Crossval { dataset, pretrained } => {
            commands::crossval::run(&config, dataset.as_deref(), pretrained, &cli.out_dir)
        }
        Command::Compare => commands::compare::run(&config, &cli.out_dir),
        Command::Smiles { tool } => commands::smiles::run(&config, &tool),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli)));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CliError::User(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(CliError::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            eprintln!("internal error: invariant violated: {msg}");
            ExitCode::from(2)
        }
    }
}
