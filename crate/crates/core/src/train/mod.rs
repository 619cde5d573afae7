//! Pre-training and fine-tuning loops.
//!
//! All randomness derives from `(root seed, purpose tag, index)` through
//! [`crate::subseed`], so runs are bit-reproducible in 64-bit mode and a
//! checkpoint saved at an epoch boundary resumes to the same final
//! parameters as an uninterrupted run.

mod config;
mod finetune;
mod pretrain;
mod runlog;
mod schedule;

pub use config::{FinetuneConfig, LrSearchConfig, PretrainConfig};
pub use finetune::{
    finetune, lr_search, lr_search_with, prepare_examples, sample_lrs, EarlyStopMetric,
    FinetuneOutput, InitSpec,
};
pub use pretrain::{pretrain, PretrainOutput, PretrainRun};
pub use runlog::{EventKind, LogEvent, RunLog};
pub use schedule::{cosine_cyclic_lr, EarlyStopper, StopDecision};

use crate::data::DataError;
use crate::model::ModelError;
use crate::nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("bad training config: {0}")]
    Config(String),
    #[error("non-finite loss at step {step}; offending reaction ids {reaction_ids:?}")]
    NonFiniteLoss { step: u64, reaction_ids: Vec<usize> },
    #[error("metric: {0}")]
    Metric(String),
    #[error("checkpoint write: {0}")]
    Sink(String),
}
