//! Differentiable numerical substrate: dense tensors, a reverse-mode tape,
//! transformer building blocks, softmax cross-entropy, the AdamW optimizer,
//! and the checkpoint container.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`). Determinism is a
//! design constraint: parameter maps iterate in sorted order, gradient
//! accumulation follows tape order, and all randomness comes from
//! caller-supplied generators, so identical seeds give bit-identical results
//! in 64-bit mode.

mod attention;
mod checkpoint;
pub mod gradcheck;
mod loss;
mod optim;
mod scalar;
mod tape;
mod tensor;

pub use attention::{
    multi_head_attention, multi_head_attention_with_weights, AttentionParams,
};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use loss::softmax_cross_entropy;
pub use optim::{clip_global_norm, AdamwConfig, ParameterSet};
pub use scalar::Scalar;
pub use tape::{AttnMask, Gradients, Tape, Var};
pub use tensor::{positional_encoding, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("model width {width} is not divisible by {heads} heads")]
    HeadsMismatch { width: usize, heads: usize },
    #[error("attention row {row} has every key masked")]
    FullyMaskedRow { row: usize },
    #[error("token id {id} is outside the vocabulary of size {vocab}")]
    TokenOutOfVocab { id: u16, vocab: usize },
    #[error("non-finite gradient for tensor '{name}'")]
    NonFiniteGradient { name: String },
    #[error("non-finite value in '{what}'")]
    NonFinite { what: String },
    #[error("unknown parameter '{name}'")]
    UnknownParameter { name: String },
    #[error("parameter '{name}' has shape {found:?}, expected {expected:?}")]
    ParameterShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
