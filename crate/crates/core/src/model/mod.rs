//! The reaction-conditioned set-encoder transformer.
//!
//! Pre-training encodes every reactant and reagent fragment independently
//! (self-attention never crosses fragments), sums the per-fragment encodings
//! element-wise, and averages over the sequence axis to produce a single
//! reaction vector. That vector is the decoder's entire encoder-side memory:
//! one slot, so cross-attention weights are identically 1. Fine-tuning reuses
//! the encoder with mean pooling and a 2-layer ReLU MLP head.

mod config;
mod property;
mod reaction;
mod tape_params;

pub use config::{LengthNorm, ModelConfig};
pub use property::{PropertyExample, PropertyModel, PropertyPass, TaskKind};
pub use reaction::{DecodeTrace, PreparedReaction, ReactionModel};

use crate::nn::{NnError, Scalar, Tensor};
use thiserror::Error;

/// Layer-norm epsilon used by every block.
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("tokenize: {0}")]
    Token(#[from] crate::smiles::SmilesError),
    #[error("bad model config: {0}")]
    Config(String),
    #[error("fragment must hold at least one token")]
    EmptyFragment,
    #[error("sequence of {len} tokens exceeds the model maximum {max}")]
    OverLength { len: usize, max: usize },
    #[error("aggregate needs a non-empty encoding set")]
    EmptySet,
    #[error("encodings mix widths {a} and {b}")]
    WidthMismatch { a: usize, b: usize },
    #[error("token id {id} is not a character id; encoder input takes raw text tokens")]
    EncoderSpecialToken { id: u16 },
    #[error("decoder target must start with BOS")]
    TargetMissingBos,
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
}

/// Per-fragment encoder output: an `L x d` array whose rows at positions
/// `>= valid_len` are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentEncoding<T> {
    values: Tensor<T>,
    valid_len: usize,
}

impl<T: Scalar> FragmentEncoding<T> {
    /// Wraps an encoder output of `valid_len` rows, zero-padding to `pad_to`.
    pub fn new(unpadded: Tensor<T>, pad_to: usize) -> Result<Self, ModelError> {
        let (rows, cols) = unpadded.dims2();
        if rows == 0 {
            return Err(ModelError::EmptyFragment);
        }
        if pad_to < rows {
            return Err(ModelError::OverLength {
                len: rows,
                max: pad_to,
            });
        }
        let mut values = Tensor::zeros(pad_to, cols);
        values.data_mut()[..rows * cols].copy_from_slice(unpadded.data());
        Ok(Self {
            values,
            valid_len: rows,
        })
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn valid_len(&self) -> usize {
        self.valid_len
    }

    pub fn width(&self) -> usize {
        self.values.dims2().1
    }

    /// Sort key making set reductions order-independent: fragments are
    /// summed in this (deterministic, content-derived) order, so any
    /// permutation of the input set folds in the exact same float order.
    fn sort_key(&self) -> (usize, Vec<u64>) {
        (
            self.valid_len,
            self.values.data().iter().map(|v| v.to_f().to_bits()).collect(),
        )
    }
}

/// The aggregated d-vector representing a whole reaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionVector<T> {
    values: Tensor<T>,
}

impl<T: Scalar> ReactionVector<T> {
    pub fn new(values: Tensor<T>) -> Self {
        debug_assert_eq!(values.dims2().0, 1);
        Self { values }
    }

    /// The vector as a `[1, d]` tensor.
    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.dims2().1
    }
}

/// Element-wise sum across the encoding set, then mean across the sequence
/// axis. The divisor is the set's maximum valid length under
/// [`LengthNorm::Effective`] (zero-padded tails beyond every fragment do not
/// dilute the mean) or the fixed `strict_len` under [`LengthNorm::Strict`].
pub fn aggregate<T: Scalar>(
    encodings: &[FragmentEncoding<T>],
    norm: LengthNorm,
    strict_len: usize,
) -> Result<ReactionVector<T>, ModelError> {
    if encodings.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let width = encodings[0].width();
    for e in encodings {
        if e.width() != width {
            return Err(ModelError::WidthMismatch {
                a: width,
                b: e.width(),
            });
        }
    }
    let l_eff = encodings.iter().map(|e| e.valid_len).max().unwrap();
    let divisor = match norm {
        LengthNorm::Effective => l_eff,
        LengthNorm::Strict => strict_len,
    };
    if divisor == 0 {
        return Err(ModelError::Config("aggregate divisor is zero".to_string()));
    }

    let mut order: Vec<usize> = (0..encodings.len()).collect();
    order.sort_by(|&a, &b| encodings[a].sort_key().cmp(&encodings[b].sort_key()));

    let mut sum = Tensor::zeros(l_eff, width);
    for &idx in &order {
        let e = &encodings[idx];
        let rows = e.valid_len.min(l_eff);
        for i in 0..rows {
            for j in 0..width {
                let v = sum.get(i, j) + e.values.get(i, j);
                sum.set(i, j, v);
            }
        }
    }
    let inv = T::one() / T::from_count(divisor);
    let mut out = Tensor::zeros(1, width);
    for j in 0..width {
        let mut acc = T::zero();
        for i in 0..l_eff {
            acc += sum.get(i, j);
        }
        out.set(0, j, acc * inv);
    }
    Ok(ReactionVector::new(out))
}
