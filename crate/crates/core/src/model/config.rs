use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::smiles::VOCAB_SIZE;

/// Divisor of the sequence-axis mean in the reaction aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthNorm {
    /// Divide by the set's maximum valid length. Default: padding shared by
    /// every fragment carries no signal and should not shrink the vector.
    Effective,
    /// Divide by the configured maximum sequence length regardless of
    /// content, for ablation against the effective mode.
    Strict,
}

/// Transformer dimensions and behavior flags. Defaults are the pre-training
/// scale reported for this architecture: 4 layers, 8 heads, width 256.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ff_width: usize,
    pub vocab_size: usize,
    /// Maximum token-sequence length including BOS/EOS framing.
    pub max_len: usize,
    pub dropout: f64,
    /// Hidden width of the property-prediction MLP; `None` means `width`.
    pub mlp_hidden: Option<usize>,
    pub length_norm: LengthNorm,
    /// Prepend a role-marker token to reagent fragments.
    pub role_tokens: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 4,
            heads: 8,
            width: 256,
            ff_width: 1024,
            vocab_size: VOCAB_SIZE,
            max_len: 159,
            dropout: 0.1,
            mlp_hidden: None,
            length_norm: LengthNorm::Effective,
            role_tokens: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers == 0 {
            return Err(ModelError::Config("layers must be >= 1".to_string()));
        }
        if self.heads == 0 || self.width % self.heads != 0 {
            return Err(ModelError::Config(format!(
                "width {} must be divisible by heads {}",
                self.width, self.heads
            )));
        }
        if self.vocab_size < VOCAB_SIZE {
            return Err(ModelError::Config(format!(
                "vocab_size {} cannot hold the {VOCAB_SIZE}-token ASCII vocabulary",
                self.vocab_size
            )));
        }
        if self.max_len < 3 {
            return Err(ModelError::Config(
                "max_len must fit BOS + one token + EOS".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!(
                "dropout {} must lie in [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn mlp_hidden_width(&self) -> usize {
        self.mlp_hidden.unwrap_or(self.width)
    }
}
