use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::nn::AdamwConfig;

/// Pre-training settings. Defaults are the reported experiment scale:
/// 150 epochs, batch 4096, cosine cyclic learning rate from 1e-5 to 5e-4,
/// 157-character length filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub max_lr: f64,
    /// Cosine cycle length in update steps; `None` means one cycle per epoch.
    pub cycle_steps: Option<usize>,
    /// Reactions with any fragment longer than this are excluded.
    pub max_len_filter: usize,
    pub grad_clip: Option<f64>,
    pub adamw: AdamwConfig,
    /// Redraw the randomized reactant/reagent SMILES every epoch.
    pub reaugment_each_epoch: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 4096,
            base_lr: 1e-5,
            max_lr: 5e-4,
            cycle_steps: None,
            max_len_filter: 157,
            grad_clip: Some(1.0),
            adamw: AdamwConfig::default(),
            reaugment_each_epoch: true,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.base_lr <= 0.0 || self.max_lr < self.base_lr {
            return Err(TrainError::Config(format!(
                "need 0 < base_lr <= max_lr, got {} and {}",
                self.base_lr, self.max_lr
            )));
        }
        if let Some(t) = self.cycle_steps {
            if t < 2 {
                return Err(TrainError::Config("cycle_steps must be >= 2".to_string()));
            }
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(TrainError::Config(
                "batch_size and epochs must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Fine-tuning settings. Defaults follow the reported protocol: batch 64,
/// early stopping with 40 update steps of patience, constant learning rate
/// at the searched value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub batch_size: usize,
    /// Epoch cap; early stopping usually ends the run first.
    pub max_epochs: usize,
    /// Hard cap on update steps, if any.
    pub max_steps: Option<usize>,
    /// Early-stopping patience in update steps.
    pub patience: usize,
    /// Validation cadence in update steps.
    pub eval_every: usize,
    /// Replace the constant searched rate with a cosine cycle peaking at it
    /// (base = peak/50, one cycle per epoch).
    pub use_cyclic_schedule: bool,
    pub grad_clip: Option<f64>,
    pub adamw: AdamwConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            max_epochs: 200,
            max_steps: None,
            patience: 40,
            eval_every: 1,
            use_cyclic_schedule: false,
            grad_clip: Some(1.0),
            adamw: AdamwConfig::default(),
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.patience == 0 {
            return Err(TrainError::Config("patience must be >= 1".to_string()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.eval_every == 0 {
            return Err(TrainError::Config(
                "batch_size, max_epochs, and eval_every must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Learning-rate search: geometric sampling over an interval, each sample
/// trained under a tuning budget and scored on the tuning fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSearchConfig {
    pub runs: usize,
    pub min_lr: f64,
    pub max_lr: f64,
    /// Epoch budget for each search run (the protocol used 50 for most
    /// datasets, 10 for MUV, 1 for PCBA).
    pub epochs: usize,
    pub max_steps: Option<usize>,
}

impl Default for LrSearchConfig {
    fn default() -> Self {
        Self {
            runs: 20,
            min_lr: 1e-6,
            max_lr: 1e-3,
            epochs: 50,
            max_steps: None,
        }
    }
}

impl LrSearchConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.runs == 0 {
            return Err(TrainError::Config("lr search needs runs >= 1".to_string()));
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.max_lr) {
            return Err(TrainError::Config(format!(
                "empty lr range [{}, {}]",
                self.min_lr, self.max_lr
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_surface_reported_values() {
        let p = PretrainConfig::default();
        assert_eq!(p.epochs, 150);
        assert_eq!(p.batch_size, 4096);
        assert_eq!(p.base_lr, 1e-5);
        assert_eq!(p.max_lr, 5e-4);
        assert_eq!(p.max_len_filter, 157);
        let f = FinetuneConfig::default();
        assert_eq!(f.batch_size, 64);
        assert_eq!(f.patience, 40);
        let s = LrSearchConfig::default();
        assert_eq!(s.runs, 20);
        assert_eq!(s.min_lr, 1e-6);
        assert_eq!(s.max_lr, 1e-3);
        assert_eq!(s.epochs, 50);
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let bad = PretrainConfig {
            base_lr: 1e-3,
            max_lr: 1e-5,
            ..PretrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PretrainConfig {
            cycle_steps: Some(1),
            ..PretrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FinetuneConfig {
            patience: 0,
            ..FinetuneConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = LrSearchConfig {
            min_lr: 1e-2,
            max_lr: 1e-3,
            ..LrSearchConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
