use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rpt_core::eval::{MetricKind, Sidedness};
use rpt_core::model::{ModelConfig, TaskKind};
use rpt_core::train::{FinetuneConfig, LrSearchConfig, PretrainConfig};

use crate::CliError;

/// Scalar precision of a run. 64-bit is the reproducibility mode; 32-bit
/// trades determinism guarantees for speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    /// Reaction corpus: one `reactants>reagents>product` line per reaction.
    pub corpus: Option<PathBuf>,
    /// Held-out reactions for validation; training loss is used when absent.
    pub val_corpus: Option<PathBuf>,
    pub params: PretrainConfig,
}

impl Default for PretrainSection {
    fn default() -> Self {
        Self {
            corpus: None,
            val_corpus: None,
            params: PretrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    /// Pre-trained checkpoint for initialization (the treated arm of
    /// comparisons; optional for plain fine-tuning).
    pub init_checkpoint: Option<PathBuf>,
    /// Fixed learning rate; when absent the geometric search chooses one.
    pub lr: Option<f64>,
    pub params: FinetuneConfig,
    pub lr_search: LrSearchConfig,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        Self {
            init_checkpoint: None,
            lr: None,
            params: FinetuneConfig::default(),
            lr_search: LrSearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub n_folds: usize,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            sidedness: Sidedness::OneSidedTreatedBetter,
            n_folds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    /// Property CSV (`smiles,task1,...,taskT` header).
    pub path: PathBuf,
    pub task: TaskKind,
    pub metric: MetricKind,
    #[serde(default)]
    pub stratify_label: Option<usize>,
    /// Dataset-specific learning-rate search budget override.
    #[serde(default)]
    pub lr_search: Option<LrSearchConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub datasets: Vec<DatasetEntry>,
}

/// The whole run configuration. Every field is defaulted; unknown keys are
/// rejected so typos cannot silently change a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub precision: Precision,
    pub model: ModelConfig,
    pub pretrain: PretrainSection,
    pub finetune: FinetuneSection,
    pub stats: StatsSection,
    pub data: DataSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            precision: Precision::F64,
            model: ModelConfig::default(),
            pretrain: PretrainSection::default(),
            finetune: FinetuneSection::default(),
            stats: StatsSection::default(),
            data: DataSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::user(format!("bad config {}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(CliError::user)?;
        self.pretrain.params.validate().map_err(CliError::user)?;
        self.finetune.params.validate().map_err(CliError::user)?;
        self.finetune.lr_search.validate().map_err(CliError::user)?;
        if !(0.0..1.0).contains(&self.stats.alpha) || self.stats.alpha <= 0.0 {
            return Err(CliError::user(format!(
                "alpha {} must lie in (0, 1)",
                self.stats.alpha
            )));
        }
        if self.stats.n_folds < 3 {
            return Err(CliError::user("stats.n_folds must be at least 3"));
        }
        if self.model.max_len < self.pretrain.params.max_len_filter + 2 {
            return Err(CliError::user(format!(
                "model.max_len {} cannot frame {}-character products with BOS/EOS",
                self.model.max_len, self.pretrain.params.max_len_filter
            )));
        }
        Ok(())
    }

    /// Canonical JSON of the resolved config.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Content hash of the resolved config (first 16 hex characters of the
    /// SHA-256 of the canonical JSON).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }
}
