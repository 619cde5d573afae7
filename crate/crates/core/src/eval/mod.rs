//! Metrics and the paired statistical evaluation protocol: RMSE, ROC-AUC,
//! PRC-AUC, exact Wilcoxon signed-rank testing, Bonferroni correction,
//! rank-biserial correlation, and the cross-validation comparison driver
//! that pits a pre-trained model against a randomly initialized one.

mod crossval;
mod metrics;
mod report;
mod wilcoxon;

pub use crossval::{
    compare_datasets, evaluate_metric, run_crossval_comparison, CrossvalSettings, DatasetComparison,
    DatasetSpec, MetricKind,
};
pub use metrics::{multi_task_average, prc_auc, rmse, roc_auc};
pub use report::{
    format_level, format_p, ComparisonReport, PairedFoldResults, ReportMeta, ReportRow,
};
pub use wilcoxon::{
    bonferroni_level, rank_biserial, wilcoxon_signed_rank, Sidedness, WilcoxonMethod,
    WilcoxonOutcome,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether larger metric values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Arrow used in reports: ↑ for higher-is-better metrics.
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HigherBetter => "↑",
            Direction::LowerBetter => "↓",
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("undefined metric: labels hold a single class")]
    SingleClass,
    #[error("undefined metric: every task is undefined")]
    AllUndefined,
    #[error("degenerate comparison: every paired difference is zero")]
    DegenerateComparison,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Train(#[from] crate::train::TrainError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error("comparison config: {0}")]
    Config(String),
}
