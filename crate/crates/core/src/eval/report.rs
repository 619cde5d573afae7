use serde::{Deserialize, Serialize};

use super::{Direction, WilcoxonMethod};

/// p-values are displayed to three decimals (0.00098 prints as "0.001").
pub fn format_p(p: f64) -> String {
    format!("{p:.3}")
}

/// Significance levels are displayed to five decimals (0.05/12 prints as
/// "0.00417").
pub fn format_level(level: f64) -> String {
    format!("{level:.5}")
}

/// Per-fold paired test metrics for one dataset: the input to the Wilcoxon,
/// Bonferroni, and rank-biserial pipeline. `validation_pairs` carries the
/// best-validation metrics of the same runs for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedFoldResults {
    pub dataset: String,
    pub metric: String,
    pub direction: Direction,
    /// `(baseline, treated)` test-fold metrics, one pair per rotation.
    pub pairs: Vec<(f64, f64)>,
    pub validation_pairs: Vec<(f64, f64)>,
}

impl PairedFoldResults {
    /// CSV with one row per fold: `fold,baseline,treated`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,baseline,treated\n");
        for (fold, (baseline, treated)) in self.pairs.iter().enumerate() {
            out.push_str(&format!("{fold},{baseline},{treated}\n"));
        }
        out
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// One dataset row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub metric: String,
    pub direction: Direction,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub treated_mean: f64,
    pub treated_std: f64,
    pub p_value: f64,
    pub rank_biserial: f64,
    pub n_folds: usize,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
    /// `p < alpha / m`.
    pub significant: bool,
}

impl ReportRow {
    pub fn from_pairs(
        folds: &PairedFoldResults,
        p_value: f64,
        rank_biserial: f64,
        n_effective: usize,
        method: WilcoxonMethod,
        corrected_level: f64,
    ) -> Self {
        let (baseline_mean, baseline_std) = mean_std(folds.pairs.iter().map(|&(b, _)| b));
        let (treated_mean, treated_std) = mean_std(folds.pairs.iter().map(|&(_, t)| t));
        Self {
            dataset: folds.dataset.clone(),
            metric: folds.metric.clone(),
            direction: folds.direction,
            baseline_mean,
            baseline_std,
            treated_mean,
            treated_std,
            p_value,
            rank_biserial,
            n_folds: folds.pairs.len(),
            n_effective,
            method,
            significant: p_value < corrected_level,
        }
    }
}

/// Provenance embedded in every emitted artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// The comparison table: one row per dataset with mean ± std for both
/// models, the Wilcoxon p-value, the rank-biserial correlation, and the
/// significance flag at the Bonferroni-corrected level `alpha / m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub meta: ReportMeta,
    pub alpha: f64,
    pub m: usize,
    pub corrected_level: f64,
    pub rows: Vec<ReportRow>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "paired comparison  alpha={}  m={}  per-test level={}\n",
            self.alpha,
            self.m,
            format_level(self.corrected_level)
        ));
        out.push_str(&format!(
            "config_hash={}  seed={}  version={}\n\n",
            self.meta.config_hash, self.meta.seed, self.meta.version
        ));
        out.push_str(&format!(
            "{:<14} {:<10} {:>20} {:>20} {:>8} {:>14} {:>5}\n",
            "dataset", "metric", "without pre-train", "with pre-train", "p", "rank-biserial", "sig"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<14} {:<10} {:>20} {:>20} {:>8} {:>14} {:>5}\n",
                row.dataset,
                format!("{} {}", row.metric, row.direction.arrow()),
                format!("{:.3} ± {:.3}", row.baseline_mean, row.baseline_std),
                format!("{:.3} ± {:.3}", row.treated_mean, row.treated_std),
                format_p(row.p_value),
                format!("{:.3}", row.rank_biserial),
                if row.significant { "*" } else { "" }
            ));
        }
        out
    }
}
