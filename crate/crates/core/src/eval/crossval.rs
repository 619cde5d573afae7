use serde::{Deserialize, Serialize};

use super::metrics::{multi_task_average, prc_auc, rmse, roc_auc};
use super::report::{ComparisonReport, PairedFoldResults, ReportMeta, ReportRow};
use super::wilcoxon::{bonferroni_level, rank_biserial, wilcoxon_signed_rank, Sidedness};
use super::{Direction, EvalError, WilcoxonOutcome};
use crate::data::{make_fold_plan, FoldPlan, PropertyRecord};
use crate::model::{ModelConfig, PropertyExample, PropertyModel, TaskKind};
use crate::nn::{Checkpoint, Scalar};
use crate::smiles::TokenSequence;
use crate::train::{
    finetune, lr_search, prepare_examples, EarlyStopMetric, FinetuneConfig, InitSpec,
    LrSearchConfig,
};
use crate::subseed;

/// Test metric reported for a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Rmse,
    RocAuc,
    PrcAuc,
}

impl MetricKind {
    pub fn direction(self) -> Direction {
        match self {
            MetricKind::Rmse => Direction::LowerBetter,
            MetricKind::RocAuc | MetricKind::PrcAuc => Direction::HigherBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Rmse => "rmse",
            MetricKind::RocAuc => "roc_auc",
            MetricKind::PrcAuc => "prc_auc",
        }
    }
}

/// A fine-tuning dataset plus how to split and score it.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub name: String,
    pub records: Vec<PropertyRecord>,
    pub kind: TaskKind,
    pub metric: MetricKind,
    /// Label column for stratified splits (single-label classification).
    pub stratify_label: Option<usize>,
    /// Dataset-specific search budget override (the protocol shrank the
    /// epoch budget for its largest datasets).
    pub lr_search_override: Option<LrSearchConfig>,
}

impl DatasetSpec {
    pub fn tasks(&self) -> usize {
        self.records.first().map_or(0, |r| r.labels.len())
    }

    fn validate(&self) -> Result<(), EvalError> {
        let tasks = self.tasks();
        if tasks == 0 {
            return Err(EvalError::Config(format!(
                "dataset '{}' is empty or has no tasks",
                self.name
            )));
        }
        if self.records.iter().any(|r| r.labels.len() != tasks) {
            return Err(EvalError::Config(format!(
                "dataset '{}' mixes label counts",
                self.name
            )));
        }
        Ok(())
    }
}

/// Shared settings of one comparison run.
pub struct CrossvalSettings<'a, T: Scalar> {
    pub model_cfg: &'a ModelConfig,
    pub finetune: &'a FinetuneConfig,
    pub lr_search: &'a LrSearchConfig,
    pub n_folds: usize,
    pub seed: u64,
    /// Initialization of the treated arm. The baseline arm always starts
    /// from random parameters.
    pub pretrained: &'a Checkpoint<T>,
}

/// Everything produced for one dataset: per-fold pairs, the test outcome,
/// the effect size, and the reproducible split.
#[derive(Debug, Clone)]
pub struct DatasetComparison {
    pub folds: PairedFoldResults,
    pub outcome: WilcoxonOutcome,
    pub rank_biserial: f64,
    pub fold_plan: FoldPlan,
    /// Learning rates the per-rotation searches selected: `(baseline, treated)`.
    pub chosen_lrs: Vec<(f64, f64)>,
}

/// Mean test metric of a fine-tuned model over a fold, averaged across
/// tasks with defined metrics.
pub fn evaluate_metric<T: Scalar>(
    model: &PropertyModel<T>,
    examples: &[PropertyExample],
    metric: MetricKind,
) -> Result<f64, EvalError> {
    let tasks = model.tasks;
    let mut per_task: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![], vec![]); tasks];
    for (ids, labels) in examples {
        let preds = model.forward(&TokenSequence::new(ids.clone()))?;
        for (t, label) in labels.iter().enumerate() {
            if let Some(y) = label {
                per_task[t].0.push(preds[t].to_f());
                per_task[t].1.push(*y);
            }
        }
    }
    let values: Vec<Option<f64>> = per_task
        .iter()
        .map(|(preds, labels)| match metric {
            MetricKind::Rmse => {
                if preds.is_empty() {
                    None
                } else {
                    rmse(preds, labels).ok()
                }
            }
            MetricKind::RocAuc => {
                let flags: Vec<bool> = labels.iter().map(|&y| y != 0.0).collect();
                roc_auc(preds, &flags).ok()
            }
            MetricKind::PrcAuc => {
                let flags: Vec<bool> = labels.iter().map(|&y| y != 0.0).collect();
                prc_auc(preds, &flags).ok()
            }
        })
        .collect();
    Ok(multi_task_average(&values)?)
}

/// The full paired protocol on one dataset: for every rotation, fine-tune a
/// randomly initialized arm and a pre-trained arm (each with its own
/// learning-rate search on the tuning fold), evaluate both best checkpoints
/// on the test fold, then run the signed-rank test over the paired fold
/// metrics.
pub fn run_crossval_comparison<T: Scalar>(
    dataset: &DatasetSpec,
    settings: &CrossvalSettings<'_, T>,
    sidedness: Sidedness,
) -> Result<DatasetComparison, EvalError> {
    dataset.validate()?;
    if settings.n_folds < 4 {
        // Three folds are consumed by the test/validation/tuning roles.
        return Err(EvalError::Config(format!(
            "cross-validation comparison needs at least 4 folds to leave a training split, got {}",
            settings.n_folds
        )));
    }
    let tasks = dataset.tasks();
    let stop_metric = EarlyStopMetric::for_task(dataset.kind);
    let search_cfg = dataset
        .lr_search_override
        .as_ref()
        .unwrap_or(settings.lr_search);

    let plan = make_fold_plan(
        &dataset.records,
        settings.n_folds,
        dataset.stratify_label,
        subseed(settings.seed, "cv-folds", 0),
    )?;

    let mut pairs = Vec::with_capacity(settings.n_folds);
    let mut validation_pairs = Vec::with_capacity(settings.n_folds);
    let mut chosen_lrs = Vec::with_capacity(settings.n_folds);
    for k in 0..settings.n_folds {
        let (pair, val_pair, lrs) =
            run_rotation(dataset, settings, search_cfg, &plan, k, tasks, stop_metric)
                .map_err(|source| EvalError::Config(format!("rotation {k}: {source}")))?;
        pairs.push(pair);
        validation_pairs.push(val_pair);
        chosen_lrs.push(lrs);
    }

    let folds = PairedFoldResults {
        dataset: dataset.name.clone(),
        metric: dataset.metric.name().to_string(),
        direction: dataset.metric.direction(),
        pairs,
        validation_pairs,
    };
    let outcome = wilcoxon_signed_rank(&folds.pairs, folds.direction, sidedness)?;
    let effect = rank_biserial(&folds.pairs, folds.direction)?;
    Ok(DatasetComparison {
        folds,
        outcome,
        rank_biserial: effect,
        fold_plan: plan,
        chosen_lrs,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_rotation<T: Scalar>(
    dataset: &DatasetSpec,
    settings: &CrossvalSettings<'_, T>,
    search_cfg: &LrSearchConfig,
    plan: &crate::data::FoldPlan,
    k: usize,
    tasks: usize,
    stop_metric: EarlyStopMetric,
) -> Result<((f64, f64), (f64, f64), (f64, f64)), EvalError> {
    let split = plan.rotation(k);
    let train_ex = prepare_examples(&dataset.records, &split.training)?;
    let val_ex = prepare_examples(&dataset.records, &split.validation)?;
    let tune_ex = prepare_examples(&dataset.records, &split.tuning)?;
    let test_ex = prepare_examples(&dataset.records, &split.test)?;

    let run_arm = |arm: &str, init: &InitSpec<'_, T>| -> Result<(f64, f64, f64), EvalError> {
        let (lr, _) = lr_search(
            settings.model_cfg,
            tasks,
            dataset.kind,
            init,
            &train_ex,
            &tune_ex,
            stop_metric,
            settings.finetune,
            search_cfg,
            subseed(settings.seed, &format!("cv-lr-{arm}"), k as u64),
        )?;
        let out = finetune(
            settings.model_cfg,
            tasks,
            dataset.kind,
            init,
            &train_ex,
            &val_ex,
            stop_metric,
            settings.finetune,
            lr,
            subseed(settings.seed, &format!("cv-ft-{arm}"), k as u64),
        )?;
        let test_metric = evaluate_metric(&out.model, &test_ex, dataset.metric)?;
        Ok((test_metric, out.best_metric, lr))
    };

    let baseline_init = InitSpec::Random {
        seed: subseed(settings.seed, "cv-init-baseline", k as u64),
    };
    let (baseline_test, baseline_val, baseline_lr) = run_arm("baseline", &baseline_init)?;
    let treated_init = InitSpec::Pretrained {
        checkpoint: settings.pretrained,
        head_seed: subseed(settings.seed, "cv-head-treated", k as u64),
    };
    let (treated_test, treated_val, treated_lr) = run_arm("treated", &treated_init)?;

    Ok((
        (baseline_test, treated_test),
        (baseline_val, treated_val),
        (baseline_lr, treated_lr),
    ))
}

/// Runs the comparison on every dataset and assembles the report with
/// significance flagged at the Bonferroni-corrected level `alpha / m`,
/// `m` being the number of datasets.
pub fn compare_datasets<T: Scalar>(
    datasets: &[DatasetSpec],
    settings: &CrossvalSettings<'_, T>,
    alpha: f64,
    sidedness: Sidedness,
    meta: ReportMeta,
) -> Result<(ComparisonReport, Vec<DatasetComparison>), EvalError> {
    if datasets.is_empty() {
        return Err(EvalError::Config("no datasets configured".to_string()));
    }
    let m = datasets.len();
    let corrected_level = bonferroni_level(alpha, m);
    let mut rows = Vec::with_capacity(m);
    let mut comparisons = Vec::with_capacity(m);
    for dataset in datasets {
        let comparison = run_crossval_comparison(dataset, settings, sidedness)?;
        rows.push(ReportRow::from_pairs(
            &comparison.folds,
            comparison.outcome.p_value,
            comparison.rank_biserial,
            comparison.outcome.n_effective,
            comparison.outcome.method,
            corrected_level,
        ));
        comparisons.push(comparison);
    }
    Ok((
        ComparisonReport {
            meta,
            alpha,
            m,
            corrected_level,
            rows,
        },
        comparisons,
    ))
}
