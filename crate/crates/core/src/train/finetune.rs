use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::runlog::{EventKind, RunLog};
use super::schedule::{cosine_cyclic_lr, EarlyStopper, StopDecision};
use super::{FinetuneConfig, LrSearchConfig, TrainError};
use crate::data::PropertyRecord;
use crate::eval::{multi_task_average, roc_auc, Direction};
use crate::model::{ModelConfig, PropertyExample, PropertyModel, TaskKind};
use crate::nn::{clip_global_norm, Checkpoint, Scalar, Tensor};
use crate::smiles::tokenize;
use crate::subseed;

/// Early-stopping signal: validation loss for regression, validation
/// ROC-AUC (task-averaged) for classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarlyStopMetric {
    ValidationLoss,
    RocAuc,
}

impl EarlyStopMetric {
    pub fn direction(self) -> Direction {
        match self {
            EarlyStopMetric::ValidationLoss => Direction::LowerBetter,
            EarlyStopMetric::RocAuc => Direction::HigherBetter,
        }
    }

    /// The default signal for a task kind.
    pub fn for_task(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Regression => EarlyStopMetric::ValidationLoss,
            TaskKind::Classification => EarlyStopMetric::RocAuc,
        }
    }
}

/// How to initialize the fine-tuned model.
pub enum InitSpec<'a, T: Scalar> {
    Random { seed: u64 },
    Pretrained { checkpoint: &'a Checkpoint<T>, head_seed: u64 },
}

impl<T: Scalar> InitSpec<'_, T> {
    fn build(
        &self,
        model_cfg: &ModelConfig,
        tasks: usize,
    ) -> Result<PropertyModel<T>, TrainError> {
        match self {
            InitSpec::Random { seed } => Ok(PropertyModel::init(model_cfg, tasks, *seed)?),
            InitSpec::Pretrained {
                checkpoint,
                head_seed,
            } => Ok(PropertyModel::from_pretrained(
                model_cfg, tasks, *head_seed, checkpoint,
            )?),
        }
    }
}

/// Tokenizes property records (by index) into model examples.
pub fn prepare_examples(
    records: &[PropertyRecord],
    indices: &[usize],
) -> Result<Vec<PropertyExample>, TrainError> {
    indices
        .iter()
        .map(|&i| {
            let tokens = tokenize(&records[i].smiles)
                .map_err(crate::model::ModelError::Token)?;
            Ok((tokens.ids, records[i].labels.clone()))
        })
        .collect()
}

pub struct FinetuneOutput<T: Scalar> {
    /// Parameters restored to the best-validation snapshot.
    pub model: PropertyModel<T>,
    pub best_metric: f64,
    pub best_step: u64,
    pub steps_run: u64,
    pub runlog: RunLog,
}

/// Fine-tunes on a property dataset with patience-based early stopping on
/// the validation split. Returns the best-validation checkpoint: no update
/// past `best_step + patience` is reflected in the returned parameters.
#[allow(clippy::too_many_arguments)]
pub fn finetune<T: Scalar>(
    model_cfg: &ModelConfig,
    tasks: usize,
    kind: TaskKind,
    init: &InitSpec<'_, T>,
    train: &[PropertyExample],
    validation: &[PropertyExample],
    metric: EarlyStopMetric,
    cfg: &FinetuneConfig,
    lr: f64,
    seed: u64,
) -> Result<FinetuneOutput<T>, TrainError> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(TrainError::Config(
            "fine-tuning needs non-empty train and validation splits".to_string(),
        ));
    }
    if lr <= 0.0 {
        return Err(TrainError::Config(format!("learning rate {lr} must be positive")));
    }
    let mut model = init.build(model_cfg, tasks)?;
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let cycle = steps_per_epoch.max(2) as u64;

    let mut runlog = RunLog::new();
    let mut stopper = EarlyStopper::new(cfg.patience, metric.direction());
    let mut best_params: Option<BTreeMap<String, Tensor<T>>> = None;
    let mut step: u64 = 0;

    'outer: for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut order_rng =
            ChaCha8Rng::seed_from_u64(subseed(seed, "finetune-order", epoch as u64));
        order.shuffle(&mut order_rng);
        let mut dropout_rng =
            ChaCha8Rng::seed_from_u64(subseed(seed, "finetune-dropout", epoch as u64));

        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<PropertyExample> =
                chunk.iter().map(|&i| train[i].clone()).collect();
            let lr_t = if cfg.use_cyclic_schedule {
                cosine_cyclic_lr(step, lr / 50.0, lr, cycle)
            } else {
                lr
            };
            let pass = model.batch_loss(&batch, kind, Some(&mut dropout_rng))?;
            let loss = pass.loss_value().to_f();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    step,
                    reaction_ids: chunk.to_vec(),
                });
            }
            let mut grads = pass.backward()?;
            if let Some(max_norm) = cfg.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            model.params.adamw_step(&grads, lr_t, &cfg.adamw)?;
            runlog.push(step, EventKind::TrainLoss, loss);
            runlog.push(step, EventKind::LearningRate, lr_t);
            step += 1;

            if step % cfg.eval_every as u64 == 0 {
                let value = validation_metric(&model, validation, kind, metric)?;
                runlog.push(step, EventKind::ValMetric, value);
                match stopper.observe(step, value) {
                    StopDecision::Improved => {
                        best_params = Some(snapshot_values(&model));
                        runlog.push(step, EventKind::BestCheckpoint, value);
                    }
                    StopDecision::Stop => break 'outer,
                    StopDecision::Continue => {}
                }
            }
            if cfg.max_steps.is_some_and(|cap| step >= cap as u64) {
                break 'outer;
            }
        }
    }

    // No evaluation happened (e.g. max_steps below eval_every): score once.
    if stopper.best().is_none() {
        let value = validation_metric(&model, validation, kind, metric)?;
        runlog.push(step, EventKind::ValMetric, value);
        stopper.observe(step, value);
        best_params = Some(snapshot_values(&model));
        runlog.push(step, EventKind::BestCheckpoint, value);
    }

    let (best_step, best_metric) = stopper.best().expect("at least one observation");
    if let Some(values) = best_params {
        for (name, tensor) in values {
            model.params.set(&name, tensor)?;
        }
    }
    Ok(FinetuneOutput {
        model,
        best_metric,
        best_step,
        steps_run: step,
        runlog,
    })
}

fn snapshot_values<T: Scalar>(model: &PropertyModel<T>) -> BTreeMap<String, Tensor<T>> {
    model
        .params
        .iter()
        .map(|(name, tensor)| (name.to_string(), tensor.clone()))
        .collect()
}

/// Validation signal: label-weighted mean loss, or task-averaged ROC-AUC.
fn validation_metric<T: Scalar>(
    model: &PropertyModel<T>,
    validation: &[PropertyExample],
    kind: TaskKind,
    metric: EarlyStopMetric,
) -> Result<f64, TrainError> {
    match metric {
        EarlyStopMetric::ValidationLoss => {
            let mut loss_sum = 0.0;
            let mut labels = 0usize;
            for chunk in validation.chunks(64) {
                let pass = model.batch_loss(chunk, kind, None)?;
                let count: usize = chunk
                    .iter()
                    .map(|(_, l)| l.iter().filter(|x| x.is_some()).count())
                    .sum();
                loss_sum += pass.loss_value().to_f() * count as f64;
                labels += count;
            }
            Ok(loss_sum / labels.max(1) as f64)
        }
        EarlyStopMetric::RocAuc => {
            let tasks = model.tasks;
            let mut per_task: Vec<(Vec<f64>, Vec<bool>)> = vec![(vec![], vec![]); tasks];
            for (ids, labels) in validation {
                let preds = model.forward(&crate::smiles::TokenSequence::new(ids.clone()))?;
                for (t, label) in labels.iter().enumerate() {
                    if let Some(y) = label {
                        per_task[t].0.push(preds[t].to_f());
                        per_task[t].1.push(*y != 0.0f64);
                    }
                }
            }
            let values: Vec<Option<f64>> = per_task
                .iter()
                .map(|(scores, labels)| roc_auc(scores, labels).ok())
                .collect();
            multi_task_average(&values).map_err(|e| TrainError::Metric(e.to_string()))
        }
    }
}

/// Log-uniform ("geometric") learning-rate samples over `[min_lr, max_lr]`.
pub fn sample_lrs(n: usize, min_lr: f64, max_lr: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lo = min_lr.log10();
    let hi = max_lr.log10();
    (0..n)
        .map(|_| 10f64.powf(rng.gen_range(lo..=hi)))
        .collect()
}

/// Learning-rate search over a caller-supplied evaluator. `score` returns a
/// higher-is-better figure for a candidate rate; ties break toward the
/// smaller rate. Returns the winner and every `(lr, score)` pair.
pub fn lr_search_with<F>(
    cfg: &LrSearchConfig,
    seed: u64,
    mut score: F,
) -> Result<(f64, Vec<(f64, f64)>), TrainError>
where
    F: FnMut(f64) -> Result<f64, TrainError>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "lr-search-sample", 0));
    let candidates = sample_lrs(cfg.runs, cfg.min_lr, cfg.max_lr, &mut rng);
    let mut results = Vec::with_capacity(candidates.len());
    for lr in candidates {
        let s = score(lr)?;
        results.push((lr, s));
    }
    let mut best = results[0];
    for &(lr, s) in &results[1..] {
        if s > best.1 || (s == best.1 && lr < best.0) {
            best = (lr, s);
        }
    }
    Ok((best.0, results))
}

/// Learning-rate search by short fine-tuning runs scored on the tuning fold.
#[allow(clippy::too_many_arguments)]
pub fn lr_search<T: Scalar>(
    model_cfg: &ModelConfig,
    tasks: usize,
    kind: TaskKind,
    init: &InitSpec<'_, T>,
    train: &[PropertyExample],
    tuning: &[PropertyExample],
    metric: EarlyStopMetric,
    base_cfg: &FinetuneConfig,
    search: &LrSearchConfig,
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>), TrainError> {
    let budgeted = FinetuneConfig {
        max_epochs: search.epochs,
        max_steps: search.max_steps,
        ..base_cfg.clone()
    };
    let mut run_index = 0u64;
    lr_search_with(search, seed, |lr| {
        let run_seed = subseed(seed, "lr-search-run", run_index);
        run_index += 1;
        let out = finetune(
            model_cfg, tasks, kind, init, train, tuning, metric, &budgeted, lr, run_seed,
        )?;
        Ok(match metric.direction() {
            Direction::HigherBetter => out.best_metric,
            Direction::LowerBetter => -out.best_metric,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LengthNorm;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            layers: 1,
            heads: 2,
            width: 12,
            ff_width: 24,
            max_len: 16,
            dropout: 0.0,
            mlp_hidden: None,
            length_norm: LengthNorm::Effective,
            role_tokens: false,
            ..ModelConfig::default()
        }
    }

    fn constant_dataset() -> Vec<PropertyExample> {
        ["C", "CC", "CCC", "CCO", "CN", "CO", "CCN", "O"]
            .iter()
            .map(|s| (tokenize(s).unwrap().ids, vec![Some(0.75)]))
            .collect()
    }

    #[test]
    fn constant_labels_fit_to_near_zero_rmse() {
        let data = constant_dataset();
        let cfg = FinetuneConfig {
            batch_size: 4,
            max_epochs: 400,
            patience: 400,
            eval_every: 10,
            ..FinetuneConfig::default()
        };
        let out = finetune::<f64>(
            &tiny_cfg(),
            1,
            TaskKind::Regression,
            &InitSpec::Random { seed: 3 },
            &data,
            &data,
            EarlyStopMetric::ValidationLoss,
            &cfg,
            3e-3,
            17,
        )
        .unwrap();
        // best_metric is the validation MSE; RMSE below 1e-2 on train.
        let rmse = out.best_metric.sqrt();
        assert!(rmse < 1e-2, "rmse {rmse}");
    }

    #[test]
    fn returned_model_matches_best_not_last() {
        let data = constant_dataset();
        let cfg = FinetuneConfig {
            batch_size: 4,
            max_epochs: 30,
            patience: 6,
            eval_every: 1,
            ..FinetuneConfig::default()
        };
        let out = finetune::<f64>(
            &tiny_cfg(),
            1,
            TaskKind::Regression,
            &InitSpec::Random { seed: 4 },
            &data,
            &data,
            EarlyStopMetric::ValidationLoss,
            &cfg,
            0.2, // aggressive rate so the metric eventually worsens
            23,
        )
        .unwrap();
        let vals: Vec<(u64, f64)> = out.runlog.values_of(EventKind::ValMetric).collect();
        let best_logged = vals
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_metric, best_logged);
        assert!(out.steps_run <= out.best_step + 6, "halt within patience");
    }

    #[test]
    fn sampled_rates_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for lr in sample_lrs(200, 1e-6, 1e-3, &mut rng) {
            assert!((1e-6..=1e-3).contains(&lr), "{lr}");
        }
    }

    #[test]
    fn rigged_evaluator_finds_the_sweet_spot() {
        let cfg = LrSearchConfig {
            runs: 40,
            ..LrSearchConfig::default()
        };
        let (best, results) = lr_search_with(&cfg, 11, |lr| Ok(-(lr.log10() + 4.5).abs())).unwrap();
        let closest = results
            .iter()
            .map(|&(lr, _)| lr)
            .min_by(|a, b| {
                let da = (a.log10() + 4.5).abs();
                let db = (b.log10() + 4.5).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(best, closest);
    }

    #[test]
    fn single_run_search_returns_the_sample() {
        let cfg = LrSearchConfig {
            runs: 1,
            ..LrSearchConfig::default()
        };
        let (best, results) = lr_search_with(&cfg, 2, |_| Ok(0.0)).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(best, results[0].0);
    }

    #[test]
    fn ties_break_toward_the_smaller_rate() {
        let cfg = LrSearchConfig {
            runs: 8,
            ..LrSearchConfig::default()
        };
        let (best, results) = lr_search_with(&cfg, 5, |_| Ok(1.0)).unwrap();
        let smallest = results.iter().map(|&(lr, _)| lr).fold(f64::INFINITY, f64::min);
        assert_eq!(best, smallest);
    }
}
