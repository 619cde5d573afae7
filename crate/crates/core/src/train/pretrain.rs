use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::runlog::{EventKind, RunLog};
use super::schedule::cosine_cyclic_lr;
use super::{PretrainConfig, TrainError};
use crate::data::{augment_reaction, Reaction};
use crate::model::{ModelConfig, PreparedReaction, ReactionModel};
use crate::nn::{clip_global_norm, Checkpoint, Scalar};
use crate::subseed;

/// One pre-training job. `resume` continues from a checkpoint written by a
/// previous run of the same configuration (epoch-boundary granularity).
pub struct PretrainRun<'a, T: Scalar> {
    pub corpus: &'a [Reaction],
    pub validation: Option<&'a [Reaction]>,
    pub model_cfg: &'a ModelConfig,
    pub cfg: &'a PretrainConfig,
    pub seed: u64,
    pub config_hash: String,
    pub resume: Option<&'a Checkpoint<T>>,
}

pub struct PretrainOutput<T: Scalar> {
    pub model: ReactionModel<T>,
    /// Snapshot at the best validation metric, with optimizer state.
    pub best: Checkpoint<T>,
    pub best_metric: f64,
    pub runlog: RunLog,
}

/// Teacher-forced reaction-prediction pre-training: randomized reactant and
/// reagent SMILES (re-drawn every epoch by default), canonical product
/// targets, cross-entropy ignoring PAD, AdamW under the cosine cyclic
/// schedule. `on_improve` fires at every validation improvement with a
/// checkpoint that includes optimizer state and resume information.
pub fn pretrain<T, F>(run: PretrainRun<'_, T>, mut on_improve: F) -> Result<PretrainOutput<T>, TrainError>
where
    T: Scalar,
    F: FnMut(&Checkpoint<T>, u64, f64) -> Result<(), TrainError>,
{
    run.cfg.validate()?;
    run.model_cfg.validate().map_err(TrainError::Model)?;
    if run.corpus.is_empty() {
        return Err(TrainError::Config("empty pre-training corpus".to_string()));
    }

    let mut model = ReactionModel::<T>::init(run.model_cfg, subseed(run.seed, "model-init", 0))?;
    let mut start_epoch = 0usize;
    let mut step: u64 = 0;
    if let Some(ckpt) = run.resume {
        ckpt.restore_into(&mut model.params)
            .map_err(TrainError::Nn)?;
        start_epoch = ckpt
            .meta
            .pointer("/run_state/next_epoch")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as usize;
        step = ckpt
            .meta
            .pointer("/run_state/global_step")
            .and_then(|v| v.as_u64())
            .unwrap_or(0);
    }

    let n = run.corpus.len();
    let steps_per_epoch = n.div_ceil(run.cfg.batch_size);
    let cycle = run.cfg.cycle_steps.unwrap_or(steps_per_epoch).max(2) as u64;

    // Validation reactions are augmented once with a fixed stream so the
    // metric is comparable across epochs.
    let validation = match run.validation {
        Some(reactions) => {
            let mut rng = ChaCha8Rng::seed_from_u64(subseed(run.seed, "pretrain-val-aug", 0));
            Some(prepare_all(&model, reactions, &mut rng)?)
        }
        None => None,
    };

    let mut runlog = RunLog::new();
    let mut best_metric = f64::INFINITY;
    let mut best: Option<Checkpoint<T>> = None;

    let mut fixed_augmented: Option<Vec<PreparedReaction>> = None;
    for epoch in start_epoch..run.cfg.epochs {
        let prepared: Vec<PreparedReaction> = if run.cfg.reaugment_each_epoch {
            let mut rng =
                ChaCha8Rng::seed_from_u64(subseed(run.seed, "pretrain-aug", epoch as u64));
            prepare_all(&model, run.corpus, &mut rng)?
        } else {
            if fixed_augmented.is_none() {
                let mut rng = ChaCha8Rng::seed_from_u64(subseed(run.seed, "pretrain-aug", 0));
                fixed_augmented = Some(prepare_all(&model, run.corpus, &mut rng)?);
            }
            fixed_augmented.clone().unwrap()
        };

        let mut order: Vec<usize> = (0..n).collect();
        let mut order_rng =
            ChaCha8Rng::seed_from_u64(subseed(run.seed, "pretrain-order", epoch as u64));
        order.shuffle(&mut order_rng);
        let mut dropout_rng =
            ChaCha8Rng::seed_from_u64(subseed(run.seed, "pretrain-dropout", epoch as u64));

        let mut epoch_loss_sum = 0.0;
        let mut epoch_token_sum = 0usize;
        for chunk in order.chunks(run.cfg.batch_size) {
            let batch: Vec<PreparedReaction> =
                chunk.iter().map(|&i| prepared[i].clone()).collect();
            let lr = cosine_cyclic_lr(step, run.cfg.base_lr, run.cfg.max_lr, cycle);
            let pass = model.pretrain_loss(&batch, Some(&mut dropout_rng))?;
            let loss = pass.loss_value().to_f();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    step,
                    reaction_ids: chunk.to_vec(),
                });
            }
            let mut grads = pass.backward()?;
            if let Some(max_norm) = run.cfg.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            model.params.adamw_step(&grads, lr, &run.cfg.adamw)?;
            runlog.push(step, EventKind::TrainLoss, loss);
            runlog.push(step, EventKind::LearningRate, lr);
            epoch_loss_sum += loss * pass.target_tokens as f64;
            epoch_token_sum += pass.target_tokens;
            step += 1;
        }

        let metric = match &validation {
            Some(val) => eval_loss(&model, val)?,
            None => epoch_loss_sum / epoch_token_sum.max(1) as f64,
        };
        runlog.push(step, EventKind::ValMetric, metric);
        if metric < best_metric {
            best_metric = metric;
            let ckpt = snapshot(&model, run.seed, &run.config_hash, epoch + 1, step);
            runlog.push(step, EventKind::BestCheckpoint, metric);
            on_improve(&ckpt, step, metric)?;
            best = Some(ckpt);
        }
    }

    let best = best.unwrap_or_else(|| {
        snapshot(&model, run.seed, &run.config_hash, run.cfg.epochs, step)
    });
    Ok(PretrainOutput {
        model,
        best,
        best_metric,
        runlog,
    })
}

fn snapshot<T: Scalar>(
    model: &ReactionModel<T>,
    seed: u64,
    config_hash: &str,
    next_epoch: usize,
    global_step: u64,
) -> Checkpoint<T> {
    let meta = serde_json::json!({
        "kind": "pretrain",
        "model": model.cfg,
        "run_state": { "next_epoch": next_epoch, "global_step": global_step },
    });
    Checkpoint::from_params(config_hash.to_string(), seed, meta, &model.params)
}

fn prepare_all<T: Scalar>(
    model: &ReactionModel<T>,
    reactions: &[Reaction],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PreparedReaction>, TrainError> {
    reactions
        .iter()
        .map(|r| {
            let augmented = augment_reaction(r, rng)?;
            Ok(model.prepare(&augmented)?)
        })
        .collect()
}

/// Token-weighted mean teacher-forced loss in eval mode.
fn eval_loss<T: Scalar>(
    model: &ReactionModel<T>,
    prepared: &[PreparedReaction],
) -> Result<f64, TrainError> {
    let mut loss_sum = 0.0;
    let mut tokens = 0usize;
    for chunk in prepared.chunks(64) {
        let pass = model.pretrain_loss(chunk, None)?;
        loss_sum += pass.loss_value().to_f() * pass.target_tokens as f64;
        tokens += pass.target_tokens;
    }
    Ok(loss_sum / tokens.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_reaction_line;
    use crate::model::LengthNorm;

    fn tiny_model_cfg() -> ModelConfig {
        ModelConfig {
            layers: 1,
            heads: 2,
            width: 12,
            ff_width: 24,
            max_len: 20,
            dropout: 0.1,
            mlp_hidden: None,
            length_norm: LengthNorm::Effective,
            role_tokens: false,
            ..ModelConfig::default()
        }
    }

    fn tiny_corpus() -> Vec<Reaction> {
        ["CCO>>CCO", "CC.O>>CCO", "C.N>>CN", "CCN>O>CCN"]
            .iter()
            .enumerate()
            .map(|(i, s)| parse_reaction_line(s, i + 1).unwrap())
            .collect()
    }

    fn tiny_train_cfg(epochs: usize) -> PretrainConfig {
        PretrainConfig {
            epochs,
            batch_size: 2,
            cycle_steps: Some(8),
            ..PretrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases_and_log_is_reproducible() {
        let corpus = tiny_corpus();
        let cfg = tiny_train_cfg(4);
        let mcfg = tiny_model_cfg();
        let run = || {
            pretrain::<f64, _>(
                PretrainRun {
                    corpus: &corpus,
                    validation: None,
                    model_cfg: &mcfg,
                    cfg: &cfg,
                    seed: 5,
                    config_hash: "h".into(),
                    resume: None,
                },
                |_, _, _| Ok(()),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.runlog.series(), b.runlog.series(), "bit-identical series");
        let losses: Vec<f64> = a.runlog.values_of(EventKind::TrainLoss).map(|(_, v)| v).collect();
        assert!(losses.last().unwrap() < losses.first().unwrap());
        assert!(a.best_metric.is_finite());
    }

    #[test]
    fn resume_from_epoch_boundary_matches_uninterrupted_run() {
        let corpus = tiny_corpus();
        let mcfg = tiny_model_cfg();
        let full_cfg = tiny_train_cfg(4);
        let run = PretrainRun::<f64> {
            corpus: &corpus,
            validation: None,
            model_cfg: &mcfg,
            cfg: &full_cfg,
            seed: 9,
            config_hash: "h".into(),
            resume: None,
        };
        let uninterrupted = pretrain(run, |_, _, _| Ok(())).unwrap();

        // First half: stop after two epochs and capture the boundary state.
        let half_cfg = tiny_train_cfg(2);
        let half = pretrain::<f64, _>(
            PretrainRun {
                corpus: &corpus,
                validation: None,
                model_cfg: &mcfg,
                cfg: &half_cfg,
                seed: 9,
                config_hash: "h".into(),
                resume: None,
            },
            |_, _, _| Ok(()),
        )
        .unwrap();
        let boundary = snapshot(&half.model, 9, "h", 2, 2 * 2);

        let resumed = pretrain::<f64, _>(
            PretrainRun {
                corpus: &corpus,
                validation: None,
                model_cfg: &mcfg,
                cfg: &full_cfg,
                seed: 9,
                config_hash: "h".into(),
                resume: Some(&boundary),
            },
            |_, _, _| Ok(()),
        )
        .unwrap();

        for name in uninterrupted.model.params.names() {
            assert_eq!(
                uninterrupted.model.params.get(name).unwrap(),
                resumed.model.params.get(name).unwrap(),
                "parameter {name} diverged after resume"
            );
        }
    }
}
