use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use super::reaction::{encoder_stack_impl, init_embedding_and_encoder, Mode};
use super::tape_params::TapeParams;
use super::{ModelConfig, ModelError};
use crate::nn::{Checkpoint, ParameterSet, Scalar, Tape, Tensor, Var};
use crate::smiles::TokenSequence;

/// What the labels of a property dataset mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

/// One fine-tuning example: token ids plus per-task labels (missing labels
/// are masked out of the loss).
pub type PropertyExample = (Vec<u16>, Vec<Option<f64>>);

/// Training pass over a property batch.
pub struct PropertyPass<T: Scalar> {
    pub tape: Tape<T>,
    pub loss: Var,
    tp: TapeParams,
}

impl<T: Scalar> PropertyPass<T> {
    pub fn loss_value(&self) -> T {
        self.tape.value(self.loss).data()[0]
    }

    pub fn backward(
        &self,
    ) -> Result<std::collections::BTreeMap<String, Tensor<T>>, ModelError> {
        let grads = self.tape.backward(self.loss)?;
        Ok(self.tp.collect_grads(&grads))
    }
}

/// Fine-tuning architecture: the pre-trained (or fresh) encoder, mean
/// pooling over valid positions, and a 2-layer ReLU MLP mapping the pooled
/// vector to one output per task. All parameters train.
pub struct PropertyModel<T: Scalar> {
    pub cfg: ModelConfig,
    pub tasks: usize,
    pub params: ParameterSet<T>,
}

impl<T: Scalar> PropertyModel<T> {
    /// Randomly initialized encoder and head.
    pub fn init(cfg: &ModelConfig, tasks: usize, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        if tasks == 0 {
            return Err(ModelError::Config("tasks must be >= 1".to_string()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        init_embedding_and_encoder(&mut params, cfg, &mut rng);
        init_head(&mut params, cfg, tasks, &mut rng);
        Ok(Self {
            cfg: cfg.clone(),
            tasks,
            params,
        })
    }

    /// Encoder and embedding weights restored from a pre-training
    /// checkpoint; the head is freshly initialized from `seed`.
    pub fn from_pretrained(
        cfg: &ModelConfig,
        tasks: usize,
        seed: u64,
        checkpoint: &Checkpoint<T>,
    ) -> Result<Self, ModelError> {
        let mut model = Self::init(cfg, tasks, seed)?;
        let mut restored = 0usize;
        for (name, tensor) in checkpoint.param_tensors() {
            if !(name.starts_with("enc.") || name == "embed.tok") {
                continue;
            }
            if !model.params.contains(name) {
                return Err(ModelError::IncompatibleCheckpoint(format!(
                    "checkpoint tensor '{name}' has no slot in this config"
                )));
            }
            model
                .params
                .set(name, tensor.clone())
                .map_err(|e| ModelError::IncompatibleCheckpoint(e.to_string()))?;
            restored += 1;
        }
        let expected = model
            .params
            .names()
            .filter(|n| n.starts_with("enc.") || *n == "embed.tok")
            .count();
        if restored != expected {
            return Err(ModelError::IncompatibleCheckpoint(format!(
                "checkpoint restored {restored} of {expected} encoder tensors"
            )));
        }
        Ok(model)
    }

    /// Mean-pooled encoder output through the MLP head: one value per task
    /// (raw prediction for regression, a logit for classification).
    pub fn forward(&self, tokens: &TokenSequence) -> Result<Vec<T>, ModelError> {
        let mut tape = Tape::new();
        let tp = TapeParams::load(&mut tape, &self.params);
        let out = self.forward_tape(&mut tape, &tp, &tokens.ids, &mut Mode::Eval)?;
        Ok(tape.value(out).data().to_vec())
    }

    pub(crate) fn forward_tape(
        &self,
        tape: &mut Tape<T>,
        tp: &TapeParams,
        ids: &[u16],
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError> {
        let encoded = encoder_stack_impl(&self.cfg, tape, tp, ids, mode)?;
        let pooled = tape.sum_rows(encoded);
        let pooled = tape.scale(pooled, T::one() / T::from_count(ids.len()));
        let h = tape.matmul(pooled, tp.var("head.w1"))?;
        let h = tape.add_row(h, tp.var("head.b1"))?;
        let h = tape.relu(h);
        let out = tape.matmul(h, tp.var("head.w2"))?;
        Ok(tape.add_row(out, tp.var("head.b2"))?)
    }

    /// Batch loss: masked MSE for regression, masked per-task sigmoid
    /// cross-entropy for classification, averaged over present labels.
    pub fn batch_loss(
        &self,
        batch: &[PropertyExample],
        kind: TaskKind,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<PropertyPass<T>, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptySet);
        }
        let mut mode = match dropout_rng {
            Some(rng) => Mode::Train { rng },
            None => Mode::Eval,
        };
        let mut tape = Tape::new();
        let tp = TapeParams::load(&mut tape, &self.params);
        let mut pieces = Vec::with_capacity(batch.len());
        let mut counts = Vec::with_capacity(batch.len());
        for (ids, labels) in batch {
            if labels.len() != self.tasks {
                return Err(ModelError::Config(format!(
                    "example holds {} labels for {} tasks",
                    labels.len(),
                    self.tasks
                )));
            }
            let preds = self.forward_tape(&mut tape, &tp, ids, &mut mode)?;
            let loss = match kind {
                TaskKind::Regression => tape.masked_mse(preds, labels)?,
                TaskKind::Classification => tape.masked_bce_logits(preds, labels)?,
            };
            pieces.push(loss);
            counts.push(labels.iter().filter(|l| l.is_some()).count());
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(ModelError::Config("batch holds no labels".to_string()));
        }
        let mut combined: Option<Var> = None;
        for (loss, count) in pieces.into_iter().zip(counts) {
            let weighted = tape.scale(loss, T::from_count(count) / T::from_count(total));
            combined = Some(match combined {
                None => weighted,
                Some(acc) => tape.add(acc, weighted)?,
            });
        }
        Ok(PropertyPass {
            loss: combined.expect("non-empty batch"),
            tape,
            tp,
        })
    }

    /// Predictions for a set of examples, eval mode.
    pub fn predict(&self, ids_batch: &[Vec<u16>]) -> Result<Vec<Vec<T>>, ModelError> {
        ids_batch
            .iter()
            .map(|ids| self.forward(&TokenSequence::new(ids.clone())))
            .collect()
    }
}

fn init_head<T: Scalar>(
    params: &mut ParameterSet<T>,
    cfg: &ModelConfig,
    tasks: usize,
    rng: &mut ChaCha8Rng,
) {
    let hidden = cfg.mlp_hidden_width();
    params.insert(
        "head.w1",
        Tensor::uniform_fan_in(cfg.width, hidden, cfg.width, rng),
    );
    params.insert("head.b1", Tensor::zeros(1, hidden));
    params.insert(
        "head.w2",
        Tensor::uniform_fan_in(hidden, tasks, hidden, rng),
    );
    params.insert("head.b2", Tensor::zeros(1, tasks));
}
