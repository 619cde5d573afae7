use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape_params::TapeParams;
use super::{aggregate, FragmentEncoding, LengthNorm, ModelConfig, ModelError, ReactionVector, LN_EPS};
use crate::data::Reaction;
use crate::nn::{
    multi_head_attention, multi_head_attention_with_weights, AttnMask, ParameterSet, Scalar, Tape,
    Tensor, Var,
};
use crate::smiles::{tokenize, TokenSequence, BOS_ID, EOS_ID, PAD_ID};

/// Role marker prepended to reagent fragments when `role_tokens` is on.
/// `~` is printable ASCII and unused by the SMILES grammar subset.
pub const REAGENT_ROLE_TOKEN: u16 = b'~' as u16;

/// Dropout behavior of a forward pass.
pub(crate) enum Mode<'r> {
    Eval,
    Train { rng: &'r mut ChaCha8Rng },
}

impl Mode<'_> {
    fn apply<T: Scalar>(&mut self, tape: &mut Tape<T>, x: Var, p: f64) -> Var {
        match self {
            Mode::Eval => x,
            Mode::Train { rng } => tape.dropout(x, p, *rng),
        }
    }
}

/// A reaction tokenized for the model: input fragment token sequences
/// (reactants then reagents) and the BOS-framed product target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedReaction {
    pub inputs: Vec<Vec<u16>>,
    pub target: Vec<u16>,
}

/// Teacher-forced decode output with the cross-attention weights of every
/// layer and head, for inspecting the single-slot memory contract.
#[derive(Debug, Clone)]
pub struct DecodeTrace<T> {
    pub logits: Tensor<T>,
    pub cross_attention_weights: Vec<Tensor<T>>,
}

/// One training pass: the tape, the loss node, and the parameter routing
/// needed to turn tape gradients back into named parameter gradients.
pub struct PretrainPass<T: Scalar> {
    pub tape: Tape<T>,
    pub loss: Var,
    tp: TapeParams,
    pub target_tokens: usize,
}

impl<T: Scalar> PretrainPass<T> {
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

/// The full pre-training architecture: fragment encoder, set aggregation,
/// and the single-slot-memory decoder over the product vocabulary.
pub struct ReactionModel<T: Scalar> {
    pub cfg: ModelConfig,
    pub params: ParameterSet<T>,
}

impl<T: Scalar> ReactionModel<T> {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        init_embedding_and_encoder(&mut params, cfg, &mut rng);
        for i in 0..cfg.layers {
            let p = format!("dec.{i}");
            init_layer_norm(&mut params, &format!("{p}.ln1"), cfg.width);
            init_attention(&mut params, &format!("{p}.self"), cfg.width, &mut rng);
            init_layer_norm(&mut params, &format!("{p}.ln2"), cfg.width);
            init_attention(&mut params, &format!("{p}.cross"), cfg.width, &mut rng);
            init_layer_norm(&mut params, &format!("{p}.ln3"), cfg.width);
            init_feed_forward(&mut params, &format!("{p}.ff"), cfg.width, cfg.ff_width, &mut rng);
        }
        init_layer_norm(&mut params, "dec.final_ln", cfg.width);
        params.insert(
            "out.w",
            Tensor::uniform_fan_in(cfg.width, cfg.vocab_size, cfg.width, &mut rng),
        );
        params.insert("out.b", Tensor::zeros(1, cfg.vocab_size));
        Ok(Self {
            cfg: cfg.clone(),
            params,
        })
    }

    /// Tokenizes a reaction: randomized-or-raw reactants and reagents become
    /// encoder inputs, the product becomes the BOS-framed decoder target.
    pub fn prepare(&self, reaction: &Reaction) -> Result<PreparedReaction, ModelError> {
        let mut inputs = Vec::with_capacity(reaction.reactants.len() + reaction.reagents.len());
        for fragment in &reaction.reactants {
            inputs.push(self.fragment_ids(fragment, false)?);
        }
        for fragment in &reaction.reagents {
            inputs.push(self.fragment_ids(fragment, true)?);
        }
        let product = tokenize(&reaction.product)?;
        let target = product.framed();
        if target.len() > self.cfg.max_len {
            return Err(ModelError::OverLength {
                len: target.len(),
                max: self.cfg.max_len,
            });
        }
        Ok(PreparedReaction {
            inputs,
            target: target.ids,
        })
    }

    fn fragment_ids(&self, fragment: &str, reagent: bool) -> Result<Vec<u16>, ModelError> {
        let tokens = tokenize(fragment)?;
        let mut ids = Vec::with_capacity(tokens.len() + 1);
        if reagent && self.cfg.role_tokens {
            ids.push(REAGENT_ROLE_TOKEN);
        }
        ids.extend_from_slice(&tokens.ids);
        if ids.is_empty() {
            return Err(ModelError::EmptyFragment);
        }
        if ids.len() > self.cfg.max_len {
            return Err(ModelError::OverLength {
                len: ids.len(),
                max: self.cfg.max_len,
            });
        }
        Ok(ids)
    }

    /// Encodes one fragment independently of any other fragment, zero-padded
    /// to the model's maximum length.
    pub fn encode_fragment(
        &self,
        tokens: &TokenSequence,
    ) -> Result<FragmentEncoding<T>, ModelError> {
        let mut tape = Tape::new();
        let tp = TapeParams::load(&mut tape, &self.params);
        let out = self.encoder_stack(&mut tape, &tp, &tokens.ids, &mut Mode::Eval)?;
        FragmentEncoding::new(tape.value(out).clone(), self.cfg.max_len)
    }

    /// Encodes all fragments of a reaction and aggregates them into the
    /// reaction vector.
    pub fn reaction_vector(
        &self,
        fragments: &[Vec<u16>],
    ) -> Result<ReactionVector<T>, ModelError> {
        let encodings = fragments
            .iter()
            .map(|ids| self.encode_fragment(&TokenSequence::new(ids.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        aggregate(&encodings, self.cfg.length_norm, self.cfg.max_len)
    }

    /// Teacher-forced decoding: causal self-attention over the target and
    /// cross-attention against the single-slot memory. Logits row `j` is the
    /// next-token distribution after consuming `target[..=j]`.
    pub fn decode_teacher_forced(
        &self,
        h_r: &ReactionVector<T>,
        target: &TokenSequence,
    ) -> Result<Tensor<T>, ModelError> {
        Ok(self.decode_traced(h_r, target)?.logits)
    }

    /// [`Self::decode_teacher_forced`] plus captured cross-attention weights.
    pub fn decode_traced(
        &self,
        h_r: &ReactionVector<T>,
        target: &TokenSequence,
    ) -> Result<DecodeTrace<T>, ModelError> {
        let mut tape = Tape::new();
        let tp = TapeParams::load(&mut tape, &self.params);
        let memory = tape.input(h_r.values().clone());
        let mut captured = Vec::new();
        let logits = self.decoder_stack(
            &mut tape,
            &tp,
            memory,
            &target.ids,
            &mut Mode::Eval,
            Some(&mut captured),
        )?;
        Ok(DecodeTrace {
            logits: tape.value(logits).clone(),
            cross_attention_weights: captured
                .into_iter()
                .map(|v| tape.value(v).clone())
                .collect(),
        })
    }

    /// Argmax decoding from BOS until EOS or `max_steps` tokens. Returns the
    /// generated content tokens (no BOS/EOS). Deterministic; ties resolve to
    /// the lowest token id.
    pub fn decode_greedy(
        &self,
        h_r: &ReactionVector<T>,
        max_steps: usize,
    ) -> Result<TokenSequence, ModelError> {
        if max_steps + 1 > self.cfg.max_len {
            return Err(ModelError::OverLength {
                len: max_steps + 1,
                max: self.cfg.max_len,
            });
        }
        let mut ids = vec![BOS_ID];
        let mut out = Vec::new();
        while out.len() < max_steps {
            let logits =
                self.decode_teacher_forced(h_r, &TokenSequence::new(ids.clone()))?;
            let last = logits.row_slice(logits.dims2().0 - 1);
            let mut best = 0usize;
            for (j, &v) in last.iter().enumerate() {
                if v > last[best] {
                    best = j;
                }
            }
            let next = best as u16;
            if next == EOS_ID {
                break;
            }
            out.push(next);
            ids.push(next);
        }
        Ok(TokenSequence::new(out))
    }

    /// Builds the full pre-training loss for a batch on one tape: encode
    /// each reaction's fragments, aggregate, decode teacher-forced, and
    /// average cross-entropy over all non-PAD target tokens in the batch.
    pub fn pretrain_loss(
        &self,
        batch: &[PreparedReaction],
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<PretrainPass<T>, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptySet);
        }
        let mut mode = match dropout_rng {
            Some(rng) => Mode::Train { rng },
            None => Mode::Eval,
        };
        let mut tape = Tape::new();
        let tp = TapeParams::load(&mut tape, &self.params);

        let mut kept_counts = Vec::with_capacity(batch.len());
        let mut losses = Vec::with_capacity(batch.len());
        for prepared in batch {
            let (loss, kept) =
                self.reaction_loss(&mut tape, &tp, prepared, &mut mode)?;
            losses.push(loss);
            kept_counts.push(kept);
        }
        let total: usize = kept_counts.iter().sum();
        if total == 0 {
            return Err(ModelError::Config(
                "batch holds no target tokens".to_string(),
            ));
        }
        // Token-level mean across the batch: weight each reaction's mean
        // loss by its share of the target tokens.
        let mut combined: Option<Var> = None;
        for (loss, kept) in losses.into_iter().zip(kept_counts) {
            let weighted = tape.scale(loss, T::from_count(kept) / T::from_count(total));
            combined = Some(match combined {
                None => weighted,
                Some(acc) => tape.add(acc, weighted)?,
            });
        }
        Ok(PretrainPass {
            loss: combined.expect("non-empty batch"),
            tape,
            tp,
            target_tokens: total,
        })
    }

    /// Teacher-forced next-token accuracy over non-PAD target positions.
    pub fn token_accuracy(
        &self,
        batch: &[PreparedReaction],
    ) -> Result<(usize, usize), ModelError> {
        let mut correct = 0usize;
        let mut total = 0usize;
        for prepared in batch {
            let h_r = self.reaction_vector(&prepared.inputs)?;
            let input = &prepared.target[..prepared.target.len() - 1];
            let logits =
                self.decode_teacher_forced(&h_r, &TokenSequence::new(input.to_vec()))?;
            for (j, &want) in prepared.target[1..].iter().enumerate() {
                if want == PAD_ID {
                    continue;
                }
                total += 1;
                let row = logits.row_slice(j);
                let mut best = 0usize;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                if best as u16 == want {
                    correct += 1;
                }
            }
        }
        Ok((correct, total))
    }

    fn reaction_loss(
        &self,
        tape: &mut Tape<T>,
        tp: &TapeParams,
        prepared: &PreparedReaction,
        mode: &mut Mode<'_>,
    ) -> Result<(Var, usize), ModelError> {
        if prepared.target.len() < 2 || prepared.target[0] != BOS_ID {
            return Err(ModelError::TargetMissingBos);
        }
        let mut encodings = Vec::with_capacity(prepared.inputs.len());
        for ids in &prepared.inputs {
            let enc = self.encoder_stack(tape, tp, ids, mode)?;
            encodings.push((enc, ids.len()));
        }
        let h_r = self.aggregate_tape(tape, &encodings)?;
        let input = &prepared.target[..prepared.target.len() - 1];
        let logits = self.decoder_stack(tape, tp, h_r, input, mode, None)?;
        let targets = &prepared.target[1..];
        let kept = targets.iter().filter(|&&t| t != PAD_ID).count();
        let loss = tape.cross_entropy(logits, targets, PAD_ID)?;
        Ok((loss, kept))
    }

    /// Sum across the fragment set in content-sorted order, then mean over
    /// the sequence axis (tape-side mirror of [`aggregate`]).
    fn aggregate_tape(
        &self,
        tape: &mut Tape<T>,
        encodings: &[(Var, usize)],
    ) -> Result<Var, ModelError> {
        if encodings.is_empty() {
            return Err(ModelError::EmptySet);
        }
        let l_eff = encodings.iter().map(|&(_, len)| len).max().unwrap();
        let mut order: Vec<usize> = (0..encodings.len()).collect();
        let key = |&(var, len): &(Var, usize), tape: &Tape<T>| -> (usize, Vec<u64>) {
            (
                len,
                tape.value(var)
                    .data()
                    .iter()
                    .map(|v| v.to_f().to_bits())
                    .collect(),
            )
        };
        order.sort_by_cached_key(|&i| key(&encodings[i], tape));
        let mut acc: Option<Var> = None;
        for &i in &order {
            let (var, len) = encodings[i];
            let padded = if len < l_eff {
                tape.pad_rows(var, l_eff)?
            } else {
                var
            };
            acc = Some(match acc {
                None => padded,
                Some(a) => tape.add(a, padded)?,
            });
        }
        let summed = tape.sum_rows(acc.expect("non-empty"));
        let divisor = match self.cfg.length_norm {
            LengthNorm::Effective => l_eff,
            LengthNorm::Strict => self.cfg.max_len,
        };
        Ok(tape.scale(summed, T::one() / T::from_count(divisor)))
    }

    /// Pre-norm transformer encoder over one fragment's tokens.
    pub(crate) fn encoder_stack(
        &self,
        tape: &mut Tape<T>,
        tp: &TapeParams,
        ids: &[u16],
        mode: &mut Mode<'_>,
    ) -> Result<Var, ModelError> {
        encoder_stack_impl(&self.cfg, tape, tp, ids, mode)
    }

    fn decoder_stack(
        &self,
        tape: &mut Tape<T>,
        tp: &TapeParams,
        memory: Var,
        input_ids: &[u16],
        mode: &mut Mode<'_>,
        mut capture: Option<&mut Vec<Var>>,
    ) -> Result<Var, ModelError> {
        let cfg = &self.cfg;
        if input_ids.is_empty() {
            return Err(ModelError::EmptyFragment);
        }
        if input_ids[0] != BOS_ID {
            return Err(ModelError::TargetMissingBos);
        }
        if input_ids.len() > cfg.max_len {
            return Err(ModelError::OverLength {
                len: input_ids.len(),
                max: cfg.max_len,
            });
        }
        if tape.value(memory).dims2() != (1, cfg.width) {
            return Err(ModelError::WidthMismatch {
                a: tape.value(memory).dims2().1,
                b: cfg.width,
            });
        }
        let table = tp.var("embed.tok");
        let emb = tape.embedding(table, input_ids)?;
        let pos = tape.input(crate::nn::positional_encoding(input_ids.len(), cfg.width));
        let mut x = tape.add(emb, pos)?;
        x = mode.apply(tape, x, cfg.dropout);

        for i in 0..cfg.layers {
            let p = format!("dec.{i}");
            let normed = layer_norm(tape, tp, &format!("{p}.ln1"), x)?;
            let self_attn = attend(
                tape,
                tp,
                &format!("{p}.self"),
                normed,
                normed,
                AttnMask::Causal,
                cfg,
                mode,
            )?;
            x = tape.add(x, self_attn)?;

            let normed = layer_norm(tape, tp, &format!("{p}.ln2"), x)?;
            let cross = attend_captured(
                tape,
                tp,
                &format!("{p}.cross"),
                normed,
                memory,
                AttnMask::Full,
                cfg,
                mode,
                capture.as_deref_mut(),
            )?;
            x = tape.add(x, cross)?;

            let normed = layer_norm(tape, tp, &format!("{p}.ln3"), x)?;
            let ff = feed_forward(tape, tp, &format!("{p}.ff"), normed, cfg, mode)?;
            x = tape.add(x, ff)?;
        }
        x = layer_norm(tape, tp, "dec.final_ln", x)?;
        let out_w = tp.var("out.w");
        let out_b = tp.var("out.b");
        let proj = tape.matmul(x, out_w)?;
        Ok(tape.add_row(proj, out_b)?)
    }
}

/// Encoder tower shared by the reaction and property models.
pub(crate) fn encoder_stack_impl<T: Scalar>(
    cfg: &ModelConfig,
    tape: &mut Tape<T>,
    tp: &TapeParams,
    ids: &[u16],
    mode: &mut Mode<'_>,
) -> Result<Var, ModelError> {
    if ids.is_empty() {
        return Err(ModelError::EmptyFragment);
    }
    if ids.len() > cfg.max_len {
        return Err(ModelError::OverLength {
            len: ids.len(),
            max: cfg.max_len,
        });
    }
    if let Some(&id) = ids.iter().find(|&&id| id > 127) {
        return Err(ModelError::EncoderSpecialToken { id });
    }
    let table = tp.var("embed.tok");
    let emb = tape.embedding(table, ids)?;
    let pos = tape.input(crate::nn::positional_encoding(ids.len(), cfg.width));
    let mut x = tape.add(emb, pos)?;
    x = mode.apply(tape, x, cfg.dropout);

    for i in 0..cfg.layers {
        let p = format!("enc.{i}");
        let normed = layer_norm(tape, tp, &format!("{p}.ln1"), x)?;
        let attn = attend(
            tape,
            tp,
            &format!("{p}.attn"),
            normed,
            normed,
            AttnMask::Full,
            cfg,
            mode,
        )?;
        x = tape.add(x, attn)?;

        let normed = layer_norm(tape, tp, &format!("{p}.ln2"), x)?;
        let ff = feed_forward(tape, tp, &format!("{p}.ff"), normed, cfg, mode)?;
        x = tape.add(x, ff)?;
    }
    layer_norm(tape, tp, "enc.final_ln", x)
}

fn layer_norm<T: Scalar>(
    tape: &mut Tape<T>,
    tp: &TapeParams,
    prefix: &str,
    x: Var,
) -> Result<Var, ModelError> {
    let g = tp.var(&format!("{prefix}.g"));
    let b = tp.var(&format!("{prefix}.b"));
    Ok(tape.layer_norm(x, g, b, T::from_f(LN_EPS))?)
}

#[allow(clippy::too_many_arguments)]
fn attend<T: Scalar>(
    tape: &mut Tape<T>,
    tp: &TapeParams,
    prefix: &str,
    queries: Var,
    keys_values: Var,
    mask: AttnMask,
    cfg: &ModelConfig,
    mode: &mut Mode<'_>,
) -> Result<Var, ModelError> {
    let params = tp.attention(prefix);
    let out = match mode {
        Mode::Eval => multi_head_attention::<T, ChaCha8Rng>(
            tape,
            queries,
            keys_values,
            mask,
            cfg.heads,
            &params,
            None,
        )?,
        Mode::Train { rng } => multi_head_attention(
            tape,
            queries,
            keys_values,
            mask,
            cfg.heads,
            &params,
            Some((cfg.dropout, *rng)),
        )?,
    };
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn attend_captured<T: Scalar>(
    tape: &mut Tape<T>,
    tp: &TapeParams,
    prefix: &str,
    queries: Var,
    keys_values: Var,
    mask: AttnMask,
    cfg: &ModelConfig,
    mode: &mut Mode<'_>,
    capture: Option<&mut Vec<Var>>,
) -> Result<Var, ModelError> {
    let params = tp.attention(prefix);
    let (out, weights) = match mode {
        Mode::Eval => multi_head_attention_with_weights::<T, ChaCha8Rng>(
            tape,
            queries,
            keys_values,
            mask,
            cfg.heads,
            &params,
            None,
        )?,
        Mode::Train { rng } => multi_head_attention_with_weights(
            tape,
            queries,
            keys_values,
            mask,
            cfg.heads,
            &params,
            Some((cfg.dropout, *rng)),
        )?,
    };
    if let Some(sink) = capture {
        sink.extend(weights);
    }
    Ok(out)
}

fn feed_forward<T: Scalar>(
    tape: &mut Tape<T>,
    tp: &TapeParams,
    prefix: &str,
    x: Var,
    cfg: &ModelConfig,
    mode: &mut Mode<'_>,
) -> Result<Var, ModelError> {
    let w1 = tp.var(&format!("{prefix}.w1"));
    let b1 = tp.var(&format!("{prefix}.b1"));
    let w2 = tp.var(&format!("{prefix}.w2"));
    let b2 = tp.var(&format!("{prefix}.b2"));
    let h = tape.matmul(x, w1)?;
    let h = tape.add_row(h, b1)?;
    let h = tape.relu(h);
    let out = tape.matmul(h, w2)?;
    let out = tape.add_row(out, b2)?;
    Ok(mode.apply(tape, out, cfg.dropout))
}

pub(crate) fn init_embedding_and_encoder<T: Scalar>(
    params: &mut ParameterSet<T>,
    cfg: &ModelConfig,
    rng: &mut ChaCha8Rng,
) {
    let std = 1.0 / (cfg.width as f64).sqrt();
    params.insert(
        "embed.tok",
        Tensor::normal(cfg.vocab_size, cfg.width, std, rng),
    );
    for i in 0..cfg.layers {
        let p = format!("enc.{i}");
        init_layer_norm(params, &format!("{p}.ln1"), cfg.width);
        init_attention(params, &format!("{p}.attn"), cfg.width, rng);
        init_layer_norm(params, &format!("{p}.ln2"), cfg.width);
        init_feed_forward(params, &format!("{p}.ff"), cfg.width, cfg.ff_width, rng);
    }
    init_layer_norm(params, "enc.final_ln", cfg.width);
}

fn init_layer_norm<T: Scalar>(params: &mut ParameterSet<T>, prefix: &str, width: usize) {
    params.insert(format!("{prefix}.g"), Tensor::filled(1, width, T::one()));
    params.insert(format!("{prefix}.b"), Tensor::zeros(1, width));
}

fn init_attention<T: Scalar>(
    params: &mut ParameterSet<T>,
    prefix: &str,
    width: usize,
    rng: &mut ChaCha8Rng,
) {
    for name in ["wq", "wk", "wv", "wo"] {
        params.insert(
            format!("{prefix}.{name}"),
            Tensor::uniform_fan_in(width, width, width, rng),
        );
    }
    for name in ["bq", "bk", "bv", "bo"] {
        params.insert(format!("{prefix}.{name}"), Tensor::zeros(1, width));
    }
}

fn init_feed_forward<T: Scalar>(
    params: &mut ParameterSet<T>,
    prefix: &str,
    width: usize,
    ff_width: usize,
    rng: &mut ChaCha8Rng,
) {
    params.insert(
        format!("{prefix}.w1"),
        Tensor::uniform_fan_in(width, ff_width, width, rng),
    );
    params.insert(format!("{prefix}.b1"), Tensor::zeros(1, ff_width));
    params.insert(
        format!("{prefix}.w2"),
        Tensor::uniform_fan_in(ff_width, width, ff_width, rng),
    );
    params.insert(format!("{prefix}.b2"), Tensor::zeros(1, width));
}
