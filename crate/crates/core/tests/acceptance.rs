//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! The heavy criteria generate their own corpora from the seeded generators
//! in `support`, so every run is reproducible.

mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rpt_core::data::{PropertyRecord, Reaction};
use rpt_core::eval::{
    bonferroni_level, compare_datasets, format_level, format_p, rank_biserial,
    wilcoxon_signed_rank, CrossvalSettings, DatasetSpec, Direction, MetricKind, ReportMeta,
    Sidedness,
};
use rpt_core::model::{
    aggregate, LengthNorm, ModelConfig, PreparedReaction, ReactionModel, TaskKind,
};
use rpt_core::nn::gradcheck::{check_gradient, probe_indices};
use rpt_core::nn::{
    multi_head_attention, AttentionParams, AttnMask, Checkpoint, Scalar, Tape, Tensor, Var,
};
use rpt_core::smiles::{
    detokenize, parse_smiles, tokenize, write_canonical, write_randomized, TokenSequence, PAD_ID,
};
use rpt_core::train::{
    cosine_cyclic_lr, pretrain, EarlyStopper, FinetuneConfig, LrSearchConfig, PretrainConfig,
    PretrainRun, StopDecision,
};
use rpt_core::{subseed, VERSION};

use support::{
    average_ranks_of_abs, heteroatom_count, random_molecule, random_reaction,
    wilcoxon_enumeration_p,
};

#[test]
fn acceptance_1_statistics_fidelity() {
    // Ten folds, all favoring the treated model, no ties: the ESOL-row
    // arithmetic of the evaluation protocol.
    let pairs: Vec<(f64, f64)> = (1..=10).map(|k| (1.0, 1.0 - k as f64 / 20.0)).collect();
    let outcome = wilcoxon_signed_rank(
        &pairs,
        Direction::LowerBetter,
        Sidedness::OneSidedTreatedBetter,
    )
    .unwrap();
    assert_eq!(outcome.w_plus, 55.0);
    assert_eq!(outcome.w_minus, 0.0);
    assert!(
        (outcome.p_value - 0.0009765625).abs() < 5e-6,
        "one-sided exact p {} should be 1/1024 = 0.00098",
        outcome.p_value
    );
    assert_eq!(format_p(outcome.p_value), "0.001");
    let r = rank_biserial(&pairs, Direction::LowerBetter).unwrap();
    assert_eq!(r, 1.0);
    assert_eq!(format!("{r:.3}"), "1.000");

    let level = bonferroni_level(0.05, 12);
    assert!((level - 0.05 / 12.0).abs() < 1e-15);
    assert_eq!(format_level(level), "0.00417");
    println!("ACCEPTANCE 1 (statistics fidelity): PASS");
}

#[test]
fn acceptance_2_wilcoxon_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0usize;
    let mut degenerate = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        // Coarse magnitudes force ties; zeros are legal and dropped.
        let diffs: Vec<f64> = (0..n)
            .map(|_| {
                let magnitude = rng.gen_range(0..=4) as f64 / 2.0;
                if rng.gen_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        let pairs: Vec<(f64, f64)> = diffs.iter().map(|d| (1.0, 1.0 - d)).collect();
        let result = wilcoxon_signed_rank(
            &pairs,
            Direction::LowerBetter,
            Sidedness::OneSidedTreatedBetter,
        );
        let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        if nonzero.is_empty() {
            assert!(result.is_err(), "all-zero differences must be degenerate");
            degenerate += 1;
            continue;
        }
        let outcome = result.unwrap();
        assert_eq!(outcome.n_effective, nonzero.len());
        let ranks = average_ranks_of_abs(&nonzero);
        let expected = wilcoxon_enumeration_p(&ranks, outcome.w_plus);
        assert!(
            (outcome.p_value - expected).abs() < 1e-12,
            "exact p {} differs from enumeration {}",
            outcome.p_value,
            expected
        );
        checked += 1;
    }
    assert!(checked >= 900, "most instances should be non-degenerate");
    assert!(degenerate > 0, "zero-difference instances should occur");
    println!("ACCEPTANCE 2 (wilcoxon oracle equivalence, {checked} instances): PASS");
}

#[test]
fn acceptance_3_eq1_invariants() {
    let cfg = ModelConfig {
        layers: 2,
        heads: 2,
        width: 16,
        ff_width: 32,
        max_len: 64,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let model = ReactionModel::<f64>::init(&cfg, 31).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    for case in 0..100 {
        let reaction = random_reaction(&mut rng, 6);
        let prepared = model.prepare(&reaction).unwrap();
        let mut permuted = prepared.inputs.clone();
        permuted.reverse();
        if permuted.len() > 2 {
            permuted.swap(0, 1);
        }

        let h_forward = model.reaction_vector(&prepared.inputs).unwrap();
        let h_permuted = model.reaction_vector(&permuted).unwrap();
        for (a, b) in h_forward
            .values()
            .data()
            .iter()
            .zip(h_permuted.values().data())
        {
            assert_eq!(a.to_bits(), b.to_bits(), "case {case}: h_R not bit-identical");
        }

        let target = TokenSequence::new(prepared.target.clone());
        let logits_fwd = model.decode_teacher_forced(&h_forward, &target).unwrap();
        let logits_perm = model.decode_teacher_forced(&h_permuted, &target).unwrap();
        for (a, b) in logits_fwd.data().iter().zip(logits_perm.data()) {
            assert_eq!(a.to_bits(), b.to_bits(), "case {case}: logits not bit-identical");
        }

        // Duplicating a fragment exactly doubles its additive contribution.
        let first = TokenSequence::new(prepared.inputs[0].clone());
        let encoding = model.encode_fragment(&first).unwrap();
        let single = aggregate(
            std::slice::from_ref(&encoding),
            LengthNorm::Effective,
            cfg.max_len,
        )
        .unwrap();
        let doubled = aggregate(
            &[encoding.clone(), encoding],
            LengthNorm::Effective,
            cfg.max_len,
        )
        .unwrap();
        for (two, one) in doubled.values().data().iter().zip(single.values().data()) {
            assert_eq!(two.to_bits(), (2.0 * one).to_bits(), "case {case}: doubling");
        }

        // Single-slot memory: every cross-attention weight is exactly 1.
        let trace = model.decode_traced(&h_forward, &target).unwrap();
        assert_eq!(trace.cross_attention_weights.len(), cfg.layers * cfg.heads);
        for weights in &trace.cross_attention_weights {
            assert!(weights.data().iter().all(|&w| w == 1.0));
        }
    }
    println!("ACCEPTANCE 3 (Eq.1 invariants over 100 reactions): PASS");
}

/// Finite-difference check of one tape program over every input tensor.
fn check_tape_op<B>(name: &str, inputs: &[Tensor<f64>], build: B)
where
    B: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let loss = build(&mut tape, &vars);
    assert_eq!(tape.value(loss).len(), 1, "{name}: loss must be scalar");
    let grads = tape.backward(loss).unwrap();
    for (slot, original) in inputs.iter().enumerate() {
        let Some(analytic) = grads.get(vars[slot]) else {
            continue;
        };
        let indices = probe_indices(original.len(), 10);
        check_gradient(original, analytic, &indices, 1e-5, 1e-4, |probe| {
            let mut fresh = Tape::new();
            let vs: Vec<Var> = inputs
                .iter()
                .enumerate()
                .map(|(j, t)| fresh.input(if j == slot { probe.clone() } else { t.clone() }))
                .collect();
            let l = build(&mut fresh, &vs);
            fresh.value(l).data()[0]
        })
        .unwrap_or_else(|e| panic!("{name}, input {slot}: {e}"));
    }
}

/// Reduces a matrix output to a scalar through fixed weights, so the
/// checked loss responds to every output entry asymmetrically.
fn weighted_scalar(tape: &mut Tape<f64>, out: Var, weights: &Tensor<f64>) -> Var {
    let w = tape.input(weights.clone());
    let prod = tape.mul(out, w).unwrap();
    let rows = tape.sum_rows(prod);
    let cols = tape.transpose(rows);
    tape.sum_rows(cols)
}

fn mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::normal(rows, cols, 0.8, rng)
}

/// Values bounded away from zero, for kink-free ReLU probing.
fn mat_offset(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    mat(rng, rows, cols).map(|v| if v.abs() < 0.15 { v + 0.3 } else { v })
}

#[test]
fn acceptance_4_gradient_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let w34 = mat(&mut rng, 3, 4);
    let w35 = mat(&mut rng, 3, 5);
    let w45 = mat(&mut rng, 4, 5);
    let w43 = mat(&mut rng, 4, 3);

    let x34 = mat(&mut rng, 3, 4);
    let y34 = mat(&mut rng, 3, 4);
    let x45 = mat(&mut rng, 4, 5);
    let row4 = mat(&mut rng, 1, 4);

    check_tape_op("matmul", &[x34.clone(), x45.clone(), w35.clone()], |t, v| {
        let out = t.matmul(v[0], v[1]).unwrap();
        weighted_scalar(t, out, &w35);
        let out2 = t.matmul(v[0], v[1]).unwrap();
        weighted_scalar(t, out2, &w35)
    });
    check_tape_op("add", &[x34.clone(), y34.clone()], |t, v| {
        let out = t.add(v[0], v[1]).unwrap();
        weighted_scalar(t, out, &w34)
    });
    check_tape_op("add_row", &[x34.clone(), row4.clone()], |t, v| {
        let out = t.add_row(v[0], v[1]).unwrap();
        weighted_scalar(t, out, &w34)
    });
    check_tape_op("mul", &[x34.clone(), y34.clone()], |t, v| {
        let out = t.mul(v[0], v[1]).unwrap();
        weighted_scalar(t, out, &w34)
    });
    check_tape_op("scale", &[x34.clone()], |t, v| {
        let out = t.scale(v[0], -1.7);
        weighted_scalar(t, out, &w34)
    });
    let relu_in = mat_offset(&mut rng, 3, 4);
    check_tape_op("relu", &[relu_in], |t, v| {
        let out = t.relu(v[0]);
        weighted_scalar(t, out, &w34)
    });
    check_tape_op("transpose", &[x34.clone()], |t, v| {
        let out = t.transpose(v[0]);
        weighted_scalar(t, out, &w43)
    });
    check_tape_op("pad_rows", &[x34.clone()], |t, v| {
        let out = t.pad_rows(v[0], 5).unwrap();
        let w = Tensor::filled(5, 4, 0.5);
        weighted_scalar(t, out, &w)
    });
    check_tape_op("sum_rows", &[x34.clone()], |t, v| {
        let out = t.sum_rows(v[0]);
        weighted_scalar(t, out, &row4)
    });
    check_tape_op("slice_cols", &[x45.clone()], |t, v| {
        let out = t.slice_cols(v[0], 1, 3).unwrap();
        let w = Tensor::filled(4, 3, 1.25);
        weighted_scalar(t, out, &w)
    });
    check_tape_op("concat_cols", &[x34.clone(), x34.clone()], |t, v| {
        let out = t.concat_cols(&[v[0], v[1]]).unwrap();
        let w = Tensor::filled(3, 8, 0.75);
        weighted_scalar(t, out, &w)
    });
    let table = mat(&mut rng, 7, 4);
    check_tape_op("embedding", &[table], |t, v| {
        let out = t.embedding(v[0], &[2, 5, 2, 0]).unwrap();
        let w = Tensor::filled(4, 4, 0.6);
        weighted_scalar(t, out, &w)
    });
    let gain = mat(&mut rng, 1, 4).map(|v| 1.0 + 0.2 * v);
    let bias = mat(&mut rng, 1, 4);
    check_tape_op("layer_norm", &[x34.clone(), gain, bias], |t, v| {
        let out = t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap();
        weighted_scalar(t, out, &w34)
    });
    for (label, mask) in [
        ("softmax_full", AttnMask::Full),
        ("softmax_causal", AttnMask::Causal),
        ("softmax_padding", AttnMask::KeyPadding { valid_len: 3 }),
    ] {
        let weights = w34.clone();
        check_tape_op(label, &[x34.clone()], move |t, v| {
            let out = t.softmax_rows(v[0], mask.clone()).unwrap();
            weighted_scalar(t, out, &weights)
        });
    }
    check_tape_op("dropout", &[x34.clone()], |t, v| {
        let mut drop_rng = ChaCha8Rng::seed_from_u64(777);
        let out = t.dropout(v[0], 0.3, &mut drop_rng);
        weighted_scalar(t, out, &w34)
    });
    let logits = mat(&mut rng, 4, 5);
    check_tape_op("cross_entropy", &[logits], |t, v| {
        t.cross_entropy(v[0], &[1, 4, PAD_ID, 0], PAD_ID).unwrap()
    });
    let preds = mat(&mut rng, 1, 4);
    check_tape_op("masked_mse", &[preds.clone()], |t, v| {
        t.masked_mse(v[0], &[Some(0.5), None, Some(-1.0), Some(2.0)])
            .unwrap()
    });
    check_tape_op("masked_bce_logits", &[preds], |t, v| {
        t.masked_bce_logits(v[0], &[Some(1.0), Some(0.0), None, Some(1.0)])
            .unwrap()
    });

    // Multi-head attention: gradients through every projection and input.
    let d = 6;
    let q_in = mat(&mut rng, 3, d);
    let kv_in = mat(&mut rng, 4, d);
    let mut attn_inputs = vec![q_in, kv_in];
    for _ in 0..4 {
        attn_inputs.push(mat(&mut rng, d, d));
        attn_inputs.push(mat(&mut rng, 1, d));
    }
    let w3d = mat(&mut rng, 3, d);
    check_tape_op("multi_head_attention", &attn_inputs, |t, v| {
        let params = AttentionParams {
            wq: v[2],
            bq: v[3],
            wk: v[4],
            bk: v[5],
            wv: v[6],
            bv: v[7],
            wo: v[8],
            bo: v[9],
        };
        let out = multi_head_attention::<f64, ChaCha8Rng>(
            t,
            v[0],
            v[1],
            AttnMask::Full,
            2,
            &params,
            None,
        )
        .unwrap();
        weighted_scalar(t, out, &w3d)
    });

    end_to_end_gradient_check();
    println!("ACCEPTANCE 4 (gradient correctness, ops and end-to-end): PASS");
}

/// Full pre-training loss on a 2-layer, width-8, vocab-131 model against
/// central differences, every parameter tensor probed.
fn end_to_end_gradient_check() {
    let cfg = ModelConfig {
        layers: 2,
        heads: 2,
        width: 8,
        ff_width: 16,
        max_len: 24,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    assert_eq!(cfg.vocab_size, 131);
    let mut model = ReactionModel::<f64>::init(&cfg, 44).unwrap();
    let batch: Vec<PreparedReaction> = ["CCO.C>>CCOC", "N.CO>>NCO"]
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let r = rpt_core::data::parse_reaction_line(line, i + 1).unwrap();
            model.prepare(&r).unwrap()
        })
        .collect();

    let pass = model.pretrain_loss(&batch, None).unwrap();
    let analytic = pass.backward().unwrap();
    drop(pass);

    let names: Vec<String> = model.params.names().map(str::to_string).collect();
    for name in names {
        let Some(grad) = analytic.get(&name) else {
            continue;
        };
        let original = model.params.get(&name).unwrap().clone();
        let indices = probe_indices(original.len(), 4);
        check_gradient(&original, grad, &indices, 1e-5, 1e-3, |probe| {
            model.params.set(&name, probe.clone()).unwrap();
            let loss = model.pretrain_loss(&batch, None).unwrap().loss_value();
            model.params.set(&name, original.clone()).unwrap();
            loss
        })
        .unwrap_or_else(|e| panic!("end-to-end, parameter {name}: {e}"));
    }
}

#[test]
fn acceptance_5_memorization_smoke_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let corpus: Vec<Reaction> = (0..32).map(|_| random_reaction(&mut rng, 5)).collect();

    let model_cfg = ModelConfig {
        layers: 2,
        heads: 4,
        width: 64,
        ff_width: 128,
        max_len: 56,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let train_cfg = PretrainConfig {
        epochs: 900,
        batch_size: 32,
        base_lr: 3e-4,
        max_lr: 2e-3,
        cycle_steps: Some(150),
        reaugment_each_epoch: false,
        ..PretrainConfig::default()
    };
    let seed = 55;
    let output = pretrain::<f64, _>(
        PretrainRun {
            corpus: &corpus,
            validation: None,
            model_cfg: &model_cfg,
            cfg: &train_cfg,
            seed,
            config_hash: "acceptance-5".into(),
            resume: None,
        },
        |_, _, _| Ok(()),
    )
    .unwrap();
    let model = output.model;
    let steps = output
        .runlog
        .values_of(rpt_core::train::EventKind::TrainLoss)
        .count();
    assert!(steps <= 2000, "{steps} steps exceed the budget");

    // Rebuild the exact fixed-augmentation corpus the run trained on.
    let mut aug_rng = ChaCha8Rng::seed_from_u64(subseed(seed, "pretrain-aug", 0));
    let prepared: Vec<PreparedReaction> = corpus
        .iter()
        .map(|r| {
            let augmented = rpt_core::data::augment_reaction(r, &mut aug_rng).unwrap();
            model.prepare(&augmented).unwrap()
        })
        .collect();

    let (correct, total) = model.token_accuracy(&prepared).unwrap();
    let accuracy = correct as f64 / total as f64;
    assert!(
        accuracy > 0.99,
        "teacher-forced accuracy {accuracy:.4} after {steps} steps"
    );

    for (i, p) in prepared.iter().enumerate() {
        let h = model.reaction_vector(&p.inputs).unwrap();
        let product = &corpus[i].product;
        let decoded = model
            .decode_greedy(&h, product.len() + 4)
            .unwrap();
        let text = detokenize(&decoded).unwrap();
        assert_eq!(&text, product, "reaction {i} decoded wrong product");
    }
    println!(
        "ACCEPTANCE 5 (memorization: accuracy {accuracy:.4} in {steps} steps, 32/32 products): PASS"
    );
}

#[test]
fn acceptance_6_smiles_round_trip_and_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for molecule_index in 0..1000 {
        let graph = random_molecule(&mut rng, 40, true);
        let canonical = write_canonical(&graph);
        let reparsed = parse_smiles(&canonical).unwrap_or_else(|e| {
            panic!("molecule {molecule_index}: canonical '{canonical}' fails to parse: {e}")
        });
        assert_eq!(
            write_canonical(&reparsed),
            canonical,
            "molecule {molecule_index}: canonicalization unstable"
        );
        for seed in 0..100u64 {
            let mut rand_rng = ChaCha8Rng::seed_from_u64(seed);
            let randomized = write_randomized(&graph, &mut rand_rng);
            let parsed = parse_smiles(&randomized).unwrap_or_else(|e| {
                panic!("molecule {molecule_index}, seed {seed}: '{randomized}': {e}")
            });
            let recanonicalized = write_canonical(&parsed);
            assert_eq!(
                recanonicalized, canonical,
                "molecule {molecule_index}, seed {seed}: '{randomized}'"
            );
        }
    }

    // Fuzzing: the parser returns a value or a positioned error, never
    // panics, on arbitrary byte strings.
    let mut fuzz_rng = ChaCha8Rng::seed_from_u64(616);
    let smiles_alphabet: &[u8] = b"BCNOPSFIbcnops()[]=#:-+123456789%Hl r@/\\.~{}";
    for _ in 0..100_000 {
        let len = fuzz_rng.gen_range(0..64);
        let bytes: Vec<u8> = if fuzz_rng.gen_bool(0.5) {
            (0..len).map(|_| fuzz_rng.gen::<u8>()).collect()
        } else {
            (0..len)
                .map(|_| smiles_alphabet[fuzz_rng.gen_range(0..smiles_alphabet.len())])
                .collect()
        };
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_smiles(&text);
    }
    println!("ACCEPTANCE 6 (1000-molecule round trip, 100k fuzz inputs): PASS");
}

#[test]
fn acceptance_7_scheduler_and_stopping() {
    // The schedule attains the reported endpoints exactly.
    let (base, max, cycle) = (1e-5, 5e-4, 1000u64);
    assert_eq!(cosine_cyclic_lr(0, base, max, cycle), 1e-5);
    assert_eq!(cosine_cyclic_lr(cycle / 2, base, max, cycle), 5e-4);
    assert_eq!(cosine_cyclic_lr(cycle, base, max, cycle), 1e-5);
    for step in 0..2 * cycle {
        let lr = cosine_cyclic_lr(step, base, max, cycle);
        assert!((base..=max).contains(&lr));
    }

    // Rigged metric sequence: best at step 60, never improves again.
    let mut stopper = EarlyStopper::new(40, Direction::LowerBetter);
    let metric = |step: u64| -> f64 {
        if step <= 60 {
            1000.0 - step as f64
        } else {
            980.0 + (step % 7) as f64
        }
    };
    let mut halted_at = None;
    for step in 0..10_000 {
        match stopper.observe(step, metric(step)) {
            StopDecision::Stop => {
                halted_at = Some(step);
                break;
            }
            _ => continue,
        }
    }
    let halted_at = halted_at.expect("must halt");
    let (best_step, best_metric) = stopper.best().unwrap();
    assert_eq!(best_step, 60);
    assert_eq!(best_metric, 940.0);
    assert!(
        halted_at <= best_step + 40,
        "halted at {halted_at}, best at {best_step}"
    );
    println!("ACCEPTANCE 7 (scheduler endpoints and early stopping): PASS");
}

#[test]
fn acceptance_8_transfer_signal_at_toy_scale() {
    let seed = 808;
    let mut gen_rng = ChaCha8Rng::seed_from_u64(seed);

    // Synthetic reaction grammar over the SMILES vocabulary.
    let corpus: Vec<Reaction> = (0..240).map(|_| random_reaction(&mut gen_rng, 5)).collect();
    let model_cfg = ModelConfig {
        layers: 2,
        heads: 4,
        width: 32,
        ff_width: 64,
        max_len: 56,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let pretrain_cfg = PretrainConfig {
        epochs: 120,
        batch_size: 24,
        base_lr: 1e-4,
        max_lr: 1e-3,
        cycle_steps: Some(120),
        ..PretrainConfig::default()
    };
    let pretrained = pretrain::<f64, _>(
        PretrainRun {
            corpus: &corpus,
            validation: None,
            model_cfg: &model_cfg,
            cfg: &pretrain_cfg,
            seed,
            config_hash: "acceptance-8".into(),
            resume: None,
        },
        |_, _, _| Ok(()),
    )
    .unwrap();
    let checkpoint = Checkpoint::from_params(
        "acceptance-8".into(),
        seed,
        serde_json::json!({"model": model_cfg}),
        &pretrained.model.params,
    );

    // Synthetic property over the same vocabulary: heteroatom count.
    let records: Vec<PropertyRecord> = (0..120)
        .map(|_| {
            let molecule = random_molecule(&mut gen_rng, 12, false);
            PropertyRecord {
                smiles: write_canonical(&molecule),
                labels: vec![Some(heteroatom_count(&molecule) as f64)],
            }
        })
        .collect();
    let dataset = DatasetSpec {
        name: "heteroatom-count".into(),
        records,
        kind: TaskKind::Regression,
        metric: MetricKind::Rmse,
        stratify_label: None,
        lr_search_override: None,
    };

    // Fixed 200-step budget per arm; patience never triggers inside it.
    let finetune_cfg = FinetuneConfig {
        batch_size: 28,
        max_epochs: 100,
        max_steps: Some(200),
        patience: 200,
        eval_every: 10,
        ..FinetuneConfig::default()
    };
    let search_cfg = LrSearchConfig {
        runs: 4,
        min_lr: 1e-4,
        max_lr: 3e-3,
        epochs: 10,
        max_steps: Some(30),
    };
    let settings = CrossvalSettings {
        model_cfg: &model_cfg,
        finetune: &finetune_cfg,
        lr_search: &search_cfg,
        n_folds: 10,
        seed,
        pretrained: &checkpoint,
    };
    let (report, comparisons) = compare_datasets(
        std::slice::from_ref(&dataset),
        &settings,
        0.05,
        Sidedness::OneSidedTreatedBetter,
        ReportMeta {
            config_hash: "acceptance-8".into(),
            seed,
            version: VERSION.into(),
        },
    )
    .unwrap();

    // Table-1-shaped report: one row carrying both arms' mean ± std, the
    // p-value, the effect size, and the corrected significance flag.
    assert_eq!(report.m, 1);
    assert_eq!(report.corrected_level, 0.05);
    let row = &report.rows[0];
    assert_eq!(row.dataset, "heteroatom-count");
    assert_eq!(row.metric, "rmse");
    assert_eq!(row.n_folds, 10);
    assert!(row.baseline_mean.is_finite() && row.baseline_std.is_finite());
    assert!(row.treated_mean.is_finite() && row.treated_std.is_finite());
    assert!(row.p_value > 0.0 && row.p_value <= 1.0);
    assert!((-1.0..=1.0).contains(&row.rank_biserial));
    let text = report.render_text();
    assert!(text.contains("heteroatom-count") && text.contains("±"));

    let comparison = &comparisons[0];
    assert_eq!(comparison.folds.pairs.len(), 10);
    assert_eq!(comparison.folds.to_csv().lines().count(), 11);

    // The mechanism check: pre-trained initialization is no worse on
    // validation loss than random initialization in at least 7 of 10 folds.
    let favorable = comparison
        .folds
        .validation_pairs
        .iter()
        .filter(|&&(baseline, treated)| treated <= baseline)
        .count();
    assert!(
        favorable >= 7,
        "pre-trained arm no worse in only {favorable}/10 folds \
         (validation pairs: {:?})",
        comparison.folds.validation_pairs
    );
    println!(
        "ACCEPTANCE 8 (transfer signal: pre-trained no worse in {favorable}/10 folds): PASS"
    );
}
