use std::path::Path;

use rpt_core::data::{filter_and_truncate, load_reaction_corpus, Reaction};
use rpt_core::nn::Scalar;
use rpt_core::train::{pretrain, PretrainRun};

use super::{ensure_out_dir, meta_json, write_runlog, write_text};
use crate::{CliError, Precision, RunConfig};

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    match config.precision {
        Precision::F64 => go::<f64>(config, out_dir),
        Precision::F32 => go::<f32>(config, out_dir),
    }
}

fn load_corpus(path: &Path) -> Result<Vec<Reaction>, CliError> {
    load_reaction_corpus(path)
        .map_err(|e| CliError::user(format!("corpus {}: {e}", path.display())))
}

fn go<T: Scalar>(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let corpus_path = config
        .pretrain
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::user("pretrain.corpus is not set in the config"))?;
    let corpus = load_corpus(corpus_path)?;
    let total = corpus.len();
    let (kept, dropped) = filter_and_truncate(corpus, config.pretrain.params.max_len_filter);

    ensure_out_dir(out_dir)?;
    let drop_stats = serde_json::json!({
        "meta": meta_json(config),
        "max_len": config.pretrain.params.max_len_filter,
        "total": total,
        "kept": kept.len(),
        "dropped": dropped.len(),
        "kept_fraction": if total > 0 { kept.len() as f64 / total as f64 } else { 0.0 },
        "drop_reasons": { "length": dropped.len() },
    });
    write_text(
        &out_dir.join("dropstats.json"),
        &serde_json::to_string_pretty(&drop_stats).expect("stats serialize"),
    )?;

    let validation = match &config.pretrain.val_corpus {
        Some(path) => {
            let val = load_corpus(path)?;
            let (val_kept, _) = filter_and_truncate(val, config.pretrain.params.max_len_filter);
            Some(val_kept)
        }
        None => None,
    };

    let ckpt_path = out_dir.join("best.rpt");
    let output = pretrain::<T, _>(
        PretrainRun {
            corpus: &kept,
            validation: validation.as_deref(),
            model_cfg: &config.model,
            cfg: &config.pretrain.params,
            seed: config.seed,
            config_hash: config.hash(),
            resume: None,
        },
        |ckpt, step, metric| {
            ckpt.save(&ckpt_path)
                .map_err(|e| rpt_core::train::TrainError::Sink(e.to_string()))?;
            eprintln!("step {step}: validation {metric:.6}, checkpoint updated");
            Ok(())
        },
    )
    .map_err(CliError::from_train)?;

    write_runlog(&out_dir.join("runlog.jsonl"), config, &output.runlog)?;
    println!(
        "pre-training done: {} reactions, best validation {:.6}, artifacts in {}",
        kept.len(),
        output.best_metric,
        out_dir.display()
    );
    Ok(())
}
