use std::path::Path;

use rpt_core::data::make_fold_plan;
use rpt_core::eval::{evaluate_metric, DatasetSpec};
use rpt_core::nn::{Checkpoint, Scalar};
use rpt_core::subseed;
use rpt_core::train::{finetune, lr_search, prepare_examples, EarlyStopMetric, InitSpec};

use super::finetune::load_checkpoint;
use super::{ensure_out_dir, load_datasets, meta_json, select_dataset, write_text};
use crate::{CliError, Precision, RunConfig};

pub fn run(
    config: &RunConfig,
    dataset: Option<&str>,
    pretrained: bool,
    out_dir: &Path,
) -> Result<(), CliError> {
    match config.precision {
        Precision::F64 => go::<f64>(config, dataset, pretrained, out_dir),
        Precision::F32 => go::<f32>(config, dataset, pretrained, out_dir),
    }
}

fn go<T: Scalar>(
    config: &RunConfig,
    dataset: Option<&str>,
    pretrained: bool,
    out_dir: &Path,
) -> Result<(), CliError> {
    if config.stats.n_folds < 4 {
        return Err(CliError::user(
            "cross-validation needs at least 4 folds to leave a training split",
        ));
    }
    let specs = load_datasets(config)?;
    let spec: &DatasetSpec = select_dataset(&specs, dataset)?;
    let tasks = spec.tasks();
    let stop_metric = EarlyStopMetric::for_task(spec.kind);
    let search_cfg = spec
        .lr_search_override
        .as_ref()
        .unwrap_or(&config.finetune.lr_search);

    let loaded: Option<Checkpoint<T>> = match (&config.finetune.init_checkpoint, pretrained) {
        (Some(path), true) => Some(load_checkpoint::<T>(path)?),
        (None, true) => {
            return Err(CliError::user(
                "--pretrained needs finetune.init_checkpoint in the config",
            ))
        }
        _ => None,
    };

    let plan = make_fold_plan(
        &spec.records,
        config.stats.n_folds,
        spec.stratify_label,
        subseed(config.seed, "cv-folds", 0),
    )
    .map_err(CliError::user)?;

    let arm = if pretrained { "treated" } else { "baseline" };
    let mut folds = Vec::new();
    for k in 0..config.stats.n_folds {
        let split = plan.rotation(k);
        let train_ex =
            prepare_examples(&spec.records, &split.training).map_err(CliError::from_train)?;
        let val_ex =
            prepare_examples(&spec.records, &split.validation).map_err(CliError::from_train)?;
        let tune_ex =
            prepare_examples(&spec.records, &split.tuning).map_err(CliError::from_train)?;
        let test_ex =
            prepare_examples(&spec.records, &split.test).map_err(CliError::from_train)?;

        let init: InitSpec<'_, T> = match &loaded {
            Some(ckpt) => InitSpec::Pretrained {
                checkpoint: ckpt,
                head_seed: subseed(config.seed, "cv-head-treated", k as u64),
            },
            None => InitSpec::Random {
                seed: subseed(config.seed, "cv-init-baseline", k as u64),
            },
        };
        let lr = match config.finetune.lr {
            Some(lr) => lr,
            None => {
                lr_search(
                    &config.model,
                    tasks,
                    spec.kind,
                    &init,
                    &train_ex,
                    &tune_ex,
                    stop_metric,
                    &config.finetune.params,
                    search_cfg,
                    subseed(config.seed, &format!("cv-lr-{arm}"), k as u64),
                )
                .map_err(CliError::from_train)?
                .0
            }
        };
        let out = finetune(
            &config.model,
            tasks,
            spec.kind,
            &init,
            &train_ex,
            &val_ex,
            stop_metric,
            &config.finetune.params,
            lr,
            subseed(config.seed, &format!("cv-ft-{arm}"), k as u64),
        )
        .map_err(CliError::from_train)?;
        let test_metric =
            evaluate_metric(&out.model, &test_ex, spec.metric).map_err(CliError::from_eval)?;
        folds.push(serde_json::json!({
            "fold": k,
            "lr": lr,
            "validation_metric": out.best_metric,
            "test_metric": test_metric,
        }));
        eprintln!("fold {k}: lr {lr:.3e}, test {} {test_metric:.6}", spec.metric.name());
    }

    let values: Vec<f64> = folds
        .iter()
        .map(|f| f["test_metric"].as_f64().unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (values.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };

    ensure_out_dir(out_dir)?;
    let report = serde_json::json!({
        "meta": meta_json(config),
        "dataset": spec.name,
        "arm": arm,
        "metric": spec.metric.name(),
        "folds": folds,
        "mean": mean,
        "std": std,
    });
    write_text(
        &out_dir.join("crossval.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_text(&out_dir.join("foldplan.json"), &plan.to_json())?;
    println!(
        "cross-validation of '{}' ({arm}): {} = {mean:.4} ± {std:.4} over {} folds",
        spec.name,
        spec.metric.name(),
        config.stats.n_folds
    );
    Ok(())
}
