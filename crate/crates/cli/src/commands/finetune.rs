use std::path::Path;

use rpt_core::data::make_fold_plan;
use rpt_core::eval::{evaluate_metric, DatasetSpec};
use rpt_core::nn::{Checkpoint, Scalar};
use rpt_core::subseed;
use rpt_core::train::{
    finetune, lr_search, prepare_examples, EarlyStopMetric, InitSpec, TrainError,
};

use super::{ensure_out_dir, load_datasets, meta_json, select_dataset, write_runlog, write_text};
use crate::{CliError, Precision, RunConfig};

pub fn run(config: &RunConfig, dataset: Option<&str>, out_dir: &Path) -> Result<(), CliError> {
    match config.precision {
        Precision::F64 => go::<f64>(config, dataset, out_dir),
        Precision::F32 => go::<f32>(config, dataset, out_dir),
    }
}

pub(crate) fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>, CliError> {
    Checkpoint::<T>::load(path)
        .map_err(|e| CliError::user(format!("checkpoint {}: {e}", path.display())))
}

fn go<T: Scalar>(config: &RunConfig, dataset: Option<&str>, out_dir: &Path) -> Result<(), CliError> {
    let specs = load_datasets(config)?;
    let spec: &DatasetSpec = select_dataset(&specs, dataset)?;
    let tasks = spec.tasks();
    let stop_metric = EarlyStopMetric::for_task(spec.kind);

    let plan = make_fold_plan(
        &spec.records,
        config.stats.n_folds,
        spec.stratify_label,
        subseed(config.seed, "cv-folds", 0),
    )
    .map_err(CliError::user)?;
    let split = plan.rotation(0);
    let train_ex = prepare_examples(&spec.records, &split.training).map_err(CliError::from_train)?;
    let val_ex = prepare_examples(&spec.records, &split.validation).map_err(CliError::from_train)?;
    let tune_ex = prepare_examples(&spec.records, &split.tuning).map_err(CliError::from_train)?;
    let test_ex = prepare_examples(&spec.records, &split.test).map_err(CliError::from_train)?;

    let loaded;
    let init: InitSpec<'_, T> = match &config.finetune.init_checkpoint {
        Some(path) => {
            loaded = load_checkpoint::<T>(path)?;
            InitSpec::Pretrained {
                checkpoint: &loaded,
                head_seed: subseed(config.seed, "ft-head", 0),
            }
        }
        None => InitSpec::Random {
            seed: subseed(config.seed, "ft-init", 0),
        },
    };

    let search_cfg = spec
        .lr_search_override
        .as_ref()
        .unwrap_or(&config.finetune.lr_search);
    let lr = match config.finetune.lr {
        Some(lr) => lr,
        None => {
            let (lr, _) = lr_search(
                &config.model,
                tasks,
                spec.kind,
                &init,
                &train_ex,
                &tune_ex,
                stop_metric,
                &config.finetune.params,
                search_cfg,
                subseed(config.seed, "ft-lr", 0),
            )
            .map_err(CliError::from_train)?;
            lr
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
        subseed(config.seed, "ft-run", 0),
    )
    .map_err(CliError::from_train)?;
    let test_metric =
        evaluate_metric(&out.model, &test_ex, spec.metric).map_err(CliError::from_eval)?;

    ensure_out_dir(out_dir)?;
    let ckpt = Checkpoint::from_params(
        config.hash(),
        config.seed,
        serde_json::json!({
            "kind": "finetune",
            "model": config.model,
            "dataset": spec.name,
            "tasks": tasks,
            "lr": lr,
        }),
        &out.model.params,
    );
    ckpt.save(&out_dir.join("finetuned.rpt"))
        .map_err(|e| CliError::from_train(TrainError::Sink(e.to_string())))?;
    write_runlog(&out_dir.join("runlog.jsonl"), config, &out.runlog)?;
    let summary = serde_json::json!({
        "meta": meta_json(config),
        "dataset": spec.name,
        "metric": spec.metric.name(),
        "lr": lr,
        "best_validation_metric": out.best_metric,
        "best_step": out.best_step,
        "steps_run": out.steps_run,
        "test_metric": test_metric,
    });
    write_text(
        &out_dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "fine-tuned '{}': lr {lr:.3e}, best validation {:.6}, test {} {:.6}",
        spec.name,
        out.best_metric,
        spec.metric.name(),
        test_metric
    );
    Ok(())
}
