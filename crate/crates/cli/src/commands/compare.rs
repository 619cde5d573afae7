use std::path::Path;

use rpt_core::eval::{compare_datasets, CrossvalSettings, ReportMeta};
use rpt_core::nn::Scalar;

use super::finetune::load_checkpoint;
use super::{ensure_out_dir, load_datasets, write_text};
use crate::{CliError, Precision, RunConfig};

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    match config.precision {
        Precision::F64 => go::<f64>(config, out_dir),
        Precision::F32 => go::<f32>(config, out_dir),
    }
}

fn go<T: Scalar>(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let specs = load_datasets(config)?;
    if specs.is_empty() {
        return Err(CliError::user("no datasets configured under data.datasets"));
    }
    let ckpt_path = config.finetune.init_checkpoint.as_ref().ok_or_else(|| {
        CliError::user(
            "comparison requires a pre-trained arm: set finetune.init_checkpoint",
        )
    })?;
    let pretrained = load_checkpoint::<T>(ckpt_path)?;

    let settings = CrossvalSettings {
        model_cfg: &config.model,
        finetune: &config.finetune.params,
        lr_search: &config.finetune.lr_search,
        n_folds: config.stats.n_folds,
        seed: config.seed,
        pretrained: &pretrained,
    };
    let meta = ReportMeta {
        config_hash: config.hash(),
        seed: config.seed,
        version: rpt_core::VERSION.to_string(),
    };
    let (report, comparisons) = compare_datasets(
        &specs,
        &settings,
        config.stats.alpha,
        config.stats.sidedness,
        meta,
    )
    .map_err(CliError::from_eval)?;

    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("report.json"), &report.to_json())?;
    write_text(&out_dir.join("report.txt"), &report.render_text())?;
    for comparison in &comparisons {
        let name = &comparison.folds.dataset;
        write_text(
            &out_dir.join(format!("{name}.folds.csv")),
            &comparison.folds.to_csv(),
        )?;
        write_text(
            &out_dir.join(format!("{name}.foldplan.json")),
            &comparison.fold_plan.to_json(),
        )?;
    }
    print!("{}", report.render_text());
    Ok(())
}
