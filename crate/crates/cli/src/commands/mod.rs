pub mod compare;
pub mod crossval;
pub mod finetune;
pub mod pretrain;
pub mod smiles;

use std::path::Path;

use rpt_core::data::load_property_csv;
use rpt_core::eval::DatasetSpec;

use crate::{CliError, RunConfig};

pub(crate) fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::user(format!("cannot create {}: {e}", path.display())))
}

/// `{config_hash, seed, version}`, embedded in every artifact.
pub(crate) fn meta_json(config: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "config_hash": config.hash(),
        "seed": config.seed,
        "version": rpt_core::VERSION,
    })
}

pub(crate) fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

/// Loads every configured dataset into a spec the evaluation layer accepts.
pub(crate) fn load_datasets(config: &RunConfig) -> Result<Vec<DatasetSpec>, CliError> {
    config
        .data
        .datasets
        .iter()
        .map(|entry| {
            let records = load_property_csv(&entry.path).map_err(|e| {
                CliError::user(format!("dataset '{}' ({}): {e}", entry.name, entry.path.display()))
            })?;
            Ok(DatasetSpec {
                name: entry.name.clone(),
                records,
                kind: entry.task,
                metric: entry.metric,
                stratify_label: entry.stratify_label,
                lr_search_override: entry.lr_search.clone(),
            })
        })
        .collect()
}

pub(crate) fn select_dataset<'a>(
    specs: &'a [DatasetSpec],
    name: Option<&str>,
) -> Result<&'a DatasetSpec, CliError> {
    match name {
        Some(name) => specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CliError::user(format!("no dataset named '{name}' in the config"))),
        None => match specs {
            [single] => Ok(single),
            [] => Err(CliError::user("no datasets configured under data.datasets")),
            _ => Err(CliError::user(
                "several datasets configured; pick one with --dataset",
            )),
        },
    }
}

/// Writes a run log as JSON lines, preceded by one meta line carrying
/// `{config_hash, seed, version}`.
pub(crate) fn write_runlog(
    path: &Path,
    config: &RunConfig,
    runlog: &rpt_core::train::RunLog,
) -> Result<(), CliError> {
    let mut text = serde_json::to_string(&meta_json(config)).expect("meta serializes");
    text.push('\n');
    text.push_str(&runlog.to_jsonl());
    write_text(path, &text)
}
