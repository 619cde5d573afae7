use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// One molecule with its task labels. `None` marks a missing label; such
/// entries are masked out of losses and metrics per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub smiles: String,
    pub labels: Vec<Option<f64>>,
}

/// Loads a property CSV with header `smiles,task1,...,taskT`.
pub fn load_property_csv(path: &Path) -> Result<Vec<PropertyRecord>, DataError> {
    let file = std::fs::File::open(path)?;
    load_property_csv_reader(file)
}

pub fn load_property_csv_reader<R: std::io::Read>(
    reader: R,
) -> Result<Vec<PropertyRecord>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = reader.headers().map_err(|_| DataError::MissingHeader)?;
    if headers.is_empty() {
        return Err(DataError::MissingHeader);
    }
    let first = headers.get(0).unwrap_or("");
    if first != "smiles" {
        return Err(DataError::BadHeader {
            found: first.to_string(),
        });
    }
    let tasks = headers.len() - 1;
    if tasks == 0 {
        return Err(DataError::NoTasks);
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i + 2; // 1-based, after the header
        if row.len() != tasks + 1 {
            return Err(DataError::RowArity {
                row: row_no,
                expected: tasks + 1,
                found: row.len(),
            });
        }
        let smiles = row.get(0).unwrap().to_string();
        let mut labels = Vec::with_capacity(tasks);
        for t in 0..tasks {
            let cell = row.get(t + 1).unwrap().trim();
            if cell.is_empty() {
                labels.push(None);
            } else {
                let value: f64 = cell.parse().map_err(|_| DataError::BadNumericCell {
                    row: row_no,
                    column: t + 2,
                    cell: cell.to_string(),
                })?;
                labels.push(Some(value));
            }
        }
        if labels.iter().all(Option::is_none) {
            return Err(DataError::NoLabels { row: row_no });
        }
        records.push(PropertyRecord { smiles, labels });
    }
    Ok(records)
}
