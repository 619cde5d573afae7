//! Reaction corpora, property datasets, and cross-validation fold plans.
//!
//! Reaction corpora are UTF-8 text with one `reactants>reagents>product`
//! line per reaction ('.'-separated fragments, reagents may be empty).
//! Property data is CSV with a `smiles,task1,...,taskT` header; empty cells
//! are missing labels. Fold plans serialize to JSON for reproducibility.

mod folds;
mod property;
mod reaction;

pub use folds::{make_fold_plan, FoldPlan, RoleSplit};
pub use property::{load_property_csv, load_property_csv_reader, PropertyRecord};
pub use reaction::{
    augment_reaction, filter_and_truncate, load_reaction_corpus, parse_reaction_line, DropReason,
    DroppedReaction, Reaction,
};

use crate::smiles::SmilesError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: expected 'reactants>reagents>product' with two '>' separators, found {found}")]
    ReactionSeparators { line: usize, found: usize },
    #[error("line {line}: multi-product")]
    MultiProduct { line: usize },
    #[error("line {line}: missing product fragment")]
    NoProduct { line: usize },
    #[error("line {line}: reactants must be non-empty")]
    NoReactants { line: usize },
    #[error("line {line}, fragment '{fragment}': {source}")]
    BadFragment {
        line: usize,
        fragment: String,
        source: SmilesError,
    },
    #[error("missing header row; expected 'smiles,task1,...'")]
    MissingHeader,
    #[error("header must start with 'smiles', found '{found}'")]
    BadHeader { found: String },
    #[error("header declares no task columns")]
    NoTasks,
    #[error("row {row}: expected {expected} cells, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column}: cannot parse '{cell}' as a number")]
    BadNumericCell {
        row: usize,
        column: usize,
        cell: String,
    },
    #[error("row {row}: no label present")]
    NoLabels { row: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("need at least 3 folds for the test/validation/tuning roles, got {0}")]
    TooFewFolds(usize),
    #[error("{records} records cannot fill {folds} folds")]
    TooManyFolds { records: usize, folds: usize },
    #[error("stratification needs a binary label present on every record; record {record} has {found}")]
    BadStratifyLabel { record: usize, found: String },
    #[error("stratification label index {index} is out of range for {tasks} tasks")]
    StratifyIndexOutOfRange { index: usize, tasks: usize },
    #[error("fold plan invalid: {0}")]
    InvalidFoldPlan(String),
}
