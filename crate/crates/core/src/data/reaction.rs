use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::smiles::{parse_smiles, write_canonical, write_randomized};

/// A single-product reaction: reactant and reagent fragment sets plus the
/// one product fragment, all as SMILES strings validated to parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub reactants: Vec<String>,
    pub reagents: Vec<String>,
    pub product: String,
}

impl Reaction {
    /// All fragments in reading order: reactants, reagents, product.
    pub fn fragments(&self) -> impl Iterator<Item = &str> {
        self.reactants
            .iter()
            .chain(self.reagents.iter())
            .map(String::as_str)
            .chain(std::iter::once(self.product.as_str()))
    }

    /// Reactants and reagents: the set the encoder consumes.
    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.reactants
            .iter()
            .chain(self.reagents.iter())
            .map(String::as_str)
    }
}

/// Parses one `reactants>reagents>product` line. `line_no` is used in error
/// messages (1-based).
pub fn parse_reaction_line(line: &str, line_no: usize) -> Result<Reaction, DataError> {
    let parts: Vec<&str> = line.split('>').collect();
    if parts.len() != 3 {
        return Err(DataError::ReactionSeparators {
            line: line_no,
            found: parts.len() - 1,
        });
    }
    let split_fragments = |field: &str| -> Vec<String> {
        field
            .split('.')
            .filter(|f| !f.is_empty())
            .map(str::to_string)
            .collect()
    };
    let reactants = split_fragments(parts[0]);
    let reagents = split_fragments(parts[1]);
    let products = split_fragments(parts[2]);
    if products.is_empty() {
        return Err(DataError::NoProduct { line: line_no });
    }
    if products.len() > 1 {
        return Err(DataError::MultiProduct { line: line_no });
    }
    if reactants.is_empty() {
        return Err(DataError::NoReactants { line: line_no });
    }
    let reaction = Reaction {
        reactants,
        reagents,
        product: products.into_iter().next().unwrap(),
    };
    for fragment in reaction.fragments() {
        if let Err(source) = parse_smiles(fragment) {
            return Err(DataError::BadFragment {
                line: line_no,
                fragment: fragment.to_string(),
                source,
            });
        }
    }
    Ok(reaction)
}

/// Loads a reaction corpus: one reaction per non-empty line.
pub fn load_reaction_corpus(path: &Path) -> Result<Vec<Reaction>, DataError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut reactions = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        reactions.push(parse_reaction_line(trimmed, i + 1)?);
    }
    Ok(reactions)
}

/// Why a reaction was dropped during filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Some fragment SMILES exceeds the length limit.
    Length,
}

#[derive(Debug, Clone)]
pub struct DroppedReaction {
    pub reaction: Reaction,
    pub reason: DropReason,
}

/// Keeps reactions whose fragment SMILES all fit within `max_len` characters
/// (inclusive) and records a drop reason for the rest. Over-length reactions
/// are excluded whole rather than string-truncated, which would produce
/// invalid molecules.
pub fn filter_and_truncate(
    reactions: Vec<Reaction>,
    max_len: usize,
) -> (Vec<Reaction>, Vec<DroppedReaction>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for reaction in reactions {
        if reaction.fragments().all(|f| f.len() <= max_len) {
            kept.push(reaction);
        } else {
            dropped.push(DroppedReaction {
                reaction,
                reason: DropReason::Length,
            });
        }
    }
    (kept, dropped)
}

/// Rewrites each reactant and reagent as a randomized SMILES and the product
/// as its canonical form.
pub fn augment_reaction<R: Rng>(r: &Reaction, rng: &mut R) -> Result<Reaction, DataError> {
    let randomize = |fragment: &str, rng: &mut R| -> Result<String, DataError> {
        let graph = parse_smiles(fragment).map_err(|source| DataError::BadFragment {
            line: 0,
            fragment: fragment.to_string(),
            source,
        })?;
        Ok(write_randomized(&graph, rng))
    };
    let reactants = r
        .reactants
        .iter()
        .map(|f| randomize(f, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let reagents = r
        .reagents
        .iter()
        .map(|f| randomize(f, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let product_graph = parse_smiles(&r.product).map_err(|source| DataError::BadFragment {
        line: 0,
        fragment: r.product.clone(),
        source,
    })?;
    Ok(Reaction {
        reactants,
        reagents,
        product: write_canonical(&product_graph),
    })
}
