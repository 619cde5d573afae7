//! SMILES parsing, writing, and tokenization.
//!
//! The supported grammar is the organic subset (B, C, N, O, P, S, F, Cl, Br,
//! I and their aromatic lowercase forms), bracket atoms with charge and
//! explicit hydrogen counts, branches, ring closures (`1`–`9` and `%nn`),
//! and the bond symbols `-`, `=`, `#`, `:`. Stereochemistry markers are
//! rejected by the parser with a positioned error. There is no valence model:
//! the molecular graph exists to support randomization and canonicalization,
//! not chemistry-aware normalization.

mod canon;
mod graph;
mod parse;
mod token;
mod write;

pub use canon::{canonical_ranks, write_canonical};
pub use graph::{Atom, Bond, BondOrder, Element, MolGraph};
pub use parse::parse_smiles;
pub use token::{detokenize, tokenize, TokenSequence, BOS_ID, EOS_ID, PAD_ID, VOCAB_SIZE};
pub use write::write_randomized;

use thiserror::Error;

/// Error raised while parsing or validating a SMILES string.
///
/// `position` is the 1-based character column the error is attributed to.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("position {position}: {kind}")]
pub struct SmilesError {
    pub position: usize,
    pub kind: SmilesErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    EmptyInput,
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("unmatched ring-closure digit {digit}")]
    UnmatchedRingClosure { digit: usize },
    #[error("unknown atom symbol '{symbol}'")]
    UnknownAtomSymbol { symbol: String },
    #[error("unexpected character '{ch}'")]
    UnexpectedCharacter { ch: char },
    #[error("stereochemistry marker '{ch}' is not supported")]
    StereoNotSupported { ch: char },
    #[error("expected an atom or ring closure after a bond symbol")]
    DanglingBond,
    #[error("ring-closure bond symbols disagree")]
    RingBondMismatch,
    #[error("ring closure bonds an atom to itself")]
    RingSelfBond,
    #[error("duplicate bond between the same atom pair")]
    DuplicateBond,
    #[error("aromatic bond between non-aromatic atoms")]
    AromaticBondNonAromatic,
    #[error("branch starts before any atom")]
    BranchBeforeAtom,
    #[error("unterminated bracket atom")]
    UnterminatedBracket,
    #[error("malformed bracket atom: {detail}")]
    MalformedBracket { detail: &'static str },
    #[error("charge magnitude too large")]
    ChargeOutOfRange,
    #[error("'%' must be followed by two digits")]
    BadPercentClosure,
    #[error("'.' separates fragments; parse_smiles accepts a single fragment")]
    DotInFragment,
    #[error("non-ASCII character")]
    NonAscii,
    #[error("token id {id} is out of range")]
    TokenIdOutOfRange { id: u16 },
}

impl SmilesError {
    pub(crate) fn new(position: usize, kind: SmilesErrorKind) -> Self {
        Self { position, kind }
    }
}
