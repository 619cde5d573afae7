use serde::{Deserialize, Serialize};

use super::{SmilesError, SmilesErrorKind};

/// Padding token id.
pub const PAD_ID: u16 = 128;
/// Beginning-of-sequence token id.
pub const BOS_ID: u16 = 129;
/// End-of-sequence token id.
pub const EOS_ID: u16 = 130;
/// Vocabulary size: 128 ASCII codes plus PAD, BOS, EOS.
pub const VOCAB_SIZE: usize = 131;

/// A sequence of token ids. Ids 0–127 are ASCII codes; 128–130 are the
/// reserved PAD/BOS/EOS markers, which never appear inside a character span
/// produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u16>,
}

impl TokenSequence {
    pub fn new(ids: Vec<u16>) -> Self {
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Wraps content ids as a decoder target: BOS + ids + EOS.
    pub fn framed(&self) -> TokenSequence {
        let mut ids = Vec::with_capacity(self.ids.len() + 2);
        ids.push(BOS_ID);
        ids.extend_from_slice(&self.ids);
        ids.push(EOS_ID);
        TokenSequence { ids }
    }
}

/// Maps each character to its ASCII code. Non-ASCII input is rejected with
/// the 1-based character position.
pub fn tokenize(s: &str) -> Result<TokenSequence, SmilesError> {
    let mut ids = Vec::with_capacity(s.len());
    for (i, ch) in s.chars().enumerate() {
        if !ch.is_ascii() {
            return Err(SmilesError::new(i + 1, SmilesErrorKind::NonAscii));
        }
        ids.push(ch as u16);
    }
    Ok(TokenSequence { ids })
}

/// Inverse of [`tokenize`]. Ids above 127 (including PAD/BOS/EOS) are
/// rejected: framing tokens are not characters.
pub fn detokenize(t: &TokenSequence) -> Result<String, SmilesError> {
    let mut out = String::with_capacity(t.ids.len());
    for (i, &id) in t.ids.iter().enumerate() {
        if id > 127 {
            return Err(SmilesError::new(
                i + 1,
                SmilesErrorKind::TokenIdOutOfRange { id },
            ));
        }
        out.push(id as u8 as char);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_codes() {
        assert_eq!(tokenize("CCO").unwrap().ids, vec![67, 67, 79]);
    }

    #[test]
    fn empty_string() {
        assert!(tokenize("").unwrap().ids.is_empty());
        assert_eq!(detokenize(&TokenSequence::new(vec![])).unwrap(), "");
    }

    #[test]
    fn detokenize_ascii() {
        assert_eq!(detokenize(&TokenSequence::new(vec![99, 49])).unwrap(), "c1");
    }

    #[test]
    fn non_ascii_rejected_with_position() {
        let err = tokenize("CCµO").unwrap_err();
        assert_eq!(err.position, 3);
        assert_eq!(err.kind, SmilesErrorKind::NonAscii);
    }

    #[test]
    fn specials_are_not_characters() {
        for id in [PAD_ID, BOS_ID, EOS_ID, 300] {
            let err = detokenize(&TokenSequence::new(vec![67, id])).unwrap_err();
            assert_eq!(err.position, 2);
            assert_eq!(err.kind, SmilesErrorKind::TokenIdOutOfRange { id });
        }
    }

    #[test]
    fn framed_adds_bos_eos() {
        let t = tokenize("CO").unwrap().framed();
        assert_eq!(t.ids, vec![BOS_ID, 67, 79, EOS_ID]);
    }
}
