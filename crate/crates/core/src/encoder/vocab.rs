use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Character inventory in code-point order, plus one trailing UNK row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let chars: Vec<char> = chars.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        CharVocab { chars, index }
    }

    /// Number of known character types (UNK excluded).
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Embedding rows needed: one per character plus UNK.
    pub fn rows(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn unk(&self) -> usize {
        self.chars.len()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn get(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Row index for `c`, falling back to UNK.
    pub fn index_or_unk(&self, c: char) -> usize {
        self.get(c).unwrap_or(self.unk())
    }

    pub fn union(&self, other: &CharVocab) -> CharVocab {
        CharVocab::from_chars(self.chars.iter().chain(other.chars.iter()).copied())
    }
}

/// Collects the distinct characters of `words`.
pub fn build_char_vocab<S: AsRef<str>>(words: &[S]) -> Result<CharVocab> {
    if words.is_empty() {
        return Err(Error::Empty("character vocabulary needs at least one word"));
    }
    Ok(CharVocab::from_chars(words.iter().flat_map(|w| w.as_ref().chars())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_chars() {
        let v = build_char_vocab(&["ab", "ba"]).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.chars(), &['a', 'b']);
        assert_eq!(v.unk(), 2);
        assert_eq!(v.index_or_unk('z'), 2);
    }

    #[test]
    fn single_char() {
        let v = build_char_vocab(&["aaa"]).unwrap();
        assert_eq!(v.chars(), &['a']);
        assert_eq!(v.rows(), 2);
    }

    #[test]
    fn empty_rejected() {
        let none: [&str; 0] = [];
        assert!(build_char_vocab(&none).is_err());
    }

    #[test]
    fn order_independent() {
        let a = build_char_vocab(&["zebra", "apple"]).unwrap();
        let b = build_char_vocab(&["apple", "zebra"]).unwrap();
        assert_eq!(a, b);
    }
}
