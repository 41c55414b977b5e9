use std::collections::HashMap;

use crate::error::{check_len, Error, Result};

/// Word → fixed-dimension vector, in insertion order.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.words == other.words && self.data == other.data
    }
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Adds a row. Returns `false` (leaving the table unchanged) if the word
    /// is already present.
    pub fn insert(&mut self, word: impl Into<String>, vector: &[f64]) -> Result<bool> {
        check_len("embedding row", self.dim, vector.len())?;
        let word = word.into();
        if self.index.contains_key(&word) {
            return Ok(false);
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    /// Like [`insert`](Self::insert) but a duplicate is an error.
    pub fn insert_unique(&mut self, word: impl Into<String>, vector: &[f64]) -> Result<()> {
        let word = word.into();
        if self.insert(word.clone(), vector)? {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("duplicate word {word:?}")))
        }
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words
            .iter()
            .enumerate()
            .map(move |(i, w)| (w.as_str(), self.row(i)))
    }

    /// Applies `f` to every vector in place.
    pub fn map_vectors(&mut self, mut f: impl FnMut(&mut [f64])) {
        if self.dim == 0 {
            return;
        }
        for row in self.data.chunks_exact_mut(self.dim) {
            f(row);
        }
    }
}
