use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// `(token, tag)` pairs.
pub type Sentence = Vec<(String, String)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedCorpus {
    pub sentences: Vec<Sentence>,
    /// Tag inventory, sorted.
    pub tags: Vec<String>,
}

impl TaggedCorpus {
    /// Builds a corpus whose inventory is exactly the tags it uses.
    pub fn new(sentences: Vec<Sentence>) -> Result<Self> {
        let tags: BTreeSet<String> = sentences.iter().flatten().map(|(_, t)| t.clone()).collect();
        Self::with_tags(sentences, tags.into_iter().collect())
    }

    pub fn with_tags(sentences: Vec<Sentence>, mut tags: Vec<String>) -> Result<Self> {
        tags.sort();
        tags.dedup();
        for (i, s) in sentences.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidArgument(format!("sentence {i} is empty")));
            }
            for (tok, tag) in s {
                if tok.is_empty() {
                    return Err(Error::InvalidArgument(format!("empty token in sentence {i}")));
                }
                if tags.binary_search(tag).is_err() {
                    return Err(Error::InvalidArgument(format!("tag {tag:?} not in inventory")));
                }
            }
        }
        Ok(TaggedCorpus { sentences, tags })
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.len()).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(|(w, _)| w.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(pairs: &[(&str, &str)]) -> Sentence {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn inventory_and_validation() {
        let c = TaggedCorpus::new(vec![s(&[("the", "DT"), ("cat", "NN")]), s(&[("a", "DT")])]).unwrap();
        assert_eq!(c.tags, vec!["DT", "NN"]);
        assert_eq!(c.num_tokens(), 3);
        assert!(TaggedCorpus::new(vec![vec![]]).is_err());
        assert!(TaggedCorpus::with_tags(vec![s(&[("x", "VB")])], vec!["NN".into()]).is_err());
    }
}
