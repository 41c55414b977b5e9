//! Synthetic teacher embeddings with matching similarity and analogy gold
//! data, for experiments at desk scale.
//!
//! Words are built as `prefix + middle + suffix`. A prefix is a
//! consonant-vowel pair, the middle one or two random letters, and the
//! suffix one of [`SUFFIXES`]. Every stem appears at least with the empty
//! suffix and with `r`, so "append r" analogies (`wise : wiser :: free :
//! freer`) always exist.
//!
//! In coherent mode a word's vector is `A[prefix] + B[suffix]` with Gaussian
//! rows `A`, `B`; words that share prefix and suffix therefore share their
//! vector. Noisy mode replaces a random subset of rows by outliers, and
//! incoherent mode draws every row independently. Gold similarity scores
//! are `5·(cos + 1)` of the coherent vectors (of the table itself in
//! incoherent mode).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{cosine_similarity, AnalogyDataset, AnalogyQuestion, SimilarityDataset, SimilarityPair};
use crate::rng::{derive, stream, SeededRng};

pub const SUFFIXES: [&str; 6] = ["", "r", "s", "ed", "ing", "ly"];

const CONSONANTS: &[u8] = b"bcdfghjklmnpstvwz";
const VOWELS: &[u8] = b"aeiou";
/// Outliers are the coherent vector plus this multiple of Gaussian noise.
const OUTLIER_SCALE: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coherence {
    Coherent,
    Noisy,
    Incoherent,
}

impl Coherence {
    pub fn name(self) -> &'static str {
        match self {
            Coherence::Coherent => "coherent",
            Coherence::Noisy => "noisy",
            Coherence::Incoherent => "incoherent",
        }
    }
}

impl fmt::Display for Coherence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Coherence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Coherence::Coherent, Coherence::Noisy, Coherence::Incoherent]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown coherence mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub vocab: usize,
    pub dim: usize,
    pub mode: Coherence,
    /// Outlier probability per word, used in noisy mode.
    pub noise_rate: f64,
}

impl SyntheticSpec {
    pub fn new(seed: u64, vocab: usize, dim: usize, mode: Coherence) -> Self {
        SyntheticSpec {
            seed,
            vocab,
            dim,
            mode,
            noise_rate: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticTeacher {
    pub table: EmbeddingTable,
    pub similarity: SimilarityDataset,
    pub analogy: AnalogyDataset,
    /// `outliers[i]` marks row `i` of `table` as an outlier.
    pub outliers: Vec<bool>,
}

struct Word {
    text: String,
    prefix: usize,
    family: usize,
    suffix: usize,
}

fn gaussian(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn build_words(vocab: usize, rng: &mut SeededRng) -> Vec<Word> {
    let mut prefixes: Vec<String> = CONSONANTS
        .iter()
        .flat_map(|&c| VOWELS.iter().map(move |&v| format!("{}{}", c as char, v as char)))
        .collect();
    prefixes.shuffle(rng);
    prefixes.truncate((vocab / 8).clamp(3, prefixes.len()));

    let mut seen: HashSet<String> = HashSet::new();
    let mut words = Vec::with_capacity(vocab);
    let mut family = 0;
    while words.len() < vocab {
        let prefix = rng.random_range(0..prefixes.len());
        let middle: String = (0..rng.random_range(1..=2))
            .map(|_| (b'a' + rng.random_range(0..26u8)) as char)
            .collect();
        let stem = format!("{}{middle}", prefixes[prefix]);
        if seen.contains(&stem) || seen.contains(&format!("{stem}r")) {
            continue;
        }
        for (s, suffix) in SUFFIXES.iter().enumerate() {
            // The bare stem and the "r" form always exist.
            if s >= 2 && !rng.random_bool(0.5) {
                continue;
            }
            let text = format!("{stem}{suffix}");
            if words.len() < vocab && seen.insert(text.clone()) {
                words.push(Word {
                    text,
                    prefix,
                    family,
                    suffix: s,
                });
            }
        }
        family += 1;
    }
    words
}

/// Deterministic in `spec`; different seeds give unrelated data.
pub fn generate_synthetic_teacher(spec: &SyntheticSpec) -> Result<SyntheticTeacher> {
    if spec.vocab < 10 || spec.dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "synthetic teacher needs vocab >= 10 and dim >= 2, got {} and {}",
            spec.vocab, spec.dim
        )));
    }
    if !(0.0..=1.0).contains(&spec.noise_rate) {
        return Err(Error::InvalidArgument(format!("noise rate {} outside [0, 1]", spec.noise_rate)));
    }
    let rng = |k| derive(spec.seed, stream::SYNTH, k);
    let d = spec.dim;
    let words = build_words(spec.vocab, &mut rng(0));

    let num_prefixes = words.iter().map(|w| w.prefix).max().unwrap_or(0) + 1;
    let mut arng = rng(1);
    let a: Vec<Vec<f64>> = (0..num_prefixes).map(|_| gaussian(&mut arng, d)).collect();
    let mut brng = rng(2);
    let b: Vec<Vec<f64>> = SUFFIXES.iter().map(|_| gaussian(&mut brng, d)).collect();
    let clean: Vec<Vec<f64>> = words
        .iter()
        .map(|w| a[w.prefix].iter().zip(&b[w.suffix]).map(|(x, y)| x + y).collect())
        .collect();

    let mut outliers = vec![false; words.len()];
    let vectors: Vec<Vec<f64>> = match spec.mode {
        Coherence::Coherent => clean.clone(),
        Coherence::Noisy => {
            let mut nrng = rng(3);
            clean
                .iter()
                .zip(outliers.iter_mut())
                .map(|(v, flag)| {
                    *flag = nrng.random_bool(spec.noise_rate);
                    let noise = gaussian(&mut nrng, d);
                    if *flag {
                        v.iter().zip(noise).map(|(x, n)| x + OUTLIER_SCALE * n).collect()
                    } else {
                        v.clone()
                    }
                })
                .collect()
        }
        Coherence::Incoherent => {
            let mut irng = rng(6);
            words.iter().map(|_| gaussian(&mut irng, d)).collect()
        }
    };
    let gold_vectors = if spec.mode == Coherence::Incoherent { &vectors } else { &clean };

    let mut table = EmbeddingTable::new(d);
    for (w, v) in words.iter().zip(&vectors) {
        table.insert_unique(w.text.as_str(), v)?;
    }

    let n = words.len();
    let num_pairs = (2 * n).min(n * (n - 1) / 2);
    let mut prng = rng(4);
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(num_pairs);
    while pairs.len() < num_pairs {
        let i = prng.random_range(0..n);
        let j = prng.random_range(0..n);
        if i == j || !used.insert((i.min(j), i.max(j))) {
            continue;
        }
        let cos = cosine_similarity(&gold_vectors[i], &gold_vectors[j])?;
        pairs.push(SimilarityPair {
            word1: words[i].text.clone(),
            word2: words[j].text.clone(),
            score: 5.0 * (cos + 1.0),
        });
    }
    let similarity = SimilarityDataset::new(format!("synthetic-{}", spec.mode), pairs)?;

    let analogy = AnalogyDataset::new("syntactic", suffix_analogies(&words, 2 * n, &mut rng(5)))?;
    Ok(SyntheticTeacher {
        table,
        similarity,
        analogy,
        outliers,
    })
}

/// Up to `limit` questions `stem1 : stem1+s :: stem2 : stem2+s`, grouped
/// by suffix, "append r" first.
fn suffix_analogies(words: &[Word], limit: usize, rng: &mut SeededRng) -> Vec<AnalogyQuestion> {
    let families = words.iter().map(|w| w.family).max().map_or(0, |f| f + 1);
    let mut forms: Vec<[Option<&str>; SUFFIXES.len()]> = vec![[None; SUFFIXES.len()]; families];
    for w in words {
        forms[w.family][w.suffix] = Some(&w.text);
    }
    let mut questions = Vec::new();
    for s in 1..SUFFIXES.len() {
        let with: Vec<(&str, &str)> = forms.iter().filter_map(|f| Some((f[0]?, f[s]?))).collect();
        let mut candidates: Vec<AnalogyQuestion> = Vec::new();
        for (i, x) in with.iter().enumerate() {
            for (j, y) in with.iter().enumerate() {
                if i != j {
                    let mut q = AnalogyQuestion::new(x.0, x.1, y.0, y.1);
                    q.section = Some(format!("append-{}", SUFFIXES[s]));
                    candidates.push(q);
                }
            }
        }
        let budget = if s == 1 { limit / 2 } else { limit / (2 * (SUFFIXES.len() - 2)) };
        let take = budget.min(candidates.len());
        let mut chosen: Vec<usize> = rand::seq::index::sample(rng, candidates.len(), take).into_vec();
        chosen.sort_unstable();
        questions.extend(chosen.into_iter().map(|i| candidates[i].clone()));
    }
    questions
}

/// A corpus where every token's tag is decided by its final character:
/// `a` → `TAG1`, `b` → `TAG2`.
pub fn final_character_corpus(seed: u64, sentences: usize) -> crate::tagger::TaggedCorpus {
    let mut rng = derive(seed, stream::SYNTH, 7);
    let letters: Vec<char> = "cdefghijklmnopqrstuvwxyz".chars().collect();
    let out = (0..sentences)
        .map(|_| {
            let len = rng.random_range(3..=8);
            (0..len)
                .map(|_| {
                    let stem: String = (0..rng.random_range(1..=5))
                        .map(|_| *letters.choose(&mut rng).unwrap())
                        .collect();
                    let (end, tag) = if rng.random_bool(0.5) { ('a', "TAG1") } else { ('b', "TAG2") };
                    (format!("{stem}{end}"), tag.to_string())
                })
                .collect()
        })
        .collect();
    crate::tagger::TaggedCorpus::new(out).expect("generated sentences are non-empty")
}
