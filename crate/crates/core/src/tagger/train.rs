use std::collections::HashMap;

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::corpus::TaggedCorpus;
use super::model::{argmax, InputMode, TaggerModel, WordLookup};
use crate::embeddings::EmbeddingTable;
use crate::encoder::{CharEncoder, CharVocab};
use crate::error::{Error, Result};
use crate::numerics::{clip_global_norm, AdamConfig, AdamState, Dropout, ParamSet};
use crate::reconstruct::DEFAULT_CLIP_NORM;
use crate::rng::{derive, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct TaggerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Sentences per update.
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Word encoder dimension `d`; taken from the checkpoint in `CharD`.
    pub dim: usize,
    /// Word-lookup dimension; taken from the pre-trained table in `FullEmb`.
    pub word_dim: usize,
    pub use_highway: bool,
    /// Keep the character encoder fixed during training.
    pub freeze_chars: bool,
    /// Probability of replacing a singleton training token by UNK.
    pub unk_replace: f64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            epochs: 10,
            learning_rate: 1e-3,
            dropout: 0.0,
            seed: 0,
            batch_size: 1,
            clip_norm: DEFAULT_CLIP_NORM,
            dim: 16,
            word_dim: 16,
            use_highway: false,
            freeze_chars: false,
            unk_replace: 0.5,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.unk_replace) {
            return Err(Error::InvalidArgument(format!(
                "UNK replacement probability must lie in [0, 1], got {}",
                self.unk_replace
            )));
        }
        if self.batch_size == 0 || self.dim == 0 || self.word_dim == 0 {
            return Err(Error::InvalidArgument("batch size and dimensions must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidArgument(format!("clip norm must be positive, got {}", self.clip_norm)));
        }
        Ok(())
    }
}

/// Mean per-token training log-likelihood (inference mode) at
/// initialization and after each epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaggerTrace {
    pub initial: f64,
    pub epochs: Vec<f64>,
}

fn corpus_chars(corpus: &TaggedCorpus) -> CharVocab {
    CharVocab::from_chars(corpus.tokens().flat_map(|t| t.chars()))
}

/// Initial model for `mode`. Independent generators are derived for the
/// word table, the character encoder and the remaining tensors, so the
/// choice of lookup initialization never perturbs anything else.
pub fn initialize_tagger(
    config: &TaggerConfig,
    corpus: &TaggedCorpus,
    mode: InputMode,
    pretrained: Option<&EmbeddingTable>,
    reconstructed: Option<&CharEncoder>,
) -> Result<TaggerModel> {
    config.validate()?;
    if corpus.sentences.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    match (mode, pretrained.is_some(), reconstructed.is_some()) {
        (InputMode::FullEmb, false, _) => {
            return Err(Error::InvalidArgument("mode full+emb needs pre-trained embeddings".into()))
        }
        (InputMode::CharD, _, false) => {
            return Err(Error::InvalidArgument("mode chard needs a reconstruction checkpoint".into()))
        }
        (InputMode::Full | InputMode::Char, true, _) | (InputMode::Char | InputMode::FullEmb, _, true) => {
            return Err(Error::InvalidArgument(format!("mode {mode} takes no pre-trained inputs of that kind")))
        }
        _ => {}
    }
    let mut word_rng = derive(config.seed, stream::TAGGER_INIT, 0);
    let mut char_rng = derive(config.seed, stream::TAGGER_INIT, 1);
    let mut rng = derive(config.seed, stream::TAGGER_INIT, 2);

    let mut base_chars = corpus_chars(corpus);
    let chars = match reconstructed {
        Some(enc) => {
            base_chars = base_chars.union(&enc.vocab);
            enc.with_vocab(base_chars, &mut char_rng)
        }
        None => CharEncoder::random(base_chars, config.dim, config.use_highway, &mut char_rng),
    };

    let (words, word_dim) = match mode {
        InputMode::Full => (Some(WordLookup::new(corpus.tokens())), config.word_dim),
        InputMode::FullEmb => {
            let table = pretrained.expect("checked above");
            let words = WordLookup::new(corpus.tokens().chain(table.words().iter().map(|w| w.as_str())));
            (Some(words), table.dim())
        }
        _ => (None, 0),
    };
    let mut model = TaggerModel::random(
        mode,
        corpus.tags.clone(),
        words,
        word_dim,
        chars,
        &mut word_rng,
        &mut rng,
    )?;
    if let (Some(table), Some(words), Some(emb)) = (pretrained, &model.words, &mut model.params.word_emb) {
        for (w, v) in table.iter() {
            let row = words.get(w).expect("pre-trained words are in the lookup");
            emb.row_mut(row).copy_from_slice(v);
        }
    }
    Ok(model)
}

fn gold_indices(model: &TaggerModel, corpus: &TaggedCorpus) -> Result<Vec<Vec<usize>>> {
    corpus
        .sentences
        .iter()
        .map(|s| {
            s.iter()
                .map(|(_, t)| {
                    model
                        .tag_index(t)
                        .ok_or_else(|| Error::InvalidArgument(format!("tag {t:?} not in the model's inventory")))
                })
                .collect()
        })
        .collect()
}

fn mean_log_likelihood(model: &TaggerModel, corpus: &TaggedCorpus, gold: &[Vec<usize>]) -> Result<f64> {
    let per_sentence: Vec<Result<f64>> = corpus
        .sentences
        .par_iter()
        .zip(gold)
        .map(|(s, g)| {
            let tokens: Vec<&str> = s.iter().map(|(w, _)| w.as_str()).collect();
            model.log_likelihood(&tokens, g)
        })
        .collect();
    let mut total = 0.0;
    for r in per_sentence {
        total += r?;
    }
    Ok(total / corpus.num_tokens() as f64)
}

/// Trains a tagger by minimizing the negative log-likelihood with Adam over
/// shuffled sentences.
///
/// `FullEmb` copies pre-trained rows into the word table; `CharD` starts the
/// character encoder from `reconstructed`, extended to the corpus's
/// characters. Singleton training words are replaced by UNK with
/// probability `config.unk_replace` each time they are visited.
pub fn train_tagger(
    config: &TaggerConfig,
    corpus: &TaggedCorpus,
    mode: InputMode,
    pretrained: Option<&EmbeddingTable>,
    reconstructed: Option<&CharEncoder>,
) -> Result<(TaggerModel, TaggerTrace)> {
    let mut model = initialize_tagger(config, corpus, mode, pretrained, reconstructed)?;
    let gold = gold_indices(&model, corpus)?;
    let mut trace = TaggerTrace {
        initial: mean_log_likelihood(&model, corpus, &gold)?,
        ..Default::default()
    };
    if config.epochs == 0 {
        return Ok((model, trace));
    }

    let singletons: Vec<bool> = match &model.words {
        Some(w) => {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for t in corpus.tokens() {
                *counts.entry(t).or_default() += 1;
            }
            let mut flags = vec![false; w.rows()];
            for (t, c) in counts {
                if c == 1 {
                    flags[w.index_or_unk(t)] = true;
                }
            }
            flags
        }
        None => Vec::new(),
    };

    let mut adam = AdamState::new(&model.params, AdamConfig::default());
    let mut grads = model.params.zeros_like();
    for epoch in 0..config.epochs {
        let e = epoch as u64;
        let mut order: Vec<usize> = (0..corpus.sentences.len()).collect();
        order.shuffle(&mut derive(config.seed, stream::SHUFFLE, e));
        let mut dropout = if config.dropout > 0.0 {
            Dropout::training(config.dropout, derive(config.seed, stream::DROPOUT, e))?
        } else {
            Dropout::inference()
        };
        let mut unk_rng = derive(config.seed, stream::UNK_REPLACE, e);

        for batch in order.chunks(config.batch_size) {
            grads.zero();
            for &si in batch {
                let sentence = &corpus.sentences[si];
                let tokens: Vec<&str> = sentence.iter().map(|(w, _)| w.as_str()).collect();
                let rows = model.word_rows(&tokens).map(|mut rows| {
                    let unk = singletons.len() - 1;
                    for r in rows.iter_mut() {
                        if singletons[*r] && unk_rng.random::<f64>() < config.unk_replace {
                            *r = unk;
                        }
                    }
                    rows
                });
                let tr = model.forward_trace(&tokens, rows, &mut dropout)?;
                let nll = model.backward(&tr, &gold[si], &mut grads);
                if !nll.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "tagger loss {nll} at epoch {} sentence {si}",
                        epoch + 1
                    )));
                }
            }
            if !grads.all_finite() {
                return Err(Error::NonFinite(format!("tagger gradient at epoch {}", epoch + 1)));
            }
            if config.freeze_chars {
                grads.chars.params.zero();
            }
            clip_global_norm(&mut grads, config.clip_norm);
            adam.step(&mut model.params, &grads, config.learning_rate)?;
        }
        let ll = mean_log_likelihood(&model, corpus, &gold)?;
        trace.epochs.push(ll);
        info!("tagger epoch {}/{}: train log-likelihood per token {:.6}", epoch + 1, config.epochs, ll);
    }
    Ok((model, trace))
}

/// Token-level accuracy; tags outside the model's inventory count as errors.
pub fn tag_accuracy(model: &TaggerModel, corpus: &TaggedCorpus) -> Result<f64> {
    let counts: Vec<Result<usize>> = corpus
        .sentences
        .par_iter()
        .map(|s| {
            let tokens: Vec<&str> = s.iter().map(|(w, _)| w.as_str()).collect();
            let probs = model.forward(&tokens, &mut Dropout::inference())?;
            Ok(probs
                .iter()
                .zip(s)
                .filter(|(p, (_, t))| model.tags[argmax(p)] == *t)
                .count())
        })
        .collect();
    let total = corpus.num_tokens();
    if total == 0 {
        return Ok(0.0);
    }
    let mut correct = 0;
    for c in counts {
        correct += c?;
    }
    Ok(correct as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub learning_rate: f64,
    pub dropout: f64,
    pub dev_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    /// Learning-rate-major order.
    pub cells: Vec<GridCell>,
    pub best: usize,
    pub model: TaggerModel,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("learning_rate\tdropout\tdev_accuracy\n");
        for c in &self.cells {
            out.push_str(&format!("{}\t{}\t{}\n", c.learning_rate, c.dropout, c.dev_accuracy));
        }
        out
    }
}

/// Trains one tagger per `(learning rate, dropout)` pair and keeps the one
/// with the highest dev accuracy; the earliest cell wins ties.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    base: &TaggerConfig,
    learning_rates: &[f64],
    dropouts: &[f64],
    train: &TaggedCorpus,
    dev: &TaggedCorpus,
    mode: InputMode,
    pretrained: Option<&EmbeddingTable>,
    reconstructed: Option<&CharEncoder>,
) -> Result<GridResult> {
    if learning_rates.is_empty() || dropouts.is_empty() {
        return Err(Error::Empty("grid"));
    }
    let mut cells: Vec<GridCell> = Vec::new();
    let mut best: Option<(usize, TaggerModel)> = None;
    for &lr in learning_rates {
        for &dropout in dropouts {
            let config = TaggerConfig {
                learning_rate: lr,
                dropout,
                ..base.clone()
            };
            let (model, _) = train_tagger(&config, train, mode, pretrained, reconstructed)?;
            let acc = tag_accuracy(&model, dev)?;
            info!("grid lr={lr} dropout={dropout}: dev accuracy {acc:.4}");
            let better = best.as_ref().is_none_or(|(i, _)| acc > cells[*i].dev_accuracy);
            cells.push(GridCell {
                learning_rate: lr,
                dropout,
                dev_accuracy: acc,
            });
            if better {
                best = Some((cells.len() - 1, model));
            }
        }
    }
    let (best, model) = best.expect("grid is non-empty");
    Ok(GridResult { cells, best, model })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::InvalidArgument("grid axis needs at least one value".into())),
        1 => Ok(vec![lo]),
        _ => Ok((0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                lo * (1.0 - t) + hi * t
            })
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagger::Sentence;

    fn toy(n: usize, seed: u64) -> TaggedCorpus {
        let mut rng = derive(seed, 77, 0);
        let sentences: Vec<Sentence> = (0..n)
            .map(|_| {
                let len = rng.random_range(2..6);
                (0..len)
                    .map(|_| {
                        let stem: String = (0..rng.random_range(1..4))
                            .map(|_| (b'c' + rng.random_range(0..6u8)) as char)
                            .collect();
                        let (end, tag) = if rng.random_bool(0.5) { ('a', "A") } else { ('b', "B") };
                        (format!("{stem}{end}"), tag.to_string())
                    })
                    .collect()
            })
            .collect();
        TaggedCorpus::new(sentences).unwrap()
    }

    fn small_config() -> TaggerConfig {
        TaggerConfig {
            epochs: 3,
            learning_rate: 0.01,
            dim: 4,
            word_dim: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let c = toy(10, 1);
        let cfg = TaggerConfig { epochs: 0, ..small_config() };
        let (m, trace) = train_tagger(&cfg, &c, InputMode::Char, None, None).unwrap();
        assert_eq!(m, initialize_tagger(&cfg, &c, InputMode::Char, None, None).unwrap());
        assert!(trace.epochs.is_empty());
    }

    #[test]
    fn same_seed_same_model() {
        let c = toy(20, 2);
        let cfg = TaggerConfig { dropout: 0.2, ..small_config() };
        let a = train_tagger(&cfg, &c, InputMode::Full, None, None).unwrap();
        let b = train_tagger(&cfg, &c, InputMode::Full, None, None).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn full_emb_with_random_table_equals_full() {
        let c = toy(20, 3);
        let cfg = small_config();
        let init = initialize_tagger(&cfg, &c, InputMode::Full, None, None).unwrap();
        let words = init.words.as_ref().unwrap();
        let emb = init.params.word_emb.as_ref().unwrap();
        let mut table = EmbeddingTable::new(cfg.word_dim);
        for (i, w) in words.words().iter().enumerate() {
            table.insert_unique(w.as_str(), emb.row(i)).unwrap();
        }
        let (full, _) = train_tagger(&cfg, &c, InputMode::Full, None, None).unwrap();
        let (mut emb_model, _) = train_tagger(&cfg, &c, InputMode::FullEmb, Some(&table), None).unwrap();
        emb_model.mode = InputMode::Full;
        assert_eq!(full, emb_model);
    }

    #[test]
    fn mode_argument_mismatch() {
        let c = toy(5, 4);
        let cfg = small_config();
        assert!(train_tagger(&cfg, &c, InputMode::FullEmb, None, None).is_err());
        assert!(train_tagger(&cfg, &c, InputMode::CharD, None, None).is_err());
        let table = EmbeddingTable::new(3);
        assert!(train_tagger(&cfg, &c, InputMode::Char, Some(&table), None).is_err());
    }

    #[test]
    fn frozen_chard_keeps_encoder() {
        let c = toy(10, 5);
        let mut rng = derive(0, 0, 0);
        let recon = CharEncoder::random(CharVocab::from_chars("abcdxyz".chars()), 4, false, &mut rng);
        let cfg = TaggerConfig {
            freeze_chars: true,
            ..small_config()
        };
        let init = initialize_tagger(&cfg, &c, InputMode::CharD, None, Some(&recon)).unwrap();
        let (m, _) = train_tagger(&cfg, &c, InputMode::CharD, None, Some(&recon)).unwrap();
        assert_eq!(m.params.chars, init.params.chars);
        assert_ne!(m.params.w2, init.params.w2);
        // Known characters keep their reconstructed rows.
        let a = recon.vocab.get('x').unwrap();
        let b = m.char_vocab().get('x').unwrap();
        assert_eq!(recon.params.char_emb.row(a), m.params.chars.params.char_emb.row(b));
    }

    #[test]
    fn accuracy_edge_cases() {
        let single = TaggedCorpus::new(vec![vec![("x".into(), "N".into()), ("y".into(), "N".into())]]).unwrap();
        let (m, _) = train_tagger(&TaggerConfig { epochs: 0, ..small_config() }, &single, InputMode::Char, None, None)
            .unwrap();
        assert_eq!(tag_accuracy(&m, &single).unwrap(), 1.0);
    }

    #[test]
    fn learns_and_likelihood_rises() {
        let train = toy(120, 6);
        let test = toy(40, 7);
        let cfg = TaggerConfig {
            epochs: 6,
            learning_rate: 0.01,
            dim: 6,
            ..Default::default()
        };
        let (m, trace) = train_tagger(&cfg, &train, InputMode::Char, None, None).unwrap();
        assert!(trace.epochs[0] > trace.initial);
        let acc = tag_accuracy(&m, &test).unwrap();
        assert!(acc > 0.9, "accuracy {acc}");
    }

    #[test]
    fn grid_picks_first_best() {
        let train = toy(10, 8);
        let cfg = TaggerConfig { epochs: 1, ..small_config() };
        let g = grid_search(&cfg, &[0.01, 0.02], &[0.0, 0.1], &train, &train, InputMode::Char, None, None).unwrap();
        assert_eq!(g.cells.len(), 4);
        let max = g.cells.iter().map(|c| c.dev_accuracy).fold(f64::MIN, f64::max);
        assert_eq!(g.best, g.cells.iter().position(|c| c.dev_accuracy == max).unwrap());
        assert_eq!(linspace(0.1, 0.5, 5).unwrap().len(), 5);
        assert!((linspace(0.0001, 0.0005, 5).unwrap()[2] - 0.0003).abs() < 1e-15);
        assert_eq!(linspace(0.001, 0.01, 2).unwrap(), vec![0.001, 0.01]);
    }
}
