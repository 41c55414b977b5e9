//! Versioned binary files for trained encoders and taggers.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "CHRRECON"
//! version    u32      FORMAT_VERSION
//! kind       u8       1 = encoder checkpoint, 2 = tagger model
//! payload    kind-specific, see below
//! ```
//!
//! An encoder block is `d: u32, d_c: u32, highway: u8`, the character
//! vocabulary (`u32` count, then one `u32` code point per character in
//! sorted order) and every parameter tensor in the encoder's visiting
//! order, each as a `u32` element count followed by `f32` values.
//!
//! Encoder checkpoints append a training-metadata block: a presence flag,
//! then metric name (`u32` length + UTF-8), epochs `u64`, learning rate
//! `f64`, dropout `f64`, seed `u64`, highway `u8`, batch size `u64` and clip
//! norm `f64`.
//!
//! Tagger models store the mode name, the tag list and word list (each a
//! `u32` count of length-prefixed strings), the word-lookup dimension `u32`,
//! an encoder block and then the remaining tensors in the tagger's visiting
//! order.
//!
//! Any shortfall, excess byte, bad flag or shape mismatch is reported as a
//! corrupt file; nothing is returned from a partially decoded file.

use std::path::Path;

use super::binary::{Reader, Writer};
use super::{read_bytes, write_atomic};
use crate::encoder::{CharEncoder, CharEncoderParams};
use crate::error::{Error, Result};
use crate::metrics::DistanceMetric;
use crate::numerics::{LstmCellParams, Mat, ParamSet};
use crate::reconstruct::TrainConfig;
use crate::tagger::{InputMode, TaggerModel, TaggerParams, WordLookup};

pub const MAGIC: &[u8; 8] = b"CHRRECON";
pub const FORMAT_VERSION: u32 = 1;

const KIND_ENCODER: u8 = 1;
const KIND_TAGGER: u8 = 2;

/// A trained encoder plus the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub encoder: CharEncoder,
    pub config: Option<TrainConfig>,
}

impl Checkpoint {
    /// Prepares an encoder for storage: the UNK row becomes the mean of the
    /// trained character rows and every value is rounded to `f32`, so the
    /// in-memory checkpoint equals what a reload yields.
    pub fn new(mut encoder: CharEncoder, config: Option<TrainConfig>) -> Self {
        encoder.refresh_unk_row();
        encoder.params.round_to_f32();
        Checkpoint { encoder, config }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = header(KIND_ENCODER);
        write_encoder(&mut w, &self.encoder);
        match &self.config {
            None => w.u8(0),
            Some(c) => {
                w.u8(1);
                w.str(c.metric.name());
                w.u64(c.epochs as u64);
                w.f64(c.learning_rate);
                w.f64(c.dropout);
                w.u64(c.seed);
                w.u8(c.use_highway as u8);
                w.u64(c.batch_size as u64);
                w.f64(c.clip_norm);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        check_header(&mut r, KIND_ENCODER)?;
        let encoder = read_encoder(&mut r)?;
        let config = if r.flag("metadata flag")? {
            let metric: DistanceMetric = r
                .str("metric")?
                .parse()
                .map_err(|_| Error::CorruptCheckpoint("unknown metric name".into()))?;
            Some(TrainConfig {
                metric,
                epochs: r.u64("epochs")? as usize,
                learning_rate: r.f64("learning rate")?,
                dropout: r.f64("dropout")?,
                seed: r.u64("seed")?,
                use_highway: r.flag("highway flag")?,
                batch_size: r.u64("batch size")? as usize,
                clip_norm: r.f64("clip norm")?,
            })
        } else {
            None
        };
        r.finish()?;
        Ok(Checkpoint { encoder, config })
    }
}

fn header(kind: u8) -> Writer {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    w.u8(kind);
    w
}

fn check_header(r: &mut Reader, kind: u8) -> Result<()> {
    if r.bytes(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
    }
    let version = r.u32("version")? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let found = r.u8("kind")?;
    if found != kind {
        return Err(Error::CorruptCheckpoint(format!("file kind {found}, expected {kind}")));
    }
    Ok(())
}

fn write_tensors<P: ParamSet>(w: &mut Writer, p: &P) {
    for t in p.tensors() {
        w.tensor(t);
    }
}

fn read_tensors<P: ParamSet>(r: &mut Reader, p: &mut P, what: &str) -> Result<()> {
    for t in p.tensors_mut() {
        r.tensor_into(t, what)?;
    }
    Ok(())
}

fn write_encoder(w: &mut Writer, enc: &CharEncoder) {
    w.u32(enc.params.dim());
    w.u32(enc.params.char_dim());
    w.u8(enc.params.use_highway() as u8);
    w.vocab(&enc.vocab);
    write_tensors(w, &enc.params);
}

fn read_encoder(r: &mut Reader) -> Result<CharEncoder> {
    let d = r.u32("dimension")?;
    let dc = r.u32("character dimension")?;
    let highway = r.flag("highway flag")?;
    if d == 0 || d != dc {
        return Err(Error::CorruptCheckpoint(format!("invalid dimensions d={d}, d_c={dc}")));
    }
    let vocab = r.vocab()?;
    // A plausibility bound before allocating d²-sized tensors.
    if d > 1 << 14 {
        return Err(Error::CorruptCheckpoint(format!("implausible dimension {d}")));
    }
    let mut params = CharEncoderParams::zeros(vocab.rows(), d, highway);
    read_tensors(r, &mut params, "encoder tensors")?;
    CharEncoder::new(vocab, params).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    write_atomic(path, &checkpoint.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_bytes(path)?)
}

pub fn tagger_to_bytes(model: &TaggerModel) -> Vec<u8> {
    let mut w = header(KIND_TAGGER);
    w.str(model.mode.name());
    w.strings(&model.tags);
    let words: &[String] = model.words.as_ref().map_or(&[], |l| l.words());
    w.strings(words);
    w.u32(model.params.word_emb.as_ref().map_or(0, |m| m.cols()));
    write_encoder(&mut w, &model.params.chars);
    for t in task_tensors(&model.params) {
        w.tensor(t);
    }
    w.buf
}

/// The tagger tensors outside the character encoder, in visiting order.
fn task_tensors(p: &TaggerParams) -> Vec<&[f64]> {
    let n = p.chars.params.tensors().len();
    let skip = usize::from(p.word_emb.is_some());
    let mut t = p.tensors();
    t.drain(skip..skip + n);
    t
}

fn task_tensors_mut(p: &mut TaggerParams) -> Vec<&mut [f64]> {
    let n = p.chars.params.tensors().len();
    let skip = usize::from(p.word_emb.is_some());
    let mut t = p.tensors_mut();
    t.drain(skip..skip + n);
    t
}

pub fn tagger_from_bytes(bytes: &[u8]) -> Result<TaggerModel> {
    let mut r = Reader::new(bytes);
    check_header(&mut r, KIND_TAGGER)?;
    let mode: InputMode = r
        .str("mode")?
        .parse()
        .map_err(|_| Error::CorruptCheckpoint("unknown tagger mode".into()))?;
    let tags = r.strings("tags")?;
    let word_list = r.strings("words")?;
    let word_dim = r.u32("word dimension")?;
    let chars = read_encoder(&mut r)?;
    if word_dim > 1 << 14 || tags.is_empty() {
        return Err(Error::CorruptCheckpoint("invalid tagger header".into()));
    }
    let words = mode.uses_words().then(|| WordLookup::new(&word_list));
    if words.as_ref().map_or(!word_list.is_empty(), |w| w.len() != word_list.len()) {
        return Err(Error::CorruptCheckpoint("word list inconsistent with mode".into()));
    }
    let d = chars.dim();
    let dv = if mode.uses_words() { word_dim + d } else { d };
    let t = tags.len();
    let mut params = TaggerParams {
        word_emb: words.as_ref().map(|w| Mat::zeros(w.rows(), word_dim)),
        chars,
        sent_f: LstmCellParams::zeros(dv, dv),
        sent_b: LstmCellParams::zeros(dv, dv),
        proj: Mat::zeros(d, 2 * dv),
        proj_bias: vec![0.0; d],
        w1: Mat::zeros(d, d),
        b1: vec![0.0; d],
        w2: Mat::zeros(t, d),
        b2: vec![0.0; t],
    };
    for t in task_tensors_mut(&mut params) {
        r.tensor_into(t, "tagger tensors")?;
    }
    r.finish()?;
    TaggerModel::new(mode, tags, words, params).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
}

/// Rounds a tagger to the stored precision, so that it equals its reload.
pub fn round_tagger(model: &mut TaggerModel) {
    model.params.round_to_f32();
}

pub fn save_tagger(path: &Path, model: &TaggerModel) -> Result<()> {
    write_atomic(path, &tagger_to_bytes(model))
}

pub fn load_tagger(path: &Path) -> Result<TaggerModel> {
    tagger_from_bytes(&read_bytes(path)?)
}
