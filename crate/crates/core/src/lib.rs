//! Character-level word encoders trained to reconstruct pre-trained word
//! embeddings ("teacher" vectors) under a choice of distance metrics, and the
//! tooling to evaluate the resulting "student" vectors: cosine similarity with
//! Spearman correlation, 3CosMul analogies, nearest neighbors, and a BiLSTM
//! part-of-speech tagger.
//!
//! Everything is framework-free: the LSTM, highway layer, Adam and dropout
//! live in [`numerics`] with hand-written backward passes that are checked
//! against central finite differences in the test suite.

pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod reconstruct;
pub mod rng;
pub mod tagger;

pub use embeddings::EmbeddingTable;
pub use encoder::{build_char_vocab, CharEncoder, CharEncoderParams, CharVocab, WordEncoding};
pub use error::{Error, Result};
pub use metrics::DistanceMetric;
pub use reconstruct::{train_reconstruction, LossTrace, TrainConfig};
