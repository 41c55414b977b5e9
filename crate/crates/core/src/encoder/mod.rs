//! Character-level word encoder: a bidirectional character LSTM whose final
//! states are projected and rectified into a word vector, optionally followed
//! by a highway gate.

mod model;
mod vocab;

pub use model::{CharEncoder, CharEncoderParams, EncoderTrace, WordEncoding};
pub use vocab::{build_char_vocab, CharVocab};
