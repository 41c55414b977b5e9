//! Sentence-level BiLSTM part-of-speech tagger with a per-position
//! feedforward classifier. Word inputs come from a word lookup table, the
//! character encoder, or both.

mod corpus;
mod model;
mod train;

pub use corpus::{Sentence, TaggedCorpus};
pub use model::{count_lookup_params, InputMode, TaggerModel, TaggerParams, WordLookup};
pub use train::{
    grid_search, initialize_tagger, linspace, tag_accuracy, train_tagger, GridCell, GridResult, TaggerConfig, TaggerTrace,
};
