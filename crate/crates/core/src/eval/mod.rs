//! Intrinsic evaluation of embedding tables: cosine similarity against human
//! judgements (Spearman's ρ), 3CosMul analogies and nearest neighbors.

mod analogy;
mod neighbors;
mod similarity;

pub use analogy::{answer_analogy, eval_analogy, AnalogyDataset, AnalogyQuestion, AnalogyReport, COSMUL_EPS};
pub use neighbors::nearest_neighbors;
pub use similarity::{
    cosine_similarity, eval_similarity, spearman, DatasetScore, SimilarityDataset, SimilarityPair, SimilarityReport,
};
