use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::cosine_similarity;

/// The `k` words most cosine-similar to `query` (query excluded), best
/// first; equal similarities are ordered lexicographically. Words with a
/// zero vector are never returned.
pub fn nearest_neighbors(table: &EmbeddingTable, query: &str, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be ≥ 1".into()));
    }
    let q = table
        .get(query)
        .ok_or_else(|| Error::UnknownWord(query.to_string()))?;
    let mut scored: Vec<(&str, f64)> = Vec::with_capacity(table.len());
    for (w, v) in table.iter() {
        if w == query {
            continue;
        }
        match cosine_similarity(q, v) {
            Ok(c) => scored.push((w, c)),
            Err(Error::Degenerate(_)) if v.iter().all(|x| *x == 0.0) => {}
            Err(e) => return Err(e),
        }
    }
    let by_rank = |a: &(&str, f64), b: &(&str, f64)| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_rank);
        scored.truncate(k);
    }
    scored.sort_by(by_rank);
    Ok(scored.into_iter().map(|(w, c)| (w.to_string(), c)).collect())
}
