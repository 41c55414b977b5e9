use crate::embeddings::EmbeddingTable;
use crate::error::{check_len, Error, Result};
use crate::metrics::NORM_EPS;
use crate::numerics::{dot, norm2};

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<SimilarityPair>,
}

impl SimilarityDataset {
    pub fn new(name: impl Into<String>, pairs: Vec<SimilarityPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("similarity dataset has no pairs"));
        }
        if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
            return Err(Error::NonFinite(format!("score for ({}, {})", p.word1, p.word2)));
        }
        Ok(SimilarityDataset {
            name: name.into(),
            pairs,
        })
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().flat_map(|p| [p.word1.as_str(), p.word2.as_str()])
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len("cosine_similarity", u.len(), v.len())?;
    let (nu, nv) = (norm2(u), norm2(v));
    if nu <= NORM_EPS || nv <= NORM_EPS {
        return Err(Error::Degenerate("cosine of a zero-norm vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing the average of the positions they span.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("spearman", a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs at least two observations".into()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate("correlation undefined: a list has zero rank variance".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetScore {
    pub name: String,
    pub rho: f64,
    pub scored: usize,
    /// Pairs with a word missing from the table or a zero vector.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityReport {
    pub datasets: Vec<DatasetScore>,
    /// Unweighted mean of the per-dataset correlations.
    pub average: f64,
}

impl SimilarityReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dataset\tspearman\tscored\tskipped\n");
        for d in &self.datasets {
            out.push_str(&format!("{}\t{:.6}\t{}\t{}\n", d.name, d.rho, d.scored, d.skipped));
        }
        out.push_str(&format!("average\t{:.6}\t\t\n", self.average));
        out
    }
}

/// Correlates model cosines with the gold scores of each dataset.
pub fn eval_similarity(table: &EmbeddingTable, datasets: &[SimilarityDataset]) -> Result<SimilarityReport> {
    if datasets.is_empty() {
        return Err(Error::Empty("no similarity datasets"));
    }
    let mut scores = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let mut gold = Vec::new();
        let mut model = Vec::new();
        let mut skipped = 0;
        for p in &ds.pairs {
            let cos = match (table.get(&p.word1), table.get(&p.word2)) {
                (Some(u), Some(v)) => cosine_similarity(u, v).ok(),
                _ => None,
            };
            match cos {
                Some(c) => {
                    gold.push(p.score);
                    model.push(c);
                }
                None => skipped += 1,
            }
        }
        if gold.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset {:?} has {} scorable pairs (need ≥ 2)",
                ds.name,
                gold.len()
            )));
        }
        scores.push(DatasetScore {
            name: ds.name.clone(),
            rho: spearman(&model, &gold)?,
            scored: gold.len(),
            skipped,
        });
    }
    let average = scores.iter().map(|s| s.rho).sum::<f64>() / scores.len() as f64;
    Ok(SimilarityReport {
        datasets: scores,
        average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_basics() {
        let u = [1.0, 2.0, -0.5];
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let u3: Vec<f64> = u.iter().map(|v| 3.0 * v).collect();
        assert!((cosine_similarity(&u, &u3).unwrap() - 1.0).abs() < 1e-15);
        assert!(cosine_similarity(&[0.0, 0.0], &u[..2]).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // 1 − 6·2/(4·15) = 0.8
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn spearman_errors() {
        assert!(spearman(&[1.0], &[2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[2.0]).is_err());
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ties_average() {
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn pair(a: &str, b: &str, s: f64) -> SimilarityPair {
        SimilarityPair {
            word1: a.into(),
            word2: b.into(),
            score: s,
        }
    }

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", &[1.0, 0.0]).unwrap();
        t.insert("b", &[1.0, 1.0]).unwrap();
        t.insert("c", &[0.0, 1.0]).unwrap();
        t.insert("d", &[-1.0, 0.2]).unwrap();
        t
    }

    #[test]
    fn perfect_and_average() {
        let t = table();
        let gold = |a: &str, b: &str| cosine_similarity(t.get(a).unwrap(), t.get(b).unwrap()).unwrap();
        let perfect = SimilarityDataset::new(
            "perfect",
            vec![pair("a", "b", gold("a", "b")), pair("a", "c", gold("a", "c")), pair("a", "d", gold("a", "d"))],
        )
        .unwrap();
        let zero = SimilarityDataset::new(
            "zero",
            vec![pair("a", "b", 3.0), pair("a", "c", 4.0), pair("a", "d", 2.0), pair("c", "d", 1.0)],
        )
        .unwrap();
        // model ranks (4, 2, 1, 3) against gold ranks (3, 4, 2, 1): Σd² = 10, ρ = 0
        let model: Vec<f64> = [("a", "b"), ("a", "c"), ("a", "d"), ("c", "d")].iter().map(|(x, y)| gold(x, y)).collect();
        assert!(spearman(&model, &[3.0, 4.0, 2.0, 1.0]).unwrap().abs() < 1e-15);

        let r = eval_similarity(&t, &[perfect, zero]).unwrap();
        assert!((r.datasets[0].rho - 1.0).abs() < 1e-15);
        assert!(r.datasets[1].rho.abs() < 1e-15);
        assert!((r.average - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_words_skipped() {
        let t = table();
        let ds = SimilarityDataset::new(
            "x",
            vec![pair("a", "b", 2.0), pair("a", "zz", 1.0), pair("a", "c", 1.0)],
        )
        .unwrap();
        let r = eval_similarity(&t, &[ds]).unwrap();
        assert_eq!(r.datasets[0].skipped, 1);
        assert_eq!(r.datasets[0].scored, 2);
        let ds = SimilarityDataset::new("y", vec![pair("a", "b", 2.0), pair("a", "zz", 1.0)]).unwrap();
        assert!(eval_similarity(&t, &[ds]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance(a in prop::collection::vec(-100.0f64..100.0, 3..30), seed in 0u64..1000) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.37 + (i as f64 * 1.7 + seed as f64).sin()).collect();
            prop_assume!(spearman(&a, &b).is_ok());
            let r1 = spearman(&a, &b).unwrap();
            let a2: Vec<f64> = a.iter().map(|x| x.exp()).collect();
            let b2: Vec<f64> = b.iter().map(|x| (x / 50.0).tanh()).collect();
            let r2 = spearman(&a2, &b2).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-12);
        }

        #[test]
        fn positive_scaling_invariance(s in 0.001f64..1000.0) {
            let t = table();
            let mut scaled = t.clone();
            scaled.map_vectors(|v| v.iter_mut().for_each(|x| *x *= s));
            let ds = SimilarityDataset::new("x", vec![pair("a", "b", 3.0), pair("a", "c", 1.0), pair("b", "d", 2.0), pair("c", "d", 0.5)]).unwrap();
            let r1 = eval_similarity(&t, std::slice::from_ref(&ds)).unwrap();
            let r2 = eval_similarity(&scaled, &[ds]).unwrap();
            prop_assert_eq!(r1.average, r2.average);
        }
    }
}
