use rayon::prelude::*;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::metrics::NORM_EPS;
use crate::numerics::{dot, norm2};

/// Denominator guard of the multiplicative objective.
pub const COSMUL_EPS: f64 = 1e-3;

/// `a : b :: c : d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    /// Section header the question appeared under, if any.
    pub section: Option<String>,
}

impl AnalogyQuestion {
    pub fn new(a: &str, b: &str, c: &str, d: &str) -> Self {
        AnalogyQuestion {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            d: d.into(),
            section: None,
        }
    }

    pub fn words(&self) -> [&str; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalogyDataset {
    /// Free-form label such as "syntactic" or "semantic".
    pub label: String,
    pub questions: Vec<AnalogyQuestion>,
}

impl AnalogyDataset {
    pub fn new(label: impl Into<String>, questions: Vec<AnalogyQuestion>) -> Result<Self> {
        if questions.iter().any(|q| q.words().iter().any(|w| w.is_empty())) {
            return Err(Error::InvalidArgument("analogy question with an empty word".into()));
        }
        Ok(AnalogyDataset {
            label: label.into(),
            questions,
        })
    }
}

/// Unit-normalized copy of a table; zero vectors are marked unusable.
struct UnitTable<'a> {
    table: &'a EmbeddingTable,
    rows: Vec<Option<Vec<f64>>>,
}

impl<'a> UnitTable<'a> {
    fn new(table: &'a EmbeddingTable) -> Self {
        let rows = (0..table.len())
            .map(|i| {
                let v = table.row(i);
                let n = norm2(v);
                (n > NORM_EPS).then(|| v.iter().map(|x| x / n).collect())
            })
            .collect();
        UnitTable { table, rows }
    }

    fn query(&self, word: &str) -> Result<&[f64]> {
        let i = self
            .table
            .index_of(word)
            .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
        self.rows[i]
            .as_deref()
            .ok_or_else(|| Error::Degenerate(format!("zero vector for query word {word:?}")))
    }

    fn answer(&self, a: &str, b: &str, c: &str) -> Result<String> {
        let (va, vb, vc) = (self.query(a)?, self.query(b)?, self.query(c)?);
        let shift = |cos: f64| (cos + 1.0) / 2.0;
        let mut best: Option<(f64, &str)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let word = self.table.word(i);
            let Some(x) = row else { continue };
            if word == a || word == b || word == c {
                continue;
            }
            let score = shift(dot(x, vb)) * shift(dot(x, vc)) / (shift(dot(x, va)) + COSMUL_EPS);
            let better = match best {
                None => true,
                Some((s, w)) => score > s || (score == s && word < w),
            };
            if better {
                best = Some((score, word));
            }
        }
        best.map(|(_, w)| w.to_string())
            .ok_or(Error::Empty("no analogy candidates outside the query words"))
    }
}

/// 3CosMul: `argmax_x cos′(x,b)·cos′(x,c) / (cos′(x,a) + ε)` over table words
/// other than `a`, `b`, `c`, with `cos′ = (cos + 1)/2`. Ties go to the
/// lexicographically smallest word.
pub fn answer_analogy(table: &EmbeddingTable, a: &str, b: &str, c: &str) -> Result<String> {
    UnitTable::new(table).answer(a, b, c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyReport {
    pub label: String,
    pub correct: usize,
    pub answered: usize,
    /// Questions with a word absent from the table.
    pub skipped: usize,
    /// `correct / answered`, 0 when nothing was answered.
    pub accuracy: f64,
}

impl AnalogyReport {
    pub fn to_tsv(&self) -> String {
        format!(
            "dataset\taccuracy\tcorrect\tanswered\tskipped\n{}\t{:.6}\t{}\t{}\t{}\n",
            self.label, self.accuracy, self.correct, self.answered, self.skipped
        )
    }
}

pub fn eval_analogy(table: &EmbeddingTable, dataset: &AnalogyDataset) -> Result<AnalogyReport> {
    let unit = UnitTable::new(table);
    let outcomes: Vec<Result<Option<bool>>> = dataset
        .questions
        .par_iter()
        .map(|q| {
            if q.words().iter().any(|w| !table.contains(w)) {
                return Ok(None);
            }
            Ok(Some(unit.answer(&q.a, &q.b, &q.c)? == q.d))
        })
        .collect();
    let (mut correct, mut answered, mut skipped) = (0, 0, 0);
    for o in outcomes {
        match o? {
            Some(hit) => {
                answered += 1;
                correct += hit as usize;
            }
            None => skipped += 1,
        }
    }
    Ok(AnalogyReport {
        label: dataset.label.clone(),
        correct,
        answered,
        skipped,
        accuracy: if answered == 0 { 0.0 } else { correct as f64 / answered as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cosine_similarity;
    use crate::rng::derive;
    use rand::Rng;

    fn brute_force(table: &EmbeddingTable, a: &str, b: &str, c: &str) -> String {
        let get = |w: &str| table.get(w).unwrap().to_vec();
        let (va, vb, vc) = (get(a), get(b), get(c));
        let mut scored: Vec<(f64, String)> = table
            .iter()
            .filter(|(w, _)| ![a, b, c].contains(w))
            .map(|(w, x)| {
                let s = |v: &[f64]| (cosine_similarity(x, v).unwrap() + 1.0) / 2.0;
                (s(&vb) * s(&vc) / (s(&va) + 0.001), w.to_string())
            })
            .collect();
        scored.sort_by(|p, q| q.0.total_cmp(&p.0).then_with(|| p.1.cmp(&q.1)));
        scored[0].1.clone()
    }

    #[test]
    fn additive_structure_is_recovered() {
        let mut rng = derive(3, 0, 0);
        let d = 40;
        let mut t = EmbeddingTable::new(d);
        let basis = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let a = basis(&mut rng);
        let b = basis(&mut rng);
        let c = basis(&mut rng);
        let target: Vec<f64> = (0..d).map(|k| b[k] + c[k] - a[k]).collect();
        t.insert("a", &a).unwrap();
        t.insert("b", &b).unwrap();
        t.insert("c", &c).unwrap();
        t.insert("target", &target).unwrap();
        for i in 0..30 {
            t.insert(format!("noise{i}"), &basis(&mut rng)).unwrap();
        }
        assert_eq!(answer_analogy(&t, "a", "b", "c").unwrap(), "target");
        assert_eq!(brute_force(&t, "a", "b", "c"), "target");
    }

    #[test]
    fn forced_candidate() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", &[1.0, 0.0]).unwrap();
        t.insert("b", &[0.0, 1.0]).unwrap();
        t.insert("c", &[1.0, 1.0]).unwrap();
        t.insert("d", &[-1.0, -5.0]).unwrap();
        assert_eq!(answer_analogy(&t, "a", "b", "c").unwrap(), "d");
    }

    #[test]
    fn query_words_never_returned() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", &[1.0, 0.0]).unwrap();
        t.insert("b", &[0.0, 1.0]).unwrap();
        t.insert("c", &[0.0, 1.0]).unwrap();
        t.insert("x", &[-1.0, 0.0]).unwrap();
        t.insert("y", &[-1.0, -1.0]).unwrap();
        let ans = answer_analogy(&t, "a", "b", "c").unwrap();
        assert!(ans != "b" && ans != "c" && ans != "a");
    }

    #[test]
    fn errors() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", &[1.0, 0.0]).unwrap();
        t.insert("b", &[0.0, 1.0]).unwrap();
        t.insert("c", &[1.0, 1.0]).unwrap();
        assert!(matches!(answer_analogy(&t, "a", "b", "zz"), Err(Error::UnknownWord(_))));
        assert!(matches!(answer_analogy(&t, "a", "b", "c"), Err(Error::Empty(_))));
    }

    #[test]
    fn accuracy_and_corruption() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", &[1.0, 0.0]).unwrap();
        t.insert("b", &[0.0, 1.0]).unwrap();
        t.insert("c", &[1.0, 1.0]).unwrap();
        t.insert("d", &[-1.0, -5.0]).unwrap();
        let good = AnalogyDataset::new("syn", vec![AnalogyQuestion::new("a", "b", "c", "d")]).unwrap();
        assert_eq!(eval_analogy(&t, &good).unwrap().accuracy, 1.0);
        let bad = AnalogyDataset::new("syn", vec![AnalogyQuestion::new("a", "b", "c", "a")]).unwrap();
        assert_eq!(eval_analogy(&t, &bad).unwrap().accuracy, 0.0);
        let missing = AnalogyDataset::new("syn", vec![AnalogyQuestion::new("a", "b", "c", "zz")]).unwrap();
        let r = eval_analogy(&t, &missing).unwrap();
        assert_eq!((r.answered, r.skipped), (0, 1));
    }

    #[test]
    fn scaling_invariance_and_brute_force_agreement() {
        for seed in 0..20 {
            let mut rng = derive(seed, 4, 0);
            let mut t = EmbeddingTable::new(5);
            for i in 0..25 {
                let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                t.insert(format!("w{i:02}"), &v).unwrap();
            }
            let mut scaled = t.clone();
            scaled.map_vectors(|v| v.iter_mut().for_each(|x| *x *= 7.5));
            let ans = answer_analogy(&t, "w00", "w01", "w02").unwrap();
            assert_eq!(ans, brute_force(&t, "w00", "w01", "w02"));
            assert_eq!(ans, answer_analogy(&scaled, "w00", "w01", "w02").unwrap());
        }
    }
}
