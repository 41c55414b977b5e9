use rand::Rng;
use rayon::prelude::*;

use super::vocab::CharVocab;
use crate::embeddings::EmbeddingTable;
use crate::error::{check_len, Error, Result};
use crate::numerics::{
    Dropout, HighwayParams, HighwayTrace, LstmCellParams, LstmSequence, Mat, ParamSet,
};

/// All sub-word parameters.
///
/// The character dimension equals the word dimension `d`, and both LSTM
/// directions map `ℝ^d × ℝ^d → ℝ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharEncoderParams {
    /// One row per character, plus the trailing UNK row.
    pub char_emb: Mat,
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
    pub proj_f: Mat,
    pub proj_b: Mat,
    pub bias: Vec<f64>,
    pub highway: Option<HighwayParams>,
}

impl CharEncoderParams {
    pub fn zeros(rows: usize, dim: usize, use_highway: bool) -> Self {
        CharEncoderParams {
            char_emb: Mat::zeros(rows, dim),
            fwd: LstmCellParams::zeros(dim, dim),
            bwd: LstmCellParams::zeros(dim, dim),
            proj_f: Mat::zeros(dim, dim),
            proj_b: Mat::zeros(dim, dim),
            bias: vec![0.0; dim],
            highway: use_highway.then(|| HighwayParams::zeros(dim)),
        }
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, dim: usize, use_highway: bool, rng: &mut R) -> Self {
        let char_emb = Mat::uniform(rows, dim, char_init_limit(dim), rng);
        let fwd = LstmCellParams::random(dim, dim, rng);
        let bwd = LstmCellParams::random(dim, dim, rng);
        let proj_f = Mat::glorot(dim, dim, rng);
        let proj_b = Mat::glorot(dim, dim, rng);
        let highway = use_highway.then(|| HighwayParams::random(dim, rng));
        CharEncoderParams {
            char_emb,
            fwd,
            bwd,
            proj_f,
            proj_b,
            bias: vec![0.0; dim],
            highway,
        }
    }

    pub fn zeros_like(&self) -> Self {
        CharEncoderParams::zeros(self.char_emb.rows(), self.dim(), self.highway.is_some())
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    pub fn char_dim(&self) -> usize {
        self.char_emb.cols()
    }

    pub fn use_highway(&self) -> bool {
        self.highway.is_some()
    }

    /// Checks every shape against `d` and the character-table row count.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        check_len("character dimension must equal word dimension", d, self.char_dim())?;
        for lstm in [&self.fwd, &self.bwd] {
            check_len("char LSTM input", d, lstm.input_size())?;
            check_len("char LSTM hidden", d, lstm.hidden_size())?;
            check_len("char LSTM w_x rows", 4 * d, lstm.w_x.rows())?;
            check_len("char LSTM w_h rows", 4 * d, lstm.w_h.rows())?;
            check_len("char LSTM bias", 4 * d, lstm.bias.len())?;
        }
        for m in [&self.proj_f, &self.proj_b] {
            check_len("projection rows", d, m.rows())?;
            check_len("projection cols", d, m.cols())?;
        }
        if let Some(hw) = &self.highway {
            check_len("highway bias", d, hw.b.len())?;
            check_len("highway rows", d, hw.w.rows())?;
            check_len("highway cols", d, hw.w.cols())?;
        }
        Ok(())
    }
}

fn char_init_limit(dim: usize) -> f64 {
    (3.0 / dim as f64).sqrt()
}

impl ParamSet for CharEncoderParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.char_emb.as_slice()];
        t.extend(self.fwd.tensors());
        t.extend(self.bwd.tensors());
        t.push(self.proj_f.as_slice());
        t.push(self.proj_b.as_slice());
        t.push(&self.bias);
        if let Some(hw) = &self.highway {
            t.extend(hw.tensors());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![self.char_emb.as_mut_slice()];
        t.extend(self.fwd.tensors_mut());
        t.extend(self.bwd.tensors_mut());
        t.push(self.proj_f.as_mut_slice());
        t.push(self.proj_b.as_mut_slice());
        t.push(&mut self.bias);
        if let Some(hw) = &mut self.highway {
            t.extend(hw.tensors_mut());
        }
        t
    }
}

/// Output of the encoder for one word.
#[derive(Clone, Debug, PartialEq)]
pub struct WordEncoding {
    /// Pre-activation `z`.
    pub z: Vec<f64>,
    /// `max(0, z)`.
    pub h: Vec<f64>,
    /// Highway output, present iff the encoder has a highway layer.
    pub highway: Option<Vec<f64>>,
}

impl WordEncoding {
    /// The vector used downstream: the highway output if present, else `h`.
    pub fn student(&self) -> &[f64] {
        self.highway.as_deref().unwrap_or(&self.h)
    }
}

/// Forward intermediates for [`CharEncoder::backward`].
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    chars: Vec<usize>,
    masks: Vec<Option<Vec<f64>>>,
    fwd: LstmSequence,
    bwd: LstmSequence,
    highway: Option<HighwayTrace>,
    encoding: WordEncoding,
}

impl EncoderTrace {
    pub fn encoding(&self) -> &WordEncoding {
        &self.encoding
    }
}

/// Character vocabulary plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct CharEncoder {
    pub vocab: CharVocab,
    pub params: CharEncoderParams,
}

impl CharEncoder {
    pub fn new(vocab: CharVocab, params: CharEncoderParams) -> Result<Self> {
        params.validate()?;
        check_len("character table rows", vocab.rows(), params.char_emb.rows())?;
        Ok(CharEncoder { vocab, params })
    }

    pub fn random<R: Rng + ?Sized>(vocab: CharVocab, dim: usize, use_highway: bool, rng: &mut R) -> Self {
        let params = CharEncoderParams::random(vocab.rows(), dim, use_highway, rng);
        CharEncoder { vocab, params }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn forward(&self, word: &str, dropout: &mut Dropout) -> Result<(WordEncoding, EncoderTrace)> {
        if word.is_empty() {
            return Err(Error::InvalidArgument("cannot encode an empty word".into()));
        }
        let p = &self.params;
        let d = p.dim();
        let chars: Vec<usize> = word.chars().map(|c| self.vocab.index_or_unk(c)).collect();
        let masks: Vec<Option<Vec<f64>>> = chars.iter().map(|_| dropout.mask(d)).collect();
        let inputs: Vec<Vec<f64>> = chars
            .iter()
            .zip(&masks)
            .map(|(&c, m)| crate::numerics::dropout::apply_mask(p.char_emb.row(c), m.as_deref()))
            .collect();
        let reversed: Vec<&[f64]> = inputs.iter().rev().map(|v| v.as_slice()).collect();

        let fwd = p.fwd.forward_sequence(&inputs)?;
        let bwd = p.bwd.forward_sequence(&reversed)?;

        let mut z = p.bias.clone();
        p.proj_f.matvec_acc(fwd.last_h(), &mut z);
        p.proj_b.matvec_acc(bwd.last_h(), &mut z);
        let h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();

        let (highway_out, highway_trace) = match &p.highway {
            Some(hw) => {
                let (out, tr) = hw.forward(&h, &z)?;
                (Some(out), Some(tr))
            }
            None => (None, None),
        };
        let encoding = WordEncoding {
            z,
            h,
            highway: highway_out,
        };
        let trace = EncoderTrace {
            chars,
            masks,
            fwd,
            bwd,
            highway: highway_trace,
            encoding: encoding.clone(),
        };
        Ok((encoding, trace))
    }

    /// Word encoding; dropout on the LSTM inputs applies iff `dropout` is in
    /// training mode.
    pub fn encode_word(&self, word: &str, dropout: &mut Dropout) -> Result<WordEncoding> {
        self.forward(word, dropout).map(|(e, _)| e)
    }

    /// Inference-mode student vector.
    pub fn embed(&self, word: &str) -> Result<Vec<f64>> {
        Ok(self.encode_word(word, &mut Dropout::inference())?.student().to_vec())
    }

    /// Accumulates `∂L/∂Θ` into `grads` given `d_student = ∂L/∂(student
    /// vector)`. Returns the gradient with respect to `z`, mostly for tests.
    pub fn backward(&self, trace: &EncoderTrace, d_student: &[f64], grads: &mut CharEncoderParams) -> Vec<f64> {
        let p = &self.params;
        let d = p.dim();
        let enc = &trace.encoding;

        let (dh, mut dz) = match (&p.highway, &trace.highway, &mut grads.highway) {
            (Some(hw), Some(tr), Some(g)) => hw.backward(tr, &enc.h, &enc.z, d_student, g),
            _ => (d_student.to_vec(), vec![0.0; d]),
        };
        for k in 0..d {
            if enc.z[k] > 0.0 {
                dz[k] += dh[k];
            }
        }

        grads.proj_f.add_outer(&dz, trace.fwd.last_h());
        grads.proj_b.add_outer(&dz, trace.bwd.last_h());
        for (b, v) in grads.bias.iter_mut().zip(&dz) {
            *b += v;
        }

        let n = trace.chars.len();
        let mut dh_f = vec![vec![0.0; d]; n];
        p.proj_f.tr_matvec_acc(&dz, &mut dh_f[n - 1]);
        let mut dh_b = vec![vec![0.0; d]; n];
        p.proj_b.tr_matvec_acc(&dz, &mut dh_b[n - 1]);

        let dx_f = p.fwd.backward_sequence(&trace.fwd, &dh_f, &mut grads.fwd);
        let dx_b = p.bwd.backward_sequence(&trace.bwd, &dh_b, &mut grads.bwd);

        for j in 0..n {
            let row = grads.char_emb.row_mut(trace.chars[j]);
            let mask = trace.masks[j].as_deref();
            for k in 0..d {
                let g = dx_f[j][k] + dx_b[n - 1 - j][k];
                row[k] += mask.map_or(g, |m| g * m[k]);
            }
        }
        dz
    }

    /// Student vectors for `words` (inference mode), computed in parallel.
    pub fn encode_vocab<S: AsRef<str> + Sync>(&self, words: &[S]) -> Result<EmbeddingTable> {
        let vectors: Vec<Result<Vec<f64>>> = words.par_iter().map(|w| self.embed(w.as_ref())).collect();
        collect_table(self.dim(), words, vectors)
    }

    pub fn encode_vocab_sequential<S: AsRef<str>>(&self, words: &[S]) -> Result<EmbeddingTable> {
        let vectors: Vec<Result<Vec<f64>>> = words.iter().map(|w| self.embed(w.as_ref())).collect();
        collect_table(self.dim(), words, vectors)
    }

    /// Sets the UNK row to the mean of all known character rows.
    pub fn refresh_unk_row(&mut self) {
        let n = self.vocab.len();
        let d = self.params.char_dim();
        if n == 0 {
            return;
        }
        let mut mean = vec![0.0; d];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(self.params.char_emb.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let unk = self.vocab.unk();
        self.params.char_emb.row_mut(unk).copy_from_slice(&mean);
    }

    /// Re-indexes the character table for `vocab`. Characters already known
    /// keep their rows, new ones are drawn like a fresh initialization, and
    /// the UNK row carries over.
    pub fn with_vocab<R: Rng + ?Sized>(&self, vocab: CharVocab, rng: &mut R) -> CharEncoder {
        let d = self.params.char_dim();
        let limit = char_init_limit(d);
        let mut emb = Mat::zeros(vocab.rows(), d);
        for (i, &c) in vocab.chars().iter().enumerate() {
            match self.vocab.get(c) {
                Some(old) => emb.row_mut(i).copy_from_slice(self.params.char_emb.row(old)),
                None => emb
                    .row_mut(i)
                    .iter_mut()
                    .for_each(|v| *v = rng.random_range(-limit..=limit)),
            }
        }
        emb.row_mut(vocab.unk())
            .copy_from_slice(self.params.char_emb.row(self.vocab.unk()));
        let mut params = self.params.clone();
        params.char_emb = emb;
        CharEncoder { vocab, params }
    }
}

fn collect_table<S: AsRef<str>>(dim: usize, words: &[S], vectors: Vec<Result<Vec<f64>>>) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dim);
    for (w, v) in words.iter().zip(vectors) {
        table.insert(w.as_ref(), &v?)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::build_char_vocab;
    use crate::numerics::{finite_diff_grad, relative_error};
    use crate::rng::derive;

    fn vocab() -> CharVocab {
        build_char_vocab(&["abc", "bcd"]).unwrap()
    }

    #[test]
    fn zero_params_zero_output() {
        let v = vocab();
        let enc = CharEncoder::new(v.clone(), CharEncoderParams::zeros(v.rows(), 3, false)).unwrap();
        let e = enc.encode_word("abd", &mut Dropout::inference()).unwrap();
        assert_eq!(e.z, vec![0.0; 3]);
        assert_eq!(e.h, vec![0.0; 3]);
    }

    #[test]
    fn relu_clamps_bias() {
        let v = vocab();
        let mut rng = derive(1, 0, 0);
        let mut p = CharEncoderParams::random(v.rows(), 2, false, &mut rng);
        p.proj_f = Mat::zeros(2, 2);
        p.proj_b = Mat::zeros(2, 2);
        p.bias = vec![-1.0, 2.0];
        let enc = CharEncoder::new(v, p).unwrap();
        for w in ["a", "dcba", "zzz"] {
            assert_eq!(enc.embed(w).unwrap(), vec![0.0, 2.0]);
        }
    }

    #[test]
    fn empty_word_rejected() {
        let mut rng = derive(1, 0, 0);
        let enc = CharEncoder::random(vocab(), 3, false, &mut rng);
        assert!(enc.embed("").is_err());
    }

    #[test]
    fn mismatched_char_dim_rejected() {
        let v = vocab();
        let mut p = CharEncoderParams::zeros(v.rows(), 3, false);
        p.char_emb = Mat::zeros(v.rows(), 4);
        assert!(CharEncoder::new(v.clone(), p).is_err());
        let p = CharEncoderParams::zeros(v.rows() + 1, 3, false);
        assert!(CharEncoder::new(v, p).is_err());
    }

    #[test]
    fn highway_output_lies_between_z_and_h() {
        let mut rng = derive(3, 0, 0);
        let enc = CharEncoder::random(vocab(), 6, true, &mut rng);
        for w in ["a", "abcd", "dddcb"] {
            let e = enc.encode_word(w, &mut Dropout::inference()).unwrap();
            let hw = e.highway.as_ref().unwrap();
            for k in 0..6 {
                assert!(e.h[k] >= 0.0);
                let (lo, hi) = (e.z[k].min(e.h[k]), e.z[k].max(e.h[k]));
                assert!(hw[k] >= lo - 1e-15 && hw[k] <= hi + 1e-15);
            }
        }
    }

    fn loss(enc: &CharEncoder, word: &str, r: &[f64], seed: u64, rate: f64) -> f64 {
        let mut drop = if rate > 0.0 {
            Dropout::training(rate, derive(seed, 1, 0)).unwrap()
        } else {
            Dropout::inference()
        };
        let e = enc.encode_word(word, &mut drop).unwrap();
        e.student().iter().zip(r).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        for (seed, highway, rate) in [(1, false, 0.0), (2, true, 0.0), (3, true, 0.3), (4, false, 0.3)] {
            let mut rng = derive(seed, 0, 0);
            let v = vocab();
            let mut p = CharEncoderParams::random(v.rows(), 4, highway, &mut rng);
            // keep z away from the ReLU kink
            p.bias = vec![0.5, -0.5, 0.7, 0.3];
            let enc = CharEncoder::new(v, p).unwrap();
            let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

            let mut drop = if rate > 0.0 {
                Dropout::training(rate, derive(seed, 1, 0)).unwrap()
            } else {
                Dropout::inference()
            };
            let (_, trace) = enc.forward("abca", &mut drop).unwrap();
            let mut grads = enc.params.zeros_like();
            enc.backward(&trace, &r, &mut grads);

            let n_tensors = enc.params.tensors().len();
            for ti in 0..n_tensors {
                let base = enc.params.tensors()[ti].to_vec();
                let num = finite_diff_grad(
                    |x| {
                        let mut e2 = enc.clone();
                        e2.params.tensors_mut()[ti].copy_from_slice(x);
                        loss(&e2, "abca", &r, seed, rate)
                    },
                    &base,
                    1e-5,
                );
                let err = relative_error(grads.tensors()[ti], &num);
                assert!(err < 1e-5, "seed {seed} tensor {ti}: {err}");
            }
        }
    }

    #[test]
    fn parallel_equals_sequential() {
        let mut rng = derive(9, 0, 0);
        let words: Vec<String> = (0..100)
            .map(|i| format!("w{}x{}", i, "abcd".chars().nth(i % 4).unwrap()))
            .collect();
        let v = build_char_vocab(&words).unwrap();
        let enc = CharEncoder::random(v, 5, true, &mut rng);
        let a = enc.encode_vocab(&words).unwrap();
        let b = enc.encode_vocab_sequential(&words).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get("w7xd").unwrap(), enc.embed("w7xd").unwrap().as_slice());
    }

    #[test]
    fn duplicate_words_single_entry() {
        let mut rng = derive(9, 0, 0);
        let enc = CharEncoder::random(vocab(), 3, false, &mut rng);
        let t = enc.encode_vocab(&["ab", "ab"]).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn with_vocab_preserves_known_rows() {
        let mut rng = derive(4, 0, 0);
        let enc = CharEncoder::random(build_char_vocab(&["bd"]).unwrap(), 3, false, &mut rng);
        let wider = enc.with_vocab(build_char_vocab(&["abcd"]).unwrap(), &mut rng);
        assert_eq!(wider.params.char_emb.rows(), 5);
        assert_eq!(wider.embed("bdbd").unwrap(), enc.embed("bdbd").unwrap());
    }
}
