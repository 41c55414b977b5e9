use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::encoder::{CharEncoder, CharVocab, EncoderTrace};
use crate::error::{check_len, Error, Result};
use crate::numerics::dropout::apply_mask;
use crate::numerics::{Dropout, LstmCellParams, LstmSequence, Mat, ParamSet};

/// Which vectors feed the sentence BiLSTM.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InputMode {
    /// Word lookup concatenated with the character encoding, lookup random.
    Full,
    /// As `Full`, lookup rows initialized from pre-trained vectors.
    FullEmb,
    /// Character encoding only, random initialization.
    Char,
    /// Character encoding only, initialized from a reconstruction checkpoint.
    CharD,
}

impl InputMode {
    pub const ALL: [InputMode; 4] = [InputMode::Full, InputMode::FullEmb, InputMode::Char, InputMode::CharD];

    pub fn name(self) -> &'static str {
        match self {
            InputMode::Full => "full",
            InputMode::FullEmb => "full+emb",
            InputMode::Char => "char",
            InputMode::CharD => "chard",
        }
    }

    pub fn uses_words(self) -> bool {
        matches!(self, InputMode::Full | InputMode::FullEmb)
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown input mode {s:?}")))
    }
}

/// Word types of the lookup table. Row `len()` is UNK.
#[derive(Clone, Debug, Default)]
pub struct WordLookup {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordLookup {
    /// Sorted, deduplicated word list.
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut words: Vec<String> = words.into_iter().map(|w| w.as_ref().to_string()).collect();
        words.sort();
        words.dedup();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        WordLookup { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.words.len() + 1
    }

    pub fn unk(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn index_or_unk(&self, word: &str) -> usize {
        self.get(word).unwrap_or(self.unk())
    }
}

impl PartialEq for WordLookup {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
    }
}

/// Every trainable tensor of the tagger, character encoder included.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggerParams {
    /// `(|W| + 1) × word_dim`, present in the full modes.
    pub word_emb: Option<Mat>,
    pub chars: CharEncoder,
    pub sent_f: LstmCellParams,
    pub sent_b: LstmCellParams,
    /// `d × 2·dim(v)`: concatenated BiLSTM states to `h_i`.
    pub proj: Mat,
    pub proj_bias: Vec<f64>,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl TaggerParams {
    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.zero();
        g
    }

    /// Dimension of the per-token input `v`.
    pub fn input_dim(&self) -> usize {
        self.word_emb.as_ref().map_or(0, |m| m.cols()) + self.chars.dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.proj.rows()
    }

    pub fn num_tags(&self) -> usize {
        self.b2.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.chars.params.validate()?;
        check_len("character table rows", self.chars.vocab.rows(), self.chars.params.char_emb.rows())?;
        let dv = self.input_dim();
        let d = self.hidden_dim();
        for lstm in [&self.sent_f, &self.sent_b] {
            check_len("sentence LSTM input", dv, lstm.input_size())?;
            check_len("sentence LSTM hidden", dv, lstm.hidden_size())?;
            check_len("sentence LSTM w_h rows", 4 * dv, lstm.w_h.rows())?;
            check_len("sentence LSTM bias", 4 * dv, lstm.bias.len())?;
        }
        check_len("tagger projection cols", 2 * dv, self.proj.cols())?;
        check_len("tagger projection bias", d, self.proj_bias.len())?;
        check_len("W1 rows", d, self.w1.rows())?;
        check_len("W1 cols", d, self.w1.cols())?;
        check_len("b1", d, self.b1.len())?;
        check_len("W2 cols", d, self.w2.cols())?;
        check_len("W2 rows", self.b2.len(), self.w2.rows())?;
        Ok(())
    }
}

impl ParamSet for TaggerParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = Vec::new();
        if let Some(m) = &self.word_emb {
            t.push(m.as_slice());
        }
        t.extend(self.chars.params.tensors());
        t.extend(self.sent_f.tensors());
        t.extend(self.sent_b.tensors());
        t.push(self.proj.as_slice());
        t.push(&self.proj_bias);
        t.push(self.w1.as_slice());
        t.push(&self.b1);
        t.push(self.w2.as_slice());
        t.push(&self.b2);
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = Vec::new();
        if let Some(m) = &mut self.word_emb {
            t.push(m.as_mut_slice());
        }
        t.extend(self.chars.params.tensors_mut());
        t.extend(self.sent_f.tensors_mut());
        t.extend(self.sent_b.tensors_mut());
        t.push(self.proj.as_mut_slice());
        t.push(&mut self.proj_bias);
        t.push(self.w1.as_mut_slice());
        t.push(&mut self.b1);
        t.push(self.w2.as_mut_slice());
        t.push(&mut self.b2);
        t
    }
}

/// Tag inventory, input mode, word types and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggerModel {
    pub mode: InputMode,
    pub tags: Vec<String>,
    /// Present iff the mode uses word lookups.
    pub words: Option<WordLookup>,
    pub params: TaggerParams,
}

/// Forward intermediates for one sentence.
#[derive(Clone, Debug)]
pub(crate) struct SentenceTrace {
    word_rows: Option<Vec<usize>>,
    chars: Vec<EncoderTrace>,
    masks: Vec<Option<Vec<f64>>>,
    fwd: LstmSequence,
    bwd: LstmSequence,
    s: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    pub(crate) probs: Vec<Vec<f64>>,
}

impl TaggerModel {
    /// Assembles a model, checking that the parts agree.
    pub fn new(mode: InputMode, tags: Vec<String>, words: Option<WordLookup>, params: TaggerParams) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::Empty("tag inventory"));
        }
        if mode.uses_words() != words.is_some() || words.is_some() != params.word_emb.is_some() {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} and word lookup presence disagree"
            )));
        }
        if let (Some(w), Some(m)) = (&words, &params.word_emb) {
            check_len("word lookup rows", w.rows(), m.rows())?;
        }
        check_len("classifier outputs", tags.len(), params.num_tags())?;
        params.validate()?;
        Ok(TaggerModel { mode, tags, words, params })
    }

    /// Random parameters for the given parts. `chars` supplies the character
    /// encoder; the remaining tensors are drawn from `rng`, and the word
    /// table (if any) from `word_rng`.
    pub fn random<R: Rng + ?Sized, Q: Rng + ?Sized>(
        mode: InputMode,
        tags: Vec<String>,
        words: Option<WordLookup>,
        word_dim: usize,
        chars: CharEncoder,
        word_rng: &mut Q,
        rng: &mut R,
    ) -> Result<Self> {
        let word_emb = words
            .as_ref()
            .map(|w| Mat::uniform(w.rows(), word_dim, (3.0 / word_dim as f64).sqrt(), word_rng));
        let d = chars.dim();
        let dv = word_emb.as_ref().map_or(0, |m| m.cols()) + d;
        let t = tags.len();
        let params = TaggerParams {
            word_emb,
            chars,
            sent_f: LstmCellParams::random(dv, dv, rng),
            sent_b: LstmCellParams::random(dv, dv, rng),
            proj: Mat::glorot(d, 2 * dv, rng),
            proj_bias: vec![0.0; d],
            w1: Mat::glorot(d, d, rng),
            b1: vec![0.0; d],
            w2: Mat::glorot(t, d, rng),
            b2: vec![0.0; t],
        };
        TaggerModel::new(mode, tags, words, params)
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn char_vocab(&self) -> &CharVocab {
        &self.params.chars.vocab
    }

    /// Lookup rows for `tokens`, unseen words mapped to UNK.
    pub fn word_rows<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<usize>> {
        self.words
            .as_ref()
            .map(|w| tokens.iter().map(|t| w.index_or_unk(t.as_ref())).collect())
    }

    /// Per-position tag distributions. Dropout applies iff `dropout` is in
    /// training mode.
    pub fn forward<S: AsRef<str>>(&self, tokens: &[S], dropout: &mut Dropout) -> Result<Vec<Vec<f64>>> {
        let rows = self.word_rows(tokens);
        Ok(self.forward_trace(tokens, rows, dropout)?.probs)
    }

    /// Argmax tags, ties to the lowest tag index.
    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        let probs = self.forward(tokens, &mut Dropout::inference())?;
        Ok(probs.iter().map(|p| argmax(p)).collect())
    }

    pub fn tag<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<&str>> {
        Ok(self.predict(tokens)?.into_iter().map(|i| self.tags[i].as_str()).collect())
    }

    pub(crate) fn forward_trace<S: AsRef<str>>(
        &self,
        tokens: &[S],
        word_rows: Option<Vec<usize>>,
        dropout: &mut Dropout,
    ) -> Result<SentenceTrace> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("cannot tag an empty sentence".into()));
        }
        let p = &self.params;
        let n = tokens.len();
        let dv = p.input_dim();

        let mut chars = Vec::with_capacity(n);
        let mut inputs = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        for (i, tok) in tokens.iter().enumerate() {
            let mut v = Vec::with_capacity(dv);
            if let (Some(m), Some(rows)) = (&p.word_emb, &word_rows) {
                v.extend_from_slice(m.row(rows[i]));
            }
            let (enc, trace) = p.chars.forward(tok.as_ref(), dropout)?;
            v.extend_from_slice(enc.student());
            chars.push(trace);
            let mask = dropout.mask(dv);
            inputs.push(apply_mask(&v, mask.as_deref()));
            masks.push(mask);
        }
        let reversed: Vec<&[f64]> = inputs.iter().rev().map(|v| v.as_slice()).collect();
        let fwd = p.sent_f.forward_sequence(&inputs)?;
        let bwd = p.sent_b.forward_sequence(&reversed)?;

        let mut s = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        for i in 0..n {
            let mut si = fwd.states[i].h.clone();
            si.extend_from_slice(&bwd.states[n - 1 - i].h);
            let mut hi = p.proj_bias.clone();
            p.proj.matvec_acc(&si, &mut hi);
            let mut ai = p.b1.clone();
            p.w1.matvec_acc(&hi, &mut ai);
            let ri: Vec<f64> = ai.iter().map(|v| v.max(0.0)).collect();
            let mut logits = p.b2.clone();
            p.w2.matvec_acc(&ri, &mut logits);
            probs.push(softmax(&logits));
            s.push(si);
            h.push(hi);
            a.push(ai);
            r.push(ri);
        }
        Ok(SentenceTrace {
            word_rows,
            chars,
            masks,
            fwd,
            bwd,
            s,
            h,
            a,
            r,
            probs,
        })
    }

    /// Accumulates the gradient of the negative log-likelihood of `gold`
    /// into `grads` and returns that negative log-likelihood.
    pub(crate) fn backward(&self, trace: &SentenceTrace, gold: &[usize], grads: &mut TaggerParams) -> f64 {
        let p = &self.params;
        let n = gold.len();
        let dv = p.input_dim();
        let d = p.hidden_dim();
        let mut nll = 0.0;
        let mut dh_f = vec![vec![0.0; dv]; n];
        let mut dh_b = vec![vec![0.0; dv]; n];

        for i in 0..n {
            let probs = &trace.probs[i];
            nll -= probs[gold[i]].max(f64::MIN_POSITIVE).ln();
            let mut dlogits = probs.clone();
            dlogits[gold[i]] -= 1.0;

            add_into(&mut grads.b2, &dlogits);
            grads.w2.add_outer(&dlogits, &trace.r[i]);
            let mut da = vec![0.0; d];
            p.w2.tr_matvec_acc(&dlogits, &mut da);
            for (g, a) in da.iter_mut().zip(&trace.a[i]) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            add_into(&mut grads.b1, &da);
            grads.w1.add_outer(&da, &trace.h[i]);
            let mut dh = vec![0.0; d];
            p.w1.tr_matvec_acc(&da, &mut dh);
            add_into(&mut grads.proj_bias, &dh);
            grads.proj.add_outer(&dh, &trace.s[i]);
            let mut ds = vec![0.0; 2 * dv];
            p.proj.tr_matvec_acc(&dh, &mut ds);
            dh_f[i].copy_from_slice(&ds[..dv]);
            dh_b[n - 1 - i].copy_from_slice(&ds[dv..]);
        }

        let dx_f = p.sent_f.backward_sequence(&trace.fwd, &dh_f, &mut grads.sent_f);
        let dx_b = p.sent_b.backward_sequence(&trace.bwd, &dh_b, &mut grads.sent_b);

        let word_dim = p.word_emb.as_ref().map_or(0, |m| m.cols());
        for i in 0..n {
            let mut dvi: Vec<f64> = dx_f[i].iter().zip(&dx_b[n - 1 - i]).map(|(a, b)| a + b).collect();
            if let Some(m) = &trace.masks[i] {
                dvi.iter_mut().zip(m).for_each(|(g, k)| *g *= k);
            }
            if let (Some(g), Some(rows)) = (&mut grads.word_emb, &trace.word_rows) {
                add_into(g.row_mut(rows[i]), &dvi[..word_dim]);
            }
            p.chars.backward(&trace.chars[i], &dvi[word_dim..], &mut grads.chars.params);
        }
        nll
    }

    /// Negative log-likelihood of `gold` and its gradient with respect to
    /// every parameter, without dropout or UNK replacement.
    pub fn nll_gradient<S: AsRef<str>>(&self, tokens: &[S], gold: &[usize]) -> Result<(f64, TaggerParams)> {
        check_len("gold tags", tokens.len(), gold.len())?;
        if let Some(&g) = gold.iter().find(|&&g| g >= self.tags.len()) {
            return Err(Error::InvalidArgument(format!("tag index {g} out of range")));
        }
        let trace = self.forward_trace(tokens, self.word_rows(tokens), &mut Dropout::inference())?;
        let mut grads = self.params.zeros_like();
        let nll = self.backward(&trace, gold, &mut grads);
        Ok((nll, grads))
    }

    /// Log-likelihood of `gold` under inference-mode distributions.
    pub fn log_likelihood<S: AsRef<str>>(&self, tokens: &[S], gold: &[usize]) -> Result<f64> {
        check_len("gold tags", tokens.len(), gold.len())?;
        let probs = self.forward(tokens, &mut Dropout::inference())?;
        Ok(probs.iter().zip(gold).map(|(p, &g)| p[g].max(f64::MIN_POSITIVE).ln()).sum())
    }
}

/// Rows of all lookup tables, UNK rows excluded: word types plus character
/// types in the full modes, character types alone otherwise.
pub fn count_lookup_params(model: &TaggerModel) -> usize {
    model.words.as_ref().map_or(0, |w| w.len()) + model.char_vocab().len()
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::build_char_vocab;
    use crate::numerics::{finite_diff_grad, flatten, relative_error, unflatten_into};
    use crate::rng::{derive, stream};

    fn tags(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("T{i}")).collect()
    }

    fn model(mode: InputMode, highway: bool, seed: u64) -> TaggerModel {
        let mut rng = derive(seed, stream::TAGGER_INIT, 0);
        let vocab = build_char_vocab(&["cat", "dog", "ran"]).unwrap();
        let chars = CharEncoder::random(vocab, 3, highway, &mut rng);
        let words = mode.uses_words().then(|| WordLookup::new(["cat", "dog", "ran"]));
        let mut m = TaggerModel::random(mode, tags(3), words, 2, chars, &mut derive(seed, 9, 9), &mut rng).unwrap();
        // Nonzero biases so every gradient path is exercised.
        let mut brng = derive(seed, 99, 0);
        for b in [&mut m.params.proj_bias, &mut m.params.b1, &mut m.params.b2] {
            b.iter_mut().for_each(|v| *v = brng.random_range(-0.5..0.5));
        }
        m
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut m = model(InputMode::Char, false, 1);
        m.params.w2 = Mat::zeros(3, 3);
        m.params.b2 = vec![0.0; 3];
        for row in m.forward(&["cat", "ran"], &mut Dropout::inference()).unwrap() {
            for p in row {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_tag_is_certain() {
        let mut rng = derive(0, 0, 0);
        let chars = CharEncoder::random(build_char_vocab(&["ab"]).unwrap(), 2, false, &mut rng);
        let m = TaggerModel::random(InputMode::Char, tags(1), None, 0, chars, &mut derive(1, 1, 1), &mut rng).unwrap();
        assert_eq!(m.forward(&["a", "zz"], &mut Dropout::inference()).unwrap(), vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn distributions_sum_to_one_and_unseen_tokens_work() {
        for mode in [InputMode::Full, InputMode::Char] {
            let m = model(mode, true, 4);
            let probs = m.forward(&["cat", "zebra", "Q"], &mut Dropout::inference()).unwrap();
            for row in probs {
                assert!(row.iter().all(|&p| p >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert!(model(InputMode::Char, false, 0).forward::<&str>(&[], &mut Dropout::inference()).is_err());
    }

    #[test]
    fn lookup_count() {
        let m = model(InputMode::Full, false, 0);
        assert_eq!(count_lookup_params(&m), 3 + 8);
        assert_eq!(count_lookup_params(&model(InputMode::Char, false, 0)), 8);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in InputMode::ALL {
            assert_eq!(m.name().parse::<InputMode>().unwrap(), m);
        }
        assert!("word".parse::<InputMode>().is_err());
    }

    fn check_gradients(mode: InputMode, highway: bool, seed: u64, dropout_rate: f64) {
        let m = model(mode, highway, seed);
        let tokens = ["cat", "dgo", "xr"];
        let gold = [0usize, 2, 1];
        let rows = m.word_rows(&tokens);
        let make_dropout = || {
            if dropout_rate > 0.0 {
                Dropout::training(dropout_rate, derive(seed, stream::DROPOUT, 0)).unwrap()
            } else {
                Dropout::inference()
            }
        };
        let trace = m.forward_trace(&tokens, rows.clone(), &mut make_dropout()).unwrap();
        let mut grads = m.params.zeros_like();
        m.backward(&trace, &gold, &mut grads);
        let analytic = flatten(&grads);

        let x0 = flatten(&m.params);
        let mut probe = m.clone();
        let numeric = finite_diff_grad(
            |x| {
                unflatten_into(&mut probe.params, x);
                let t = probe.forward_trace(&tokens, rows.clone(), &mut make_dropout()).unwrap();
                -t.probs.iter().zip(&gold).map(|(p, &g)| p[g].ln()).sum::<f64>()
            },
            &x0,
            1e-6,
        );
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-5, "{mode} highway={highway} seed={seed}: rel err {err}");
    }

    #[test]
    fn log_likelihood_gradients() {
        for seed in 0..5 {
            check_gradients(InputMode::Char, false, seed, 0.0);
            check_gradients(InputMode::Full, true, seed, 0.0);
        }
        check_gradients(InputMode::Full, false, 11, 0.3);
    }
}
