//! Fitting a student model to a teacher table by minimizing
//! `Σ_w D(x^w, h^w)` for a chosen distance `D`.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use log::info;
use rand::seq::SliceRandom;

use crate::embeddings::EmbeddingTable;
use crate::encoder::{CharEncoder, CharEncoderParams};
use crate::error::{check_len, Error, Result};
use crate::metrics::{distance, distance_grad, DistanceMetric, LinearModelProblem};
use crate::numerics::{clip_global_norm, AdamConfig, AdamState, Dropout, Mat, ParamSet};
use crate::rng::{derive, stream};

pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub metric: DistanceMetric,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    pub use_highway: bool,
    pub batch_size: usize,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            metric: DistanceMetric::D2,
            epochs: 10,
            learning_rate: 1e-3,
            dropout: 0.0,
            seed: 0,
            use_highway: false,
            batch_size: 1,
            clip_norm: DEFAULT_CLIP_NORM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be ≥ 1".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidArgument("clip norm must be > 0".into()));
        }
        Ok(())
    }
}

/// Mean reconstruction loss per word, measured in inference mode before
/// training and after each epoch.
#[derive(Clone, Debug, Default)]
pub struct LossTrace {
    pub initial: f64,
    pub epochs: Vec<f64>,
    pub wall: Vec<Duration>,
}

impl LossTrace {
    pub fn final_loss(&self) -> f64 {
        self.epochs.last().copied().unwrap_or(self.initial)
    }

    /// `epoch<TAB>mean_loss` lines, epoch 0 being the initial loss. Wall-clock
    /// times are left out so that the output is reproducible.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\tmean_loss\n");
        out.push_str(&format!("0\t{}\n", self.initial));
        for (i, l) in self.epochs.iter().enumerate() {
            out.push_str(&format!("{}\t{}\n", i + 1, l));
        }
        out
    }
}

/// A differentiable map from words to vectors.
pub trait Student: Sync {
    type Params: ParamSet + Clone;

    fn dim(&self) -> usize;
    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;
    fn zero_grads(&self) -> Self::Params;

    /// Inference-mode vector for `word`.
    fn embed(&self, word: &str) -> Result<Vec<f64>>;

    /// Runs the model on `word`, asks `loss` for `(value, ∂value/∂output)` and
    /// accumulates the parameter gradient into `grads`. Returns the value.
    fn accumulate(
        &self,
        word: &str,
        dropout: &mut Dropout,
        grads: &mut Self::Params,
        loss: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<f64>;
}

impl Student for CharEncoder {
    type Params = CharEncoderParams;

    fn dim(&self) -> usize {
        CharEncoder::dim(self)
    }
    fn params(&self) -> &CharEncoderParams {
        &self.params
    }
    fn params_mut(&mut self) -> &mut CharEncoderParams {
        &mut self.params
    }
    fn zero_grads(&self) -> CharEncoderParams {
        self.params.zeros_like()
    }
    fn embed(&self, word: &str) -> Result<Vec<f64>> {
        CharEncoder::embed(self, word)
    }
    fn accumulate(
        &self,
        word: &str,
        dropout: &mut Dropout,
        grads: &mut CharEncoderParams,
        loss: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<f64> {
        let (enc, trace) = self.forward(word, dropout)?;
        let (value, d_out) = loss(enc.student())?;
        self.backward(&trace, &d_out, grads);
        Ok(value)
    }
}

/// `h^w = Θᵀ z^w` with fixed per-word features; `Θ` is `d′ × d`.
#[derive(Clone, Debug)]
pub struct LinearStudent {
    pub theta: Mat,
    features: HashMap<String, Vec<f64>>,
}

impl LinearStudent {
    /// Pairs row `i` of `problem.z` with the `i`-th word of `words`, and
    /// returns the teacher table built from `problem.x`.
    pub fn from_problem<S: AsRef<str>>(problem: &LinearModelProblem, words: &[S]) -> Result<(Self, EmbeddingTable)> {
        check_len("linear student words", problem.z.rows(), words.len())?;
        let mut teacher = EmbeddingTable::new(problem.output_dim());
        let mut features = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            teacher.insert_unique(w.as_ref(), problem.x.row(i))?;
            features.insert(w.as_ref().to_string(), problem.z.row(i).to_vec());
        }
        let student = LinearStudent {
            theta: Mat::zeros(problem.feature_dim(), problem.output_dim()),
            features,
        };
        Ok((student, teacher))
    }

    fn features(&self, word: &str) -> Result<&[f64]> {
        self.features
            .get(word)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownWord(word.to_string()))
    }
}

impl Student for LinearStudent {
    type Params = Mat;

    fn dim(&self) -> usize {
        self.theta.cols()
    }
    fn params(&self) -> &Mat {
        &self.theta
    }
    fn params_mut(&mut self) -> &mut Mat {
        &mut self.theta
    }
    fn zero_grads(&self) -> Mat {
        Mat::zeros(self.theta.rows(), self.theta.cols())
    }
    fn embed(&self, word: &str) -> Result<Vec<f64>> {
        let z = self.features(word)?;
        let mut out = vec![0.0; self.dim()];
        self.theta.tr_matvec_acc(z, &mut out);
        Ok(out)
    }
    fn accumulate(
        &self,
        word: &str,
        _dropout: &mut Dropout,
        grads: &mut Mat,
        loss: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<f64> {
        let h = self.embed(word)?;
        let (value, d_out) = loss(&h)?;
        grads.add_outer(self.features(word)?, &d_out);
        Ok(value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSummary {
    pub total: f64,
    pub mean: f64,
}

/// `Σ_w D(x^w, student(w))` over the teacher vocabulary, in inference mode.
pub fn reconstruction_loss<S: Student>(student: &S, teacher: &EmbeddingTable, metric: DistanceMetric) -> Result<LossSummary> {
    if teacher.is_empty() {
        return Err(Error::Empty("teacher table"));
    }
    check_len("teacher dimension", student.dim(), teacher.dim())?;
    let mut total = 0.0;
    for (word, x) in teacher.iter() {
        total += distance(metric, x, &student.embed(word)?)?;
    }
    Ok(LossSummary {
        total,
        mean: total / teacher.len() as f64,
    })
}

/// Optimizes the student for `config.epochs` passes over the teacher words.
///
/// Each epoch visits the words in an order shuffled by a generator derived
/// from the seed and epoch number; gradients are summed over a batch, clipped
/// to `config.clip_norm` and applied with Adam.
pub fn train_reconstruction<S: Student + Clone>(
    config: &TrainConfig,
    teacher: &EmbeddingTable,
    init: &S,
) -> Result<(S, LossTrace)> {
    config.validate()?;
    if teacher.is_empty() {
        return Err(Error::Empty("teacher table"));
    }
    check_len("teacher dimension", init.dim(), teacher.dim())?;

    let mut student = init.clone();
    let mut trace = LossTrace {
        initial: reconstruction_loss(&student, teacher, config.metric)?.mean,
        ..Default::default()
    };
    if config.epochs == 0 {
        return Ok((student, trace));
    }

    let mut adam = AdamState::new(student.params(), AdamConfig::default());
    let mut grads = student.zero_grads();
    let metric = config.metric;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..teacher.len()).collect();
        order.shuffle(&mut derive(config.seed, stream::SHUFFLE, epoch as u64));
        let mut dropout = if config.dropout > 0.0 {
            Dropout::training(config.dropout, derive(config.seed, stream::DROPOUT, epoch as u64))?
        } else {
            Dropout::inference()
        };

        for batch in order.chunks(config.batch_size) {
            grads.zero();
            for &i in batch {
                let word = teacher.word(i);
                let x = teacher.row(i);
                let mut loss = |h: &[f64]| -> Result<(f64, Vec<f64>)> {
                    Ok((distance(metric, x, h)?, distance_grad(metric, x, h)?))
                };
                let value = student
                    .accumulate(word, &mut dropout, &mut grads, &mut loss)
                    .map_err(|e| annotate(e, epoch, word))?;
                if !value.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "reconstruction loss {value} at epoch {} word {word:?}",
                        epoch + 1
                    )));
                }
            }
            if !grads.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient at epoch {} near word {:?}",
                    epoch + 1,
                    teacher.word(batch[0])
                )));
            }
            clip_global_norm(&mut grads, config.clip_norm);
            adam.step(student.params_mut(), &grads, config.learning_rate)?;
        }

        let mean = reconstruction_loss(&student, teacher, metric)?.mean;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("mean loss {mean} after epoch {}", epoch + 1)));
        }
        trace.epochs.push(mean);
        trace.wall.push(started.elapsed());
        info!("epoch {}/{} {}: mean loss {:.6}", epoch + 1, config.epochs, metric, mean);
    }
    Ok((student, trace))
}

fn annotate(e: Error, epoch: usize, word: &str) -> Error {
    match e {
        Error::Degenerate(m) => Error::Degenerate(format!("{m} (epoch {}, word {word:?})", epoch + 1)),
        Error::NonFinite(m) => Error::NonFinite(format!("{m} (epoch {}, word {word:?})", epoch + 1)),
        other => other,
    }
}
