use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Inverted dropout with its own generator.
///
/// In training mode each coordinate is kept with probability `1 − rate` and
/// survivors are scaled by `1 / (1 − rate)`, so inference is the identity.
#[derive(Clone, Debug)]
pub struct Dropout {
    rate: f64,
    rng: Option<SeededRng>,
}

impl Dropout {
    pub fn inference() -> Self {
        Dropout { rate: 0.0, rng: None }
    }

    pub fn training(rate: f64, rng: SeededRng) -> Result<Self> {
        check_rate(rate)?;
        Ok(Dropout {
            rate,
            rng: Some(rng),
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_active(&self) -> bool {
        self.rng.is_some() && self.rate > 0.0
    }

    /// A multiplicative mask of length `n`, or `None` when dropout is off.
    /// An inactive dropout never touches its generator.
    pub fn mask(&mut self, n: usize) -> Option<Vec<f64>> {
        if !self.is_active() {
            return None;
        }
        let rng = self.rng.as_mut()?;
        Some(sample_mask(n, self.rate, rng))
    }

    /// Mutable access to the generator, if in training mode.
    pub fn rng_mut(&mut self) -> Option<&mut SeededRng> {
        self.rng.as_mut()
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )))
    }
}

fn sample_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub(crate) fn apply_mask(v: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    match mask {
        Some(m) => v.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => v.to_vec(),
    }
}

pub fn dropout_apply<R: Rng + ?Sized>(v: &[f64], rate: f64, rng: &mut R, training: bool) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(v.to_vec());
    }
    let mask = sample_mask(v.len(), rate, rng);
    Ok(apply_mask(v, Some(&mask)))
}
