//! Dense linear algebra, recurrent cells and optimizers with explicit
//! backward passes. All arithmetic is `f64`.

mod adam;
pub(crate) mod dropout;
mod gradcheck;
mod highway;
mod linalg;
mod lstm;

pub use adam::{AdamConfig, AdamState};
pub use dropout::{dropout_apply, Dropout};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use highway::{highway_combine, HighwayParams, HighwayTrace};
pub use linalg::{dot, norm2, sigmoid, Mat};
pub use lstm::{lstm_step, LstmCellParams, LstmSequence, LstmState, LstmStepCache};

/// A bundle of parameter tensors visited in a fixed order.
///
/// Gradients are stored in a value of the same type, which is what lets
/// [`AdamState`] and gradient clipping work over any model.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Rounds every value through `f32`, the precision checkpoints store.
    fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<P: ParamSet>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Copies every tensor into one flat vector, in visiting order.
pub fn flatten<P: ParamSet>(p: &P) -> Vec<f64> {
    p.tensors().iter().flat_map(|t| t.iter().copied()).collect()
}

/// Inverse of [`flatten`].
pub fn unflatten_into<P: ParamSet>(p: &mut P, flat: &[f64]) {
    let mut off = 0;
    for t in p.tensors_mut() {
        let n = t.len();
        t.copy_from_slice(&flat[off..off + n]);
        off += n;
    }
    assert_eq!(off, flat.len(), "flat parameter vector has wrong length");
}

impl ParamSet for Mat {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

impl ParamSet for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}
