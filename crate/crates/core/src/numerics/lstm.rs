use rand::Rng;

use super::linalg::{ensure_finite, sigmoid, Mat};
use super::ParamSet;
use crate::error::{check_len, Result};

/// Parameters of one LSTM direction.
///
/// The four gates are stacked row-wise in the order input, forget, output,
/// candidate: rows `[0, H)` belong to the input gate, `[H, 2H)` to the forget
/// gate and so on. No peepholes.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    pub w_x: Mat,
    pub w_h: Mat,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Forward trace over a whole sequence.
#[derive(Clone, Debug)]
pub struct LstmSequence {
    pub states: Vec<LstmState>,
    caches: Vec<LstmStepCache>,
}

impl LstmSequence {
    pub fn last_h(&self) -> &[f64] {
        &self.states.last().expect("empty LSTM sequence").h
    }
}

pub const FORGET_BIAS_INIT: f64 = 1.0;

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCellParams {
            w_x: Mat::zeros(4 * hidden, input),
            w_h: Mat::zeros(4 * hidden, hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate at 1.0.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = LstmCellParams {
            w_x: Mat::glorot(4 * hidden, input, rng),
            w_h: Mat::glorot(4 * hidden, hidden, rng),
            bias: vec![0.0; 4 * hidden],
        };
        p.bias[hidden..2 * hidden].fill(FORGET_BIAS_INIT);
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_x.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.cols()
    }

    pub fn step(&self, x: &[f64], prev: &LstmState) -> Result<(LstmState, LstmStepCache)> {
        let hs = self.hidden_size();
        check_len("lstm_step input", self.input_size(), x.len())?;
        check_len("lstm_step hidden state", hs, prev.h.len())?;
        check_len("lstm_step cell state", hs, prev.c.len())?;

        let mut a = self.bias.clone();
        self.w_x.matvec_acc(x, &mut a);
        self.w_h.matvec_acc(&prev.h, &mut a);

        let i: Vec<f64> = a[..hs].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = a[hs..2 * hs].iter().map(|&v| sigmoid(v)).collect();
        let o: Vec<f64> = a[2 * hs..3 * hs].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = a[3 * hs..].iter().map(|v| v.tanh()).collect();

        let c: Vec<f64> = (0..hs).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..hs).map(|k| o[k] * tanh_c[k]).collect();

        ensure_finite("lstm_step h", &h)?;
        ensure_finite("lstm_step c", &c)?;

        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            i,
            f,
            o,
            g,
            tanh_c,
        };
        Ok((LstmState { h, c }, cache))
    }

    /// Backpropagates `dh`, `dc` (gradients w.r.t. the step's output state)
    /// through one step. Parameter gradients are accumulated into `grads`;
    /// returns `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &self,
        cache: &LstmStepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmCellParams,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden_size();
        let mut da = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for k in 0..hs {
            let (i, f, o, g, tc) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dct * g * i * (1.0 - i);
            da[hs + k] = dct * cache.c_prev[k] * f * (1.0 - f);
            da[2 * hs + k] = dh[k] * tc * o * (1.0 - o);
            da[3 * hs + k] = dct * i * (1.0 - g * g);
            dc_prev[k] = dct * f;
        }
        grads.w_x.add_outer(&da, &cache.x);
        grads.w_h.add_outer(&da, &cache.h_prev);
        for (b, d) in grads.bias.iter_mut().zip(&da) {
            *b += d;
        }
        let mut dx = vec![0.0; self.input_size()];
        self.w_x.tr_matvec_acc(&da, &mut dx);
        let mut dh_prev = vec![0.0; hs];
        self.w_h.tr_matvec_acc(&da, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }

    /// Runs the cell over `inputs` starting from the zero state.
    pub fn forward_sequence<X: AsRef<[f64]>>(&self, inputs: &[X]) -> Result<LstmSequence> {
        let mut state = LstmState::zeros(self.hidden_size());
        let mut states = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (next, cache) = self.step(x.as_ref(), &state)?;
            states.push(next.clone());
            caches.push(cache);
            state = next;
        }
        Ok(LstmSequence { states, caches })
    }

    /// Backpropagation through time. `dhs[t]` is the external gradient on the
    /// hidden output of step `t`; returns the gradient for each input.
    pub fn backward_sequence(
        &self,
        seq: &LstmSequence,
        dhs: &[Vec<f64>],
        grads: &mut LstmCellParams,
    ) -> Vec<Vec<f64>> {
        let hs = self.hidden_size();
        let n = seq.caches.len();
        debug_assert_eq!(dhs.len(), n);
        let mut dxs = vec![Vec::new(); n];
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        for t in (0..n).rev() {
            let dh: Vec<f64> = dhs[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = self.step_backward(&seq.caches[t], &dh, &dc_next, grads);
            dxs[t] = dx;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dxs
    }
}

impl ParamSet for LstmCellParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w_x.as_slice(), self.w_h.as_slice(), &self.bias]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w_x.as_mut_slice(), self.w_h.as_mut_slice(), &mut self.bias]
    }
}

/// One LSTM step, discarding the backward cache.
pub fn lstm_step(params: &LstmCellParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    params.step(x, prev).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, flatten, relative_error, unflatten_into};
    use crate::rng::derive;

    fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmCellParams::zeros(3, 2);
        let s = lstm_step(&p, &[0.3, -2.0, 5.0], &LstmState::zeros(2)).unwrap();
        assert_eq!(s.h, vec![0.0, 0.0]);
        assert_eq!(s.c, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        // f = σ(10) ≈ 1 - 4.54e-5, i·g = 0.5·tanh(0) = 0, so c ≈ c_prev.
        let mut p = LstmCellParams::zeros(2, 3);
        p.bias[3..6].fill(10.0);
        let prev = LstmState {
            h: vec![0.0; 3],
            c: vec![1.0, 1.0, 1.0],
        };
        let s = lstm_step(&p, &[0.7, -0.2], &prev).unwrap();
        let f = 1.0 / (1.0 + (-10f64).exp());
        for &c in &s.c {
            assert!((c - f).abs() < 1e-15);
            assert!((c - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = LstmCellParams::zeros(3, 2);
        assert!(lstm_step(&p, &[1.0], &LstmState::zeros(2)).is_err());
        assert!(lstm_step(&p, &[1.0; 3], &LstmState::zeros(3)).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let p = LstmCellParams::zeros(1, 1);
        let prev = LstmState {
            h: vec![0.0],
            c: vec![f64::NAN],
        };
        assert!(lstm_step(&p, &[0.0], &prev).is_err());
    }

    // Scalar loss Σ r_t · h_t over a short sequence, with r fixed.
    fn seq_loss(p: &LstmCellParams, xs: &[Vec<f64>], r: &[Vec<f64>]) -> f64 {
        let seq = p.forward_sequence(xs).unwrap();
        seq.states
            .iter()
            .zip(r)
            .map(|(s, r)| s.h.iter().zip(r).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for seed in 0..20 {
            let mut rng = derive(seed, 99, 0);
            let (inp, hid, len) = (3, 4, 4);
            let p = LstmCellParams::random(inp, hid, &mut rng);
            let xs: Vec<Vec<f64>> = (0..len).map(|_| random_vec(&mut rng, inp)).collect();
            let r: Vec<Vec<f64>> = (0..len).map(|_| random_vec(&mut rng, hid)).collect();

            let seq = p.forward_sequence(&xs).unwrap();
            let mut grads = LstmCellParams::zeros(inp, hid);
            let dxs = p.backward_sequence(&seq, &r, &mut grads);

            let theta = flatten(&p);
            let numeric = finite_diff_grad(
                |v| {
                    let mut q = p.clone();
                    unflatten_into(&mut q, v);
                    seq_loss(&q, &xs, &r)
                },
                &theta,
                1e-5,
            );
            let err = relative_error(&flatten(&grads), &numeric);
            assert!(err < 1e-6, "seed {seed}: param rel err {err}");

            for t in 0..len {
                let num_x = finite_diff_grad(
                    |v| {
                        let mut xs2 = xs.clone();
                        xs2[t] = v.to_vec();
                        seq_loss(&p, &xs2, &r)
                    },
                    &xs[t],
                    1e-5,
                );
                let err = relative_error(&dxs[t], &num_x);
                assert!(err < 1e-6, "seed {seed} step {t}: input rel err {err}");
            }
        }
    }

    #[test]
    fn hidden_output_bounded() {
        let mut rng = derive(5, 99, 1);
        let p = LstmCellParams::random(2, 3, &mut rng);
        let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![1e3, -1e3]).collect();
        let seq = p.forward_sequence(&xs).unwrap();
        for s in &seq.states {
            assert!(s.h.iter().all(|v| v.abs() <= 1.0 && v.is_finite()));
        }
    }
}
