use rand::Rng;

use super::linalg::{sigmoid, Mat};
use super::ParamSet;
use crate::error::{check_len, Result};

/// Gated interpolation `t ⊙ h + (1 − t) ⊙ z` with `t = σ(W h + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HighwayParams {
    pub w: Mat,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HighwayTrace {
    pub gate: Vec<f64>,
}

impl HighwayParams {
    pub fn zeros(dim: usize) -> Self {
        HighwayParams {
            w: Mat::zeros(dim, dim),
            b: vec![0.0; dim],
        }
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        HighwayParams {
            w: Mat::glorot(dim, dim, rng),
            b: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn forward(&self, h: &[f64], z: &[f64]) -> Result<(Vec<f64>, HighwayTrace)> {
        let d = self.dim();
        check_len("highway W rows", d, self.w.rows())?;
        check_len("highway W cols", d, self.w.cols())?;
        check_len("highway h", d, h.len())?;
        check_len("highway z", d, z.len())?;
        let mut gate = self.b.clone();
        self.w.matvec_acc(h, &mut gate);
        gate.iter_mut().for_each(|v| *v = sigmoid(*v));
        let out = (0..d).map(|k| gate[k] * h[k] + (1.0 - gate[k]) * z[k]).collect();
        Ok((out, HighwayTrace { gate }))
    }

    /// Returns `(dh, dz)`; parameter gradients accumulate into `grads`.
    pub fn backward(
        &self,
        trace: &HighwayTrace,
        h: &[f64],
        z: &[f64],
        dout: &[f64],
        grads: &mut HighwayParams,
    ) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let t = &trace.gate;
        let da: Vec<f64> = (0..d)
            .map(|k| dout[k] * (h[k] - z[k]) * t[k] * (1.0 - t[k]))
            .collect();
        grads.w.add_outer(&da, h);
        for (b, v) in grads.b.iter_mut().zip(&da) {
            *b += v;
        }
        let mut dh: Vec<f64> = (0..d).map(|k| dout[k] * t[k]).collect();
        self.w.tr_matvec_acc(&da, &mut dh);
        let dz = (0..d).map(|k| dout[k] * (1.0 - t[k])).collect();
        (dh, dz)
    }
}

impl ParamSet for HighwayParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b]
    }
}

pub fn highway_combine(w: &Mat, b: &[f64], h: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let params = HighwayParams {
        w: w.clone(),
        b: b.to_vec(),
    };
    params.forward(h, z).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, flatten, relative_error, unflatten_into};
    use crate::rng::derive;

    #[test]
    fn zero_gate_params_average() {
        let out = highway_combine(&Mat::zeros(3, 3), &[0.0; 3], &[1.0, 2.0, 3.0], &[3.0, 0.0, -1.0]).unwrap();
        assert_eq!(out, vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn closed_gate_passes_z() {
        let z = [0.25, -7.0, 3.5];
        let out = highway_combine(&Mat::zeros(3, 3), &[-50.0; 3], &[9.0, 9.0, 9.0], &z).unwrap();
        for (o, z) in out.iter().zip(z) {
            assert!((o - z).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(highway_combine(&Mat::zeros(2, 2), &[0.0; 2], &[1.0; 3], &[1.0; 2]).is_err());
        assert!(highway_combine(&Mat::zeros(2, 3), &[0.0; 2], &[1.0; 2], &[1.0; 2]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..20 {
            let mut rng = derive(seed, 77, 0);
            let d = 5;
            let p = HighwayParams {
                w: Mat::uniform(d, d, 1.0, &mut rng),
                b: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let h: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = |p: &HighwayParams, h: &[f64], z: &[f64]| -> f64 {
                let (o, _) = p.forward(h, z).unwrap();
                o.iter().zip(&r).map(|(a, b)| a * b).sum()
            };

            let (_, trace) = p.forward(&h, &z).unwrap();
            let mut g = HighwayParams::zeros(d);
            let (dh, dz) = p.backward(&trace, &h, &z, &r, &mut g);

            let num_p = finite_diff_grad(
                |v| {
                    let mut q = p.clone();
                    unflatten_into(&mut q, v);
                    loss(&q, &h, &z)
                },
                &flatten(&p),
                1e-5,
            );
            assert!(relative_error(&flatten(&g), &num_p) < 1e-6);
            let num_h = finite_diff_grad(|v| loss(&p, v, &z), &h, 1e-5);
            assert!(relative_error(&dh, &num_h) < 1e-6);
            let num_z = finite_diff_grad(|v| loss(&p, &h, v), &z, 1e-5);
            assert!(relative_error(&dz, &num_z) < 1e-6);
        }
    }
}
