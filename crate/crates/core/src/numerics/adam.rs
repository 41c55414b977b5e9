use super::ParamSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
///
/// Updates are lazy per coordinate: a coordinate whose gradient is exactly
/// zero keeps both its moments and its value for that step, while the step
/// counter still advances. For lookup tables this means rows that took no
/// part in a batch stay put.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        AdamState {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place. Nothing is modified when an
    /// error is returned.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        let gts = grads.tensors();
        if gts.len() != self.m.len() {
            return Err(Error::dim("adam tensors", self.m.len(), gts.len()));
        }
        for (ti, (g, m)) in gts.iter().zip(&self.m).enumerate() {
            if g.len() != m.len() {
                return Err(Error::dim("adam tensor length", m.len(), g.len()));
            }
            if let Some(k) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient tensor {ti} component {k} is {} at step {}",
                    g[k],
                    self.step + 1
                )));
            }
        }

        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(gts)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for k in 0..p.len() {
                let gk = g[k];
                if gk == 0.0 {
                    continue;
                }
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_noop() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        st.step(&mut p, &vec![0.5, -0.5], 0.1).unwrap();
        let before = p.clone();
        st.step(&mut p, &vec![0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.steps(), 2);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [3.0, -0.01, 1e4] {
            let mut p = vec![0.0];
            let mut st = AdamState::new(&p, AdamConfig::default());
            st.step(&mut p, &vec![g], 0.05).unwrap();
            assert!((p[0] + 0.05 * f64::signum(g)).abs() < 1e-6, "g={g} p={}", p[0]);
        }
    }

    #[test]
    fn quadratic_trajectory() {
        // f(θ) = θ², θ0 = 1, lr = 0.1; values from evaluating the Adam
        // recurrence by hand (β1 = 0.9, β2 = 0.999, ε = 1e-8).
        let expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303];
        let mut p = vec![1.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        for e in expected {
            let g = vec![2.0 * p[0]];
            st.step(&mut p, &g, 0.1).unwrap();
            assert!((p[0] - e).abs() < 1e-12, "{} vs {e}", p[0]);
        }
    }

    #[test]
    fn nan_gradient_fails_without_mutation() {
        let mut p = vec![1.0, 2.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        let err = st.step(&mut p, &vec![0.1, f64::NAN], 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(st.steps(), 0);
    }

    #[test]
    fn bad_learning_rate() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        assert!(st.step(&mut p, &vec![1.0], 0.0).is_err());
    }
}
