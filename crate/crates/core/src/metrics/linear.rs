use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::numerics::Mat;

/// The linear special case `h^w_i = θᵢᵀ z^w` with fixed features.
///
/// `z` holds one feature row `z^w ∈ ℝ^{d′}` per word and `x` the matching
/// teacher rows `x^w ∈ ℝ^d`.
#[derive(Clone, Debug)]
pub struct LinearModelProblem {
    pub z: Mat,
    pub x: Mat,
}

impl LinearModelProblem {
    pub fn new(z: Mat, x: Mat) -> Result<Self> {
        check_len("LinearModelProblem rows", z.rows(), x.rows())?;
        Ok(LinearModelProblem { z, x })
    }

    /// `z^w = (1/d′)·1` for every word.
    pub fn uniform_design(x: Mat, feature_dim: usize) -> Self {
        let n = x.rows();
        let z = Mat::from_vec(n, feature_dim, vec![1.0 / feature_dim as f64; n * feature_dim])
            .expect("shape is consistent by construction");
        LinearModelProblem { z, x }
    }

    pub fn feature_dim(&self) -> usize {
        self.z.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.x.cols()
    }
}

/// Minimizer of `Σ|v − θ|` over a list: the lower median.
pub fn lad_uniform_oracle(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median of an empty list"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[(v.len() - 1) / 2])
}

/// Least-squares parameters `Θ* = (ZᵀZ)⁻¹ZᵀX`, one column per output
/// coordinate (`d′ × d`). Fails on rank-deficient `Z`.
pub fn ols_closed_form(problem: &LinearModelProblem) -> Result<Mat> {
    let (n, dp) = (problem.z.rows(), problem.z.cols());
    let d = problem.x.cols();
    let z = DMatrix::from_row_slice(n, dp, problem.z.as_slice());
    let x = DMatrix::from_row_slice(n, d, problem.x.as_slice());

    let sv = z.singular_values();
    let smax = sv.max();
    let smin = if n >= dp { sv.min() } else { 0.0 };
    if dp == 0 || smax == 0.0 || smin <= smax * 1e-12 * (n.max(dp) as f64) {
        return Err(Error::Singular(format!(
            "design matrix {n}×{dp} does not have full column rank"
        )));
    }

    let gram = z.transpose() * &z;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("ZᵀZ is not positive definite".into()))?;
    let theta = chol.solve(&(z.transpose() * x));

    let mut out = Mat::zeros(dp, d);
    for r in 0..dp {
        for c in 0..d {
            out.set(r, c, theta[(r, c)]);
        }
    }
    Ok(out)
}
