use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::numerics::{dot, norm2};

/// Vectors with an L2 norm at or below this are rejected by `Dcos`.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceMetric {
    /// Manhattan, `Σ|uᵢ − vᵢ|`.
    D1,
    /// Euclidean, `‖u − v‖₂`.
    Dsqrt2,
    /// Squared error, `Σ(uᵢ − vᵢ)²`.
    D2,
    /// `maxᵢ |uᵢ − vᵢ|`.
    Dinf,
    /// Negative cosine similarity.
    Dcos,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 5] = [
        DistanceMetric::D1,
        DistanceMetric::Dsqrt2,
        DistanceMetric::D2,
        DistanceMetric::Dinf,
        DistanceMetric::Dcos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::D1 => "d1",
            DistanceMetric::Dsqrt2 => "dsqrt2",
            DistanceMetric::D2 => "d2",
            DistanceMetric::Dinf => "dinf",
            DistanceMetric::Dcos => "dcos",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?} (expected d1|dsqrt2|d2|dinf|dcos)")))
    }
}

fn cos_norms(x: &[f64], h: &[f64]) -> Result<(f64, f64)> {
    let (nx, nh) = (norm2(x), norm2(h));
    if nx <= NORM_EPS || nh <= NORM_EPS {
        return Err(Error::Degenerate(format!(
            "cosine of a zero-norm vector (norms {nx:e}, {nh:e})"
        )));
    }
    Ok((nx, nh))
}

/// `D(x, h)` for teacher `x` and student `h`.
pub fn distance(metric: DistanceMetric, x: &[f64], h: &[f64]) -> Result<f64> {
    check_len("distance", x.len(), h.len())?;
    let diffs = x.iter().zip(h).map(|(a, b)| (a - b).abs());
    Ok(match metric {
        DistanceMetric::D1 => diffs.sum(),
        DistanceMetric::D2 => diffs.map(|d| d * d).sum(),
        DistanceMetric::Dsqrt2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        DistanceMetric::Dinf => diffs.fold(0.0, f64::max),
        DistanceMetric::Dcos => {
            let (nx, nh) = cos_norms(x, h)?;
            (-dot(x, h) / (nx * nh)).clamp(-1.0, 1.0)
        }
    })
}

/// `∂D(x, h)/∂h`, treating the teacher `x` as constant.
///
/// At kinks a fixed subgradient is used: `D1` gives 0 for tied coordinates,
/// `Dinf` puts `±1` on the lowest-index maximizing coordinate only, and
/// `Dsqrt2` gives the zero vector when `h = x`.
pub fn distance_grad(metric: DistanceMetric, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    check_len("distance_grad", x.len(), h.len())?;
    let diff = h.iter().zip(x).map(|(a, b)| a - b);
    Ok(match metric {
        DistanceMetric::D1 => diff
            .map(|d| if d == 0.0 { 0.0 } else { d.signum() })
            .collect(),
        DistanceMetric::D2 => diff.map(|d| 2.0 * d).collect(),
        DistanceMetric::Dsqrt2 => {
            let d: Vec<f64> = diff.collect();
            let n = norm2(&d);
            if n == 0.0 {
                vec![0.0; d.len()]
            } else {
                d.into_iter().map(|v| v / n).collect()
            }
        }
        DistanceMetric::Dinf => {
            let d: Vec<f64> = diff.collect();
            let mut best = 0;
            for (i, v) in d.iter().enumerate() {
                if v.abs() > d[best].abs() {
                    best = i;
                }
            }
            let mut g = vec![0.0; d.len()];
            if let Some(&v) = d.get(best) {
                if v != 0.0 {
                    g[best] = v.signum();
                }
            }
            g
        }
        DistanceMetric::Dcos => {
            let (nx, nh) = cos_norms(x, h)?;
            let xh = dot(x, h);
            x.iter()
                .zip(h)
                .map(|(xi, hi)| -(xi / (nx * nh) - xh * hi / (nx * nh * nh * nh)))
                .collect()
        }
    })
}
