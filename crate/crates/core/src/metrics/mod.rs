//! Distance functions between teacher and student vectors, their gradients
//! with respect to the student, and closed-form solutions of the linear
//! special case used as test oracles.

mod distance;
mod linear;

pub use distance::{distance, distance_grad, DistanceMetric, NORM_EPS};
pub use linear::{lad_uniform_oracle, ols_closed_form, LinearModelProblem};
