/// Central-difference gradient of `f` at `x`:
/// `(f(x + eps·e_i) - f(x - eps·e_i)) / (2·eps)` for each coordinate.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let plus = f(&probe);
            probe[i] = orig - eps;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, with the denominator floored at 1e-6 so that
/// two (numerically) zero gradients compare equal instead of dividing noise
/// by noise.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_error: length mismatch");
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square() {
        let g = finite_diff_grad(|x| x.iter().map(|v| v * v).sum(), &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -3.0, 8.0], 1e-5);
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn product_rule() {
        let g = finite_diff_grad(|x| x[0] * x[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 5.0).abs() < 1e-6);
        assert!((g[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn relative_error_of_zeros_is_zero() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((relative_error(&[1.0, 0.0], &[0.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
