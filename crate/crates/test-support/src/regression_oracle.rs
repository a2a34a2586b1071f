//! Direct least-squares solutions for checking recursive estimators.

use nalgebra::{DMatrix, DVector};

/// Exponentially weighted ridge regression solved through the normal
/// equations: sample `i` of `n` carries weight `lambda^(n-1-i)` and the
/// prior precision `I / p0` decays by `lambda^n`.
pub fn weighted_ridge(
    xs: &[DVector<f64>],
    ys: &[f64],
    lambda: f64,
    p0: f64,
) -> DVector<f64> {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let dim = xs[0].len();
    let n = xs.len();
    let mut precision = DMatrix::<f64>::identity(dim, dim) * (lambda.powi(n as i32) / p0);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
        let w = lambda.powi((n - 1 - i) as i32);
        precision.ger(w, x, x, 1.0);
        rhs.axpy(w * y, x, 1.0);
    }
    precision
        .lu()
        .solve(&rhs)
        .expect("normal equations must be solvable with a ridge term")
}

/// Exponentially weighted mean with a decaying pseudo-count prior of
/// strength `1/p0`, matching a scalar recursive filter on the constant
/// regressor.
pub fn exponentially_weighted_mean(ys: &[f64], lambda: f64, p0: f64) -> f64 {
    let n = ys.len();
    let mut num = 0.0;
    let mut den = lambda.powi(n as i32) / p0;
    for (i, &y) in ys.iter().enumerate() {
        let w = lambda.powi((n - 1 - i) as i32);
        num += w * y;
        den += w;
    }
    num / den
}
