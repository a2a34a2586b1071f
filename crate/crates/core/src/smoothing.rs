//! Truncated Fourier smoothing of per-window quantities across the cycle.
//!
//! Window-local fits produce one value per window center; smoothing them
//! with a low-order Fourier series yields a model that can be queried at any
//! phase and is continuous around the circle. On an equally spaced grid the
//! projection below is the least-squares fit.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Checks that `order` harmonics can be fit on `windows` equally spaced
/// centers without aliasing.
pub fn validate_order(order: usize, windows: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter("smoothing order must be at least 1".into()));
    }
    if 2 * order + 1 >= windows {
        return Err(Error::InvalidParameter(format!(
            "smoothing order {order} aliases on {windows} windows (need 2*order + 1 < windows)"
        )));
    }
    Ok(())
}

/// A matrix-valued function of phase: per-window value matrices projected
/// onto a truncated Fourier basis, one independent series per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedWeightField {
    mean: DMatrix<f64>,
    cos_terms: Vec<DMatrix<f64>>,
    sin_terms: Vec<DMatrix<f64>>,
}

impl SmoothedWeightField {
    /// Fits one value matrix per window; window `m` sits at `2pi m / M`.
    pub fn fit(values: &[DMatrix<f64>], order: usize) -> Result<Self> {
        let m = values.len();
        validate_order(order, m)?;
        let (rows, cols) = values[0].shape();
        if values.iter().any(|v| v.shape() != (rows, cols)) {
            return Err(Error::InvalidParameter("window value matrices differ in shape".into()));
        }

        let mut mean = DMatrix::zeros(rows, cols);
        for v in values {
            mean += v;
        }
        mean /= m as f64;

        let mut cos_terms = Vec::with_capacity(order);
        let mut sin_terms = Vec::with_capacity(order);
        for h in 1..=order {
            let mut ch = DMatrix::zeros(rows, cols);
            let mut sh = DMatrix::zeros(rows, cols);
            for (j, v) in values.iter().enumerate() {
                let phase = h as f64 * 2.0 * PI * j as f64 / m as f64;
                ch += v * phase.cos();
                sh += v * phase.sin();
            }
            ch *= 2.0 / m as f64;
            sh *= 2.0 / m as f64;
            cos_terms.push(ch);
            sin_terms.push(sh);
        }

        Ok(Self {
            mean,
            cos_terms,
            sin_terms,
        })
    }

    pub fn order(&self) -> usize {
        self.cos_terms.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean.shape()
    }

    /// Value matrix at phase `phi`.
    pub fn eval(&self, phi: f64) -> DMatrix<f64> {
        let mut out = self.mean.clone();
        for (h, (c, s)) in self.cos_terms.iter().zip(&self.sin_terms).enumerate() {
            let hphi = (h + 1) as f64 * phi;
            let (sn, cs) = hphi.sin_cos();
            out += c * cs;
            out += s * sn;
        }
        out
    }

    /// `eval(phi) * x` without materializing the full matrix.
    pub fn eval_mul(&self, phi: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.mean * x;
        for (h, (c, s)) in self.cos_terms.iter().zip(&self.sin_terms).enumerate() {
            let hphi = (h + 1) as f64 * phi;
            let (sn, cs) = hphi.sin_cos();
            out.gemv(cs, c, x, 1.0);
            out.gemv(sn, s, x, 1.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_values_fit_exactly() {
        let values: Vec<_> = (0..16).map(|_| DMatrix::from_element(2, 3, 1.7)).collect();
        let field = SmoothedWeightField::fit(&values, 4).unwrap();
        for k in 0..10 {
            let v = field.eval(0.23 * k as f64);
            assert!((v - DMatrix::from_element(2, 3, 1.7)).amax() < 1e-12);
        }
    }

    #[test]
    fn low_harmonics_are_recovered_exactly() {
        // a signal within the basis is reproduced at arbitrary phases
        let m = 16;
        let truth = |phi: f64| 0.5 + 1.2 * phi.cos() - 0.4 * (3.0 * phi).sin();
        let values: Vec<_> = (0..m)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / m as f64;
                DMatrix::from_element(1, 1, truth(phi))
            })
            .collect();
        let field = SmoothedWeightField::fit(&values, 4).unwrap();
        for k in 0..50 {
            let phi = 2.0 * PI * k as f64 / 50.0;
            assert_relative_eq!(field.eval(phi)[(0, 0)], truth(phi), epsilon = 1e-12);
        }
    }

    #[test]
    fn eval_mul_matches_eval() {
        let values: Vec<_> = (0..12)
            .map(|j| DMatrix::from_fn(3, 4, |r, c| ((j + r703(r, c)) as f64 * 0.37).sin()))
            .collect();
        fn r703(r: usize, c: usize) -> usize {
            7 * r + 3 * c
        }
        let field = SmoothedWeightField::fit(&values, 5).unwrap();
        let x = DVector::from_column_slice(&[0.2, -1.0, 0.5, 4.0]);
        for k in 0..10 {
            let phi = 0.61 * k as f64;
            let a = field.eval(phi) * &x;
            let b = field.eval_mul(phi, &x);
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn aliasing_orders_rejected() {
        assert!(validate_order(8, 16).is_err());
        assert!(validate_order(7, 16).is_ok());
        assert!(validate_order(0, 16).is_err());
    }
}
