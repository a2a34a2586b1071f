//! Model-confidence scoring: how much better the data-driven model
//! predicts the measured body velocity than the phase-averaged baseline.
//!
//! The score is `1 - (data-driven error sum) / (baseline error sum)`:
//! 1 is perfect prediction, 0 means no better than the baseline, negative
//! is worse. The recursive form decays both accumulators each sample so the
//! score tracks a moving window of history.

use crate::error::{Error, Result};
use crate::se2::BodyVelocity;
use serde::{Deserialize, Serialize};

/// Per-component weights applied inside the error norm. Identity by
/// default; override only when the output scales are strongly mismatched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWeights(pub [f64; 3]);

impl Default for NormWeights {
    fn default() -> Self {
        Self([1.0, 1.0, 1.0])
    }
}

impl NormWeights {
    /// Weighted Euclidean distance between two body velocities.
    pub fn error_norm(&self, a: &BodyVelocity, b: &BodyVelocity) -> f64 {
        let dx = self.0[0] * (a.xi_x - b.xi_x);
        let dy = self.0[1] * (a.xi_y - b.xi_y);
        let dth = self.0[2] * (a.xi_theta - b.xi_theta);
        (dx * dx + dy * dy + dth * dth).sqrt()
    }
}

/// Batch confidence over aligned prediction/baseline/truth sequences.
pub fn gamma_batch(
    predictions_data: &[BodyVelocity],
    predictions_baseline: &[BodyVelocity],
    truths: &[BodyVelocity],
    weights: NormWeights,
) -> Result<f64> {
    if predictions_data.len() != truths.len() || predictions_baseline.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: predictions_data.len().min(predictions_baseline.len()),
        });
    }
    if truths.is_empty() {
        return Err(Error::InvalidParameter("confidence needs at least one sample".into()));
    }
    let mut err_d = 0.0;
    let mut err_t = 0.0;
    for i in 0..truths.len() {
        err_d += weights.error_norm(&predictions_data[i], &truths[i]);
        err_t += weights.error_norm(&predictions_baseline[i], &truths[i]);
    }
    if err_t == 0.0 {
        return Err(Error::DegenerateMetric);
    }
    Ok(1.0 - err_d / err_t)
}

/// Recursive confidence state: exponentially decayed error accumulators
/// for the data-driven model and the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaState {
    psi_data: f64,
    psi_baseline: f64,
    lambda: f64,
    weights: NormWeights,
}

impl GammaState {
    /// `lambda` in `(0, 1]`; 1 reduces to the batch sums.
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_weights(lambda, NormWeights::default())
    }

    pub fn with_weights(lambda: f64, weights: NormWeights) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence forgetting factor must lie in (0, 1], got {lambda}"
            )));
        }
        Ok(Self {
            psi_data: 0.0,
            psi_baseline: 0.0,
            lambda,
            weights,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn accumulators(&self) -> (f64, f64) {
        (self.psi_data, self.psi_baseline)
    }

    /// Folds one sample in and returns the updated score, or `None` while
    /// the baseline accumulator is still zero (score undefined).
    pub fn update(
        &mut self,
        xi_data: &BodyVelocity,
        xi_baseline: &BodyVelocity,
        xi: &BodyVelocity,
    ) -> Option<f64> {
        self.psi_data = self.lambda * self.psi_data + self.weights.error_norm(xi_data, xi);
        self.psi_baseline = self.lambda * self.psi_baseline + self.weights.error_norm(xi_baseline, xi);
        self.gamma()
    }

    /// Current score, or `None` while undefined.
    pub fn gamma(&self) -> Option<f64> {
        if self.psi_baseline > 0.0 {
            Some(1.0 - self.psi_data / self.psi_baseline)
        } else {
            None
        }
    }

    /// Clears both accumulators (used at iteration boundaries so the score
    /// reflects only the current nominal gait).
    pub fn reset(&mut self) {
        self.psi_data = 0.0;
        self.psi_baseline = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, th: f64) -> BodyVelocity {
        BodyVelocity::new(x, y, th)
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truths = vec![v(0.1, 0.2, -0.3), v(-0.4, 0.0, 0.5)];
        let baseline = vec![v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0)];
        let g = gamma_batch(&truths, &baseline, &truths, NormWeights::default()).unwrap();
        assert_relative_eq!(g, 1.0);
    }

    #[test]
    fn matching_baseline_scores_zero() {
        let truths = vec![v(0.1, 0.2, -0.3), v(-0.4, 0.0, 0.5)];
        let preds = vec![v(0.2, 0.2, -0.3), v(-0.4, 0.1, 0.5)];
        let g = gamma_batch(&preds, &preds, &truths, NormWeights::default()).unwrap();
        assert_relative_eq!(g, 0.0);
    }

    #[test]
    fn twice_the_baseline_error_scores_minus_one() {
        let truth = vec![v(0.0, 0.0, 0.0)];
        let pred_d = vec![v(2.0, 0.0, 0.0)];
        let pred_t = vec![v(1.0, 0.0, 0.0)];
        let g = gamma_batch(&pred_d, &pred_t, &truth, NormWeights::default()).unwrap();
        assert_relative_eq!(g, -1.0);
    }

    #[test]
    fn zero_baseline_error_is_degenerate() {
        let truth = vec![v(1.0, 0.0, 0.0)];
        let pred_d = vec![v(0.0, 0.0, 0.0)];
        assert!(matches!(
            gamma_batch(&pred_d, &truth, &truth, NormWeights::default()),
            Err(Error::DegenerateMetric)
        ));
    }

    #[test]
    fn equal_error_norms_give_zero_every_step() {
        let mut state = GammaState::new(0.9).unwrap();
        let truth = v(0.0, 0.0, 0.0);
        for _ in 0..50 {
            let g = state.update(&v(0.3, 0.0, 0.0), &v(0.0, 0.3, 0.0), &truth).unwrap();
            assert_relative_eq!(g, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn undefined_until_first_sample() {
        let state = GammaState::new(0.99).unwrap();
        assert_eq!(state.gamma(), None);
        let mut state = state;
        // a perfect baseline keeps the denominator at zero: still undefined
        let truth = v(0.1, 0.0, 0.0);
        assert_eq!(state.update(&v(0.2, 0.0, 0.0), &truth, &truth), None);
    }

    #[test]
    fn score_invariant_under_uniform_error_rescaling() {
        let mut a = GammaState::new(0.95).unwrap();
        let mut b = GammaState::new(0.95).unwrap();
        let truth = v(0.0, 0.0, 0.0);
        for i in 0..20 {
            let e = 0.1 + 0.03 * i as f64;
            let ga = a.update(&v(e, 0.0, 0.0), &v(0.0, 2.0 * e, 0.0), &truth);
            let gb = b.update(&v(7.0 * e, 0.0, 0.0), &v(0.0, 14.0 * e, 0.0), &truth);
            assert_relative_eq!(ga.unwrap(), gb.unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn lambda_validation() {
        assert!(GammaState::new(0.0).is_err());
        assert!(GammaState::new(1.5).is_err());
        assert!(GammaState::new(1.0).is_ok());
    }
}
