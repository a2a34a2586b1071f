//! Online model of the body-velocity map: a bank of recursive
//! least-squares filters with exponential forgetting, one per phase window
//! and body-velocity component.
//!
//! Each window regresses the measured body velocity onto a window-local
//! regressor built from shape offsets against the nominal gait. Weights are
//! smoothed across windows by a truncated Fourier series, giving a model
//! that can be queried at any phase. When the nominal gait moves, the
//! constant block of every filter is rebased so the learned variational
//! structure carries over.

use crate::error::{Error, Result};
use crate::gait::{Gait, PhaseWindowGrid};
use crate::se2::BodyVelocity;
use crate::smoothing::{validate_order, SmoothedWeightField};
use crate::swimmer::{Shape, ShapeVelocity};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;

/// Body-velocity outputs on the plane: longitudinal, lateral, angular.
pub const OUTPUTS: usize = 3;

/// Snapshot schema version for serialized banks.
pub const SNAPSHOT_VERSION: u32 = 1;

/// Length of the window-local regressor for shape dimension `d`.
pub fn regressor_dim(shape_dim: usize) -> usize {
    1 + 2 * shape_dim + shape_dim * shape_dim
}

/// Builds the regressor `[1, delta, delta_dot, delta (x) delta_dot]` with
/// the outer product flattened row-major.
pub fn build_regressor(delta: &DVector<f64>, delta_dot: &DVector<f64>) -> DVector<f64> {
    let d = delta.len();
    debug_assert_eq!(d, delta_dot.len());
    let mut x = DVector::zeros(regressor_dim(d));
    x[0] = 1.0;
    x.rows_mut(1, d).copy_from(delta);
    x.rows_mut(1 + d, d).copy_from(delta_dot);
    for i in 0..d {
        for j in 0..d {
            x[1 + 2 * d + i * d + j] = delta[i] * delta_dot[j];
        }
    }
    x
}

/// Forgetting factor and prior covariance scale for the filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlsConfig {
    /// Forgetting factor in `(0, 1]`; 1 keeps the full history.
    pub forgetting: f64,
    /// Diagonal of the initial covariance (a diffuse-but-finite prior, so
    /// early updates stay bounded and the full-history case matches a
    /// ridge-regularized batch fit exactly).
    pub initial_covariance: f64,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self {
            forgetting: 0.99,
            initial_covariance: 1e3,
        }
    }
}

impl RlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "forgetting factor must lie in (0, 1], got {}",
                self.forgetting
            )));
        }
        if !(self.initial_covariance > 0.0 && self.initial_covariance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial covariance must be positive, got {}",
                self.initial_covariance
            )));
        }
        Ok(())
    }

    /// Preset that discounts history quickly (fast adaptation, noisier fit).
    pub fn rapid() -> Self {
        Self {
            forgetting: 0.7,
            ..Self::default()
        }
    }
}

/// One exponentially weighted recursive least-squares estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsFilter {
    weights: DVector<f64>,
    covariance: DMatrix<f64>,
    forgetting: f64,
    initial_covariance: f64,
    #[serde(skip)]
    scratch: DVector<f64>,
}

impl RlsFilter {
    pub fn new(dim: usize, config: RlsConfig) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("filter dimension must be positive".into()));
        }
        Ok(Self {
            weights: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim) * config.initial_covariance,
            forgetting: config.forgetting,
            initial_covariance: config.initial_covariance,
            scratch: DVector::zeros(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn forgetting(&self) -> f64 {
        self.forgetting
    }

    /// Filter output for a regressor.
    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        self.weights.dot(x)
    }

    fn reset_covariance(&mut self) {
        self.covariance = DMatrix::identity(self.dim(), self.dim()) * self.initial_covariance;
    }

    /// One recursive update:
    /// gain `g = P x / (lambda + x' P x)`, `w += g (y - w' x)`,
    /// `P <- (P - g x' P) / lambda`, re-symmetrized.
    ///
    /// If the covariance has degenerated (non-finite or non-positive
    /// curvature along `x`), it is reset to the prior and the update
    /// proceeds; the weights are never discarded.
    pub fn update(&mut self, x: &DVector<f64>, target: f64) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        if !target.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        if self.scratch.len() != n {
            self.scratch = DVector::zeros(n);
        }

        // px = P x
        self.scratch.gemv(1.0, &self.covariance, x, 0.0);
        let mut denom = self.forgetting + x.dot(&self.scratch);
        if !denom.is_finite() || denom <= 0.0 {
            self.reset_covariance();
            self.scratch.gemv(1.0, &self.covariance, x, 0.0);
            denom = self.forgetting + x.dot(&self.scratch);
        }

        let innovation = target - self.weights.dot(x);
        self.weights.axpy(innovation / denom, &self.scratch, 1.0);

        // P <- (P - px px' / denom) / lambda, then re-symmetrize
        let px = self.scratch.clone();
        self.covariance.ger(-1.0 / denom, &px, &px, 1.0);
        self.covariance *= 1.0 / self.forgetting;
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (self.covariance[(i, j)] + self.covariance[(j, i)]);
                self.covariance[(i, j)] = avg;
                self.covariance[(j, i)] = avg;
            }
        }
        if self.covariance.iter().any(|v| !v.is_finite()) {
            self.reset_covariance();
        }
        Ok(())
    }
}

/// Nominal gait samples cached at the window centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WindowNominal {
    angles: DVector<f64>,
    rates: DVector<f64>,
}

fn window_nominals(gait: &Gait, grid: &PhaseWindowGrid) -> Vec<WindowNominal> {
    (0..grid.window_count())
        .map(|m| {
            let (shape, vel) = gait.nominal_shape(grid.center(m));
            WindowNominal {
                angles: shape.as_vector().clone(),
                rates: vel.as_vector().clone(),
            }
        })
        .collect()
}

/// The full adaptive model: per-window, per-output filters plus the nominal
/// gait they are organized around.
///
/// Ingestion is strictly sequential (sample order matters under
/// forgetting). Prediction is read-only but caches the smoothed weight
/// field behind a `RefCell`, so a bank is `Send` but not `Sync`; give each
/// worker its own bank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterBank {
    grid: PhaseWindowGrid,
    nominal: Gait,
    shape_dim: usize,
    rls: RlsConfig,
    smoothing_order: usize,
    /// `filters[m][k]`: window `m`, output `k`.
    filters: Vec<Vec<RlsFilter>>,
    update_counts: Vec<u64>,
    window_nominals: Vec<WindowNominal>,
    #[serde(skip, default)]
    smoothed: RefCell<Option<SmoothedWeightField>>,
}

impl FilterBank {
    pub fn new(grid: PhaseWindowGrid, nominal: Gait, rls: RlsConfig, smoothing_order: usize) -> Result<Self> {
        rls.validate()?;
        validate_order(smoothing_order, grid.window_count())?;
        let shape_dim = nominal.joint_count();
        let dim = regressor_dim(shape_dim);
        let filters = (0..grid.window_count())
            .map(|_| {
                (0..OUTPUTS)
                    .map(|_| RlsFilter::new(dim, rls))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let window_nominals = window_nominals(&nominal, &grid);
        Ok(Self {
            grid,
            nominal,
            shape_dim,
            rls,
            smoothing_order,
            filters,
            update_counts: vec![0; grid.window_count()],
            window_nominals,
            smoothed: RefCell::new(None),
        })
    }

    pub fn grid(&self) -> &PhaseWindowGrid {
        &self.grid
    }

    pub fn nominal(&self) -> &Gait {
        &self.nominal
    }

    pub fn shape_dim(&self) -> usize {
        self.shape_dim
    }

    pub fn rls_config(&self) -> RlsConfig {
        self.rls
    }

    pub fn update_counts(&self) -> &[u64] {
        &self.update_counts
    }

    pub fn filter(&self, window: usize, output: usize) -> &RlsFilter {
        &self.filters[window][output]
    }

    /// Whether every window has received at least one sample.
    pub fn is_fitted(&self) -> bool {
        self.update_counts.iter().all(|&c| c > 0)
    }

    fn check_dims(&self, shape: &Shape, rates: &ShapeVelocity) -> Result<()> {
        if shape.dim() != self.shape_dim {
            return Err(Error::DimensionMismatch {
                expected: self.shape_dim,
                actual: shape.dim(),
            });
        }
        if rates.dim() != self.shape_dim {
            return Err(Error::DimensionMismatch {
                expected: self.shape_dim,
                actual: rates.dim(),
            });
        }
        Ok(())
    }

    /// Feeds one sample to every filter whose window covers its phase.
    ///
    /// Offsets are taken against the window-center nominal, so all samples
    /// in a window share one reference configuration.
    pub fn ingest_sample(
        &mut self,
        phi: f64,
        shape: &Shape,
        rates: &ShapeVelocity,
        xi: &BodyVelocity,
    ) -> Result<()> {
        self.check_dims(shape, rates)?;
        if !xi.is_finite() {
            return Err(Error::NonFiniteSample);
        }
        let targets = xi.components();
        for m in self.grid.covering_windows(phi) {
            let nominal = &self.window_nominals[m];
            let delta = shape.as_vector() - &nominal.angles;
            let delta_dot = rates.as_vector() - &nominal.rates;
            let x = build_regressor(&delta, &delta_dot);
            for (k, &target) in targets.iter().enumerate() {
                self.filters[m][k].update(&x, target)?;
            }
            self.update_counts[m] += 1;
        }
        *self.smoothed.borrow_mut() = None;
        Ok(())
    }

    /// Weight matrix (outputs x regressor dim) of one window.
    fn window_weight_matrix(&self, m: usize) -> DMatrix<f64> {
        let dim = regressor_dim(self.shape_dim);
        DMatrix::from_fn(OUTPUTS, dim, |k, j| self.filters[m][k].weights()[j])
    }

    fn ensure_smoothed(&self) -> Result<()> {
        if let Some(w) = self.update_counts.iter().position(|&c| c == 0) {
            return Err(Error::UnfittedWindow { window: w });
        }
        let mut cache = self.smoothed.borrow_mut();
        if cache.is_none() {
            let values: Vec<DMatrix<f64>> = (0..self.grid.window_count())
                .map(|m| self.window_weight_matrix(m))
                .collect();
            *cache = Some(SmoothedWeightField::fit(&values, self.smoothing_order)?);
        }
        Ok(())
    }

    /// Predicted body velocity at a query point.
    ///
    /// Offsets are taken against the phase-interpolated nominal, and the
    /// weight field is the Fourier smoothing of the window weights,
    /// recomputed lazily after ingestion.
    pub fn predict(&self, phi: f64, shape: &Shape, rates: &ShapeVelocity) -> Result<BodyVelocity> {
        self.check_dims(shape, rates)?;
        self.ensure_smoothed()?;
        let (nominal, nominal_rate) = self.nominal.nominal_shape(phi);
        let delta = shape.as_vector() - nominal.as_vector();
        let delta_dot = rates.as_vector() - nominal_rate.as_vector();
        let x = build_regressor(&delta, &delta_dot);
        let cache = self.smoothed.borrow();
        let field = cache.as_ref().expect("cache populated by ensure_smoothed");
        let xi = field.eval_mul(phi, &x);
        Ok(BodyVelocity::new(xi[0], xi[1], xi[2]))
    }

    /// Moves the bank onto a new nominal gait.
    ///
    /// For every window and output, the constant-block weight becomes the
    /// old model's on-cycle prediction at the new nominal; all other weight
    /// blocks and the covariances stay untouched.
    pub fn rebase(&mut self, new_gait: &Gait) -> Result<()> {
        if new_gait.joint_count() != self.shape_dim {
            return Err(Error::DimensionMismatch {
                expected: self.shape_dim,
                actual: new_gait.joint_count(),
            });
        }
        let new_nominals = window_nominals(new_gait, &self.grid);
        for m in 0..self.grid.window_count() {
            let old = &self.window_nominals[m];
            let new = &new_nominals[m];
            let dtheta = &new.angles - &old.angles;
            let dtheta_dot = &new.rates - &old.rates;
            let x = build_regressor(&dtheta, &dtheta_dot);
            for k in 0..OUTPUTS {
                let rebased = self.filters[m][k].predict(&x);
                self.filters[m][k].weights[0] = rebased;
            }
        }
        self.window_nominals = new_nominals;
        self.nominal = new_gait.clone();
        *self.smoothed.borrow_mut() = None;
        Ok(())
    }

    /// Versioned snapshot for experiment checkpointing.
    pub fn to_snapshot_json(&self) -> Result<String> {
        let snapshot = Snapshot {
            version: SNAPSHOT_VERSION,
            bank: self,
        };
        serde_json::to_string(&snapshot).map_err(|e| Error::Snapshot(e.to_string()))
    }

    pub fn from_snapshot_json(json: &str) -> Result<Self> {
        let snapshot: SnapshotOwned = serde_json::from_str(json).map_err(|e| Error::Snapshot(e.to_string()))?;
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {} (expected {})",
                snapshot.version, SNAPSHOT_VERSION
            )));
        }
        Ok(snapshot.bank)
    }
}

#[derive(Serialize)]
struct Snapshot<'a> {
    version: u32,
    bank: &'a FilterBank,
}

#[derive(Deserialize)]
struct SnapshotOwned {
    version: u32,
    bank: FilterBank,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn test_bank(lambda: f64) -> FilterBank {
        let gait = Gait::traveling_wave(2, 0.5, 2.0 * PI).unwrap();
        FilterBank::new(
            PhaseWindowGrid::default_grid(),
            gait,
            RlsConfig {
                forgetting: lambda,
                initial_covariance: 1e3,
            },
            4,
        )
        .unwrap()
    }

    #[test]
    fn regressor_layout() {
        let delta = DVector::from_column_slice(&[1.0, 0.0]);
        let delta_dot = DVector::from_column_slice(&[0.0, 1.0]);
        let x = build_regressor(&delta, &delta_dot);
        assert_eq!(
            x.as_slice(),
            &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn regressor_on_cycle_is_unit_constant() {
        let z = DVector::zeros(3);
        let x = build_regressor(&z, &z);
        assert_eq!(x[0], 1.0);
        assert!(x.rows(1, x.len() - 1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn regressor_reproduces_synthetic_linear_model() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let d = 3;
        let dim = regressor_dim(d);
        let w = DVector::from_fn(dim, |i, _| ((i * 7 + 1) as f64 * 0.13).sin());
        for _ in 0..50 {
            let delta = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let delta_dot = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let x = build_regressor(&delta, &delta_dot);
            // reconstruct the model output directly from its blocks
            let mut direct = w[0];
            for i in 0..d {
                direct += w[1 + i] * delta[i] + w[1 + d + i] * delta_dot[i];
            }
            for i in 0..d {
                for j in 0..d {
                    direct += w[1 + 2 * d + i * d + j] * delta[i] * delta_dot[j];
                }
            }
            assert_relative_eq!(x.dot(&w), direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_innovation_leaves_weights_unchanged() {
        let mut f = RlsFilter::new(3, RlsConfig::default()).unwrap();
        let x = DVector::from_column_slice(&[1.0, 0.5, -0.2]);
        f.update(&x, 2.0).unwrap();
        let w = f.weights().clone();
        let y = f.predict(&x);
        f.update(&x, y).unwrap();
        assert_eq!(&w, f.weights());
    }

    #[test]
    fn non_finite_samples_rejected() {
        let mut f = RlsFilter::new(2, RlsConfig::default()).unwrap();
        let x = DVector::from_column_slice(&[1.0, f64::NAN]);
        assert!(matches!(f.update(&x, 1.0), Err(Error::NonFiniteSample)));
        let x = DVector::from_column_slice(&[1.0, 0.0]);
        assert!(matches!(f.update(&x, f64::INFINITY), Err(Error::NonFiniteSample)));
    }

    #[test]
    fn sample_covered_by_two_windows_updates_two_windows() {
        let mut bank = test_bank(0.99);
        // midway between centers 0 and 1: covered by exactly those two
        let phi = bank.grid().spacing() / 2.0;
        assert_eq!(bank.grid().covering_windows(phi), vec![0, 1]);
        let (shape, rates) = bank.nominal().nominal_shape(phi);
        bank.ingest_sample(phi, &shape, &rates, &BodyVelocity::new(0.1, 0.0, 0.0))
            .unwrap();
        let touched: Vec<usize> = bank
            .update_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(m, _)| m)
            .collect();
        assert_eq!(touched, vec![0, 1]);
    }

    #[test]
    fn on_cycle_sample_at_center_moves_only_constant_weight() {
        let mut bank = test_bank(0.99);
        let phi = bank.grid().center(5);
        let (shape, rates) = bank.nominal().nominal_shape(phi);
        let xi = BodyVelocity::new(0.3, -0.1, 0.05);
        bank.ingest_sample(phi, &shape, &rates, &xi).unwrap();
        // window 5 saw the exact on-cycle regressor [1, 0, ..., 0]
        for k in 0..OUTPUTS {
            let w = bank.filter(5, k).weights();
            assert!(w[0] != 0.0);
            assert!(w.rows(1, w.len() - 1).iter().all(|&v| v == 0.0));
            // moves toward the target, shrunk only by the diffuse prior
            let expected = xi.components()[k] * 1e3 / (0.99 + 1e3);
            assert_relative_eq!(w[0], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn ingest_leaves_non_covering_windows_bit_identical() {
        let mut bank = test_bank(0.9);
        let phi = 0.3;
        let covering = bank.grid().covering_windows(phi);
        let before: Vec<Vec<DVector<f64>>> = (0..bank.grid().window_count())
            .map(|m| (0..OUTPUTS).map(|k| bank.filter(m, k).weights().clone()).collect())
            .collect();
        let (shape, rates) = bank.nominal().nominal_shape(phi);
        bank.ingest_sample(phi, &shape, &rates, &BodyVelocity::new(1.0, 2.0, 3.0))
            .unwrap();
        for m in 0..bank.grid().window_count() {
            if covering.contains(&m) {
                continue;
            }
            for k in 0..OUTPUTS {
                assert_eq!(&before[m][k], bank.filter(m, k).weights(), "window {m} moved");
            }
        }
    }

    #[test]
    fn predict_requires_all_windows_fitted() {
        let bank = test_bank(0.99);
        let (shape, rates) = bank.nominal().nominal_shape(0.0);
        match bank.predict(0.0, &shape, &rates) {
            Err(Error::UnfittedWindow { window: 0 }) => {}
            other => panic!("expected unfitted-window error, got {other:?}"),
        }
    }

    #[test]
    fn rebase_to_same_gait_is_identity() {
        let mut bank = test_bank(0.99);
        seed_bank_with_cycles(&mut bank, 2, 9);
        let before: Vec<Vec<DVector<f64>>> = (0..bank.grid().window_count())
            .map(|m| (0..OUTPUTS).map(|k| bank.filter(m, k).weights().clone()).collect())
            .collect();
        let gait = bank.nominal().clone();
        bank.rebase(&gait).unwrap();
        for m in 0..bank.grid().window_count() {
            for k in 0..OUTPUTS {
                assert_eq!(&before[m][k], bank.filter(m, k).weights());
            }
        }
    }

    #[test]
    fn rebase_touches_only_constant_block() {
        let mut bank = test_bank(0.99);
        seed_bank_with_cycles(&mut bank, 2, 13);
        let before: Vec<Vec<DVector<f64>>> = (0..bank.grid().window_count())
            .map(|m| (0..OUTPUTS).map(|k| bank.filter(m, k).weights().clone()).collect())
            .collect();
        let cov_before: Vec<DMatrix<f64>> = (0..bank.grid().window_count())
            .map(|m| bank.filter(m, 0).covariance().clone())
            .collect();
        let new_gait = Gait::traveling_wave(2, 0.55, 2.0 * PI).unwrap();
        bank.rebase(&new_gait).unwrap();
        for m in 0..bank.grid().window_count() {
            for k in 0..OUTPUTS {
                let w = bank.filter(m, k).weights();
                for j in 1..w.len() {
                    assert_eq!(before[m][k][j], w[j], "window {m} output {k} block entry {j} moved");
                }
            }
            assert_eq!(&cov_before[m], bank.filter(m, 0).covariance());
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut bank = test_bank(0.95);
        seed_bank_with_cycles(&mut bank, 1, 3);
        let json = bank.to_snapshot_json().unwrap();
        let restored = FilterBank::from_snapshot_json(&json).unwrap();
        for m in 0..bank.grid().window_count() {
            for k in 0..OUTPUTS {
                assert_eq!(bank.filter(m, k).weights(), restored.filter(m, k).weights());
                assert_eq!(bank.filter(m, k).covariance(), restored.filter(m, k).covariance());
            }
        }
        let bad = json.replace("\"version\":1", "\"version\":99");
        assert!(FilterBank::from_snapshot_json(&bad).is_err());
    }

    /// Streams noisy on-gait samples so every window gets data.
    fn seed_bank_with_cycles(bank: &mut FilterBank, cycles: usize, seed: u64) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let steps = 64;
        for _ in 0..cycles {
            for s in 0..steps {
                let phi = 2.0 * PI * s as f64 / steps as f64;
                let (nominal, rate) = bank.nominal().nominal_shape(phi);
                let shape = Shape::from_vector_clamped(
                    nominal.as_vector() + DVector::from_fn(2, |_, _| rng.random_range(-0.1..0.1)),
                );
                let rates = ShapeVelocity::new(
                    rate.as_vector() + DVector::from_fn(2, |_, _| rng.random_range(-0.1..0.1)),
                )
                .unwrap();
                let xi = BodyVelocity::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                bank.ingest_sample(phi, &shape, &rates, &xi).unwrap();
            }
        }
    }
}
