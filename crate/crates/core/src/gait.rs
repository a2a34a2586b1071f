//! Cyclic gait parameterization, phase-window bookkeeping on the circle,
//! and the stochastic perturbation generator used to excite the model.
//!
//! A gait is a truncated Fourier series per joint evaluated at a commanded
//! phase. Phase is exact by construction (it is commanded, not estimated),
//! so windows are plain intervals on `[0, 2pi)` with wraparound.

use crate::error::{Error, Result};
use crate::swimmer::{Shape, ShapeVelocity};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wraps a phase into `[0, 2pi)`.
pub fn normalize_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(2.0 * PI);
    if p == 2.0 * PI {
        0.0
    } else {
        p
    }
}

/// Circular distance between two phases, in `[0, pi]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Truncated Fourier series for one joint angle as a function of phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub constant: f64,
    pub cosine: Vec<f64>,
    pub sine: Vec<f64>,
}

impl FourierSeries {
    pub fn new(constant: f64, cosine: Vec<f64>, sine: Vec<f64>) -> Result<Self> {
        if cosine.len() != sine.len() {
            return Err(Error::DimensionMismatch {
                expected: cosine.len(),
                actual: sine.len(),
            });
        }
        Ok(Self {
            constant,
            cosine,
            sine,
        })
    }

    pub fn order(&self) -> usize {
        self.cosine.len()
    }

    /// Series value at phase `phi`.
    pub fn eval(&self, phi: f64) -> f64 {
        let mut v = self.constant;
        for (h, (a, b)) in self.cosine.iter().zip(&self.sine).enumerate() {
            let hphi = (h + 1) as f64 * phi;
            v += a * hphi.cos() + b * hphi.sin();
        }
        v
    }

    /// Derivative of the series with respect to phase.
    pub fn eval_phase_derivative(&self, phi: f64) -> f64 {
        let mut v = 0.0;
        for (h, (a, b)) in self.cosine.iter().zip(&self.sine).enumerate() {
            let k = (h + 1) as f64;
            let hphi = k * phi;
            v += k * (-a * hphi.sin() + b * hphi.cos());
        }
        v
    }
}

/// A cyclic joint-space trajectory: one Fourier series per joint plus the
/// cycle period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gait {
    period: f64,
    joints: Vec<FourierSeries>,
}

impl Gait {
    pub fn new(period: f64, joints: Vec<FourierSeries>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gait period must be positive and finite, got {period}"
            )));
        }
        if joints.is_empty() {
            return Err(Error::InvalidParameter("gait needs at least one joint".into()));
        }
        let order = joints[0].order();
        if joints.iter().any(|j| j.order() != order) {
            return Err(Error::InvalidParameter(
                "all joints must share the same Fourier order".into(),
            ));
        }
        Ok(Self { period, joints })
    }

    /// First-order traveling wave: every joint oscillates with the given
    /// amplitude and consecutive joints are offset by an equal phase lag of
    /// `2pi / (joints + 1)` (one full wave across the link chain).
    pub fn traveling_wave(joints: usize, amplitude: f64, period: f64) -> Result<Self> {
        if joints == 0 {
            return Err(Error::InvalidParameter("gait needs at least one joint".into()));
        }
        let lag = 2.0 * PI / (joints as f64 + 1.0);
        let series = (0..joints)
            .map(|j| {
                let psi = j as f64 * lag;
                // amplitude * cos(phi - psi)
                FourierSeries {
                    constant: 0.0,
                    cosine: vec![amplitude * psi.cos()],
                    sine: vec![amplitude * psi.sin()],
                }
            })
            .collect();
        Self::new(period, series)
    }

    /// Zero-amplitude gait with the given joint count and Fourier order.
    pub fn rest(joints: usize, order: usize, period: f64) -> Result<Self> {
        let series = (0..joints)
            .map(|_| FourierSeries {
                constant: 0.0,
                cosine: vec![0.0; order],
                sine: vec![0.0; order],
            })
            .collect();
        Self::new(period, series)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Angular phase rate `2pi / period`.
    pub fn phase_rate(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn order(&self) -> usize {
        self.joints[0].order()
    }

    pub fn joints(&self) -> &[FourierSeries] {
        &self.joints
    }

    /// Returns a copy padded with zero coefficients up to `order`.
    pub fn padded_to_order(&self, order: usize) -> Result<Self> {
        if order < self.order() {
            return Err(Error::InvalidParameter(format!(
                "cannot pad order {} gait down to order {order}",
                self.order()
            )));
        }
        let joints = self
            .joints
            .iter()
            .map(|j| {
                let mut cosine = j.cosine.clone();
                let mut sine = j.sine.clone();
                cosine.resize(order, 0.0);
                sine.resize(order, 0.0);
                FourierSeries {
                    constant: j.constant,
                    cosine,
                    sine,
                }
            })
            .collect();
        Self::new(self.period, joints)
    }

    /// Commanded shape and shape velocity at phase `phi`.
    ///
    /// The velocity is the phase derivative scaled by the phase rate.
    pub fn nominal_shape(&self, phi: f64) -> (Shape, ShapeVelocity) {
        let rate = self.phase_rate();
        let angles = DVector::from_iterator(self.joints.len(), self.joints.iter().map(|j| j.eval(phi)));
        let rates = DVector::from_iterator(
            self.joints.len(),
            self.joints.iter().map(|j| rate * j.eval_phase_derivative(phi)),
        );
        (Shape::from_vector_clamped(angles), ShapeVelocity::from_vector(rates))
    }

    /// Flattens all coefficients into one vector, per joint as
    /// `[constant, cosine_1..cosine_F, sine_1..sine_F]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.joints.len() * (1 + 2 * self.order()));
        for j in &self.joints {
            out.push(j.constant);
            out.extend_from_slice(&j.cosine);
            out.extend_from_slice(&j.sine);
        }
        out
    }

    /// Rebuilds a gait with the same shape as `self` from a flat
    /// coefficient vector produced by [`Gait::flatten`].
    pub fn with_flat_coefficients(&self, flat: &[f64]) -> Result<Self> {
        let order = self.order();
        let per_joint = 1 + 2 * order;
        let expected = self.joints.len() * per_joint;
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: flat.len(),
            });
        }
        let joints = flat
            .chunks_exact(per_joint)
            .map(|c| FourierSeries {
                constant: c[0],
                cosine: c[1..1 + order].to_vec(),
                sine: c[1 + order..].to_vec(),
            })
            .collect();
        Self::new(self.period, joints)
    }

    /// Largest commanded joint angle magnitude reachable by this gait
    /// (analytic bound, not a sampled estimate).
    pub fn max_joint_angle_bound(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| {
                j.constant.abs()
                    + j.cosine
                        .iter()
                        .zip(&j.sine)
                        .map(|(a, b)| (a * a + b * b).sqrt())
                        .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Equally spaced overlapping phase windows on the circle.
///
/// Window `m` is centered at `2pi m / M` and covers phases within half the
/// window width of its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseWindowGrid {
    m_windows: usize,
    width: f64,
}

/// Boundary slack for window membership so exact center/edge queries do not
/// flip on rounding of `2pi m / M` arithmetic.
const WINDOW_EDGE_TOLERANCE: f64 = 1e-9;

impl PhaseWindowGrid {
    /// `width` must exceed the center spacing so neighboring windows overlap
    /// and every phase is covered.
    pub fn new(m_windows: usize, width: f64) -> Result<Self> {
        if m_windows < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 phase windows, got {m_windows}"
            )));
        }
        let spacing = 2.0 * PI / m_windows as f64;
        if !(width.is_finite() && width > spacing) {
            return Err(Error::InvalidParameter(format!(
                "window width {width} must exceed center spacing {spacing}"
            )));
        }
        if width > 2.0 * PI {
            return Err(Error::InvalidParameter(format!(
                "window width {width} exceeds the full circle"
            )));
        }
        Ok(Self { m_windows, width })
    }

    /// 16 windows, each twice as wide as the center spacing, so a typical
    /// sample updates two windows.
    pub fn default_grid() -> Self {
        Self::new(16, 2.0 * (2.0 * PI / 16.0)).expect("default grid is valid")
    }

    pub fn window_count(&self) -> usize {
        self.m_windows
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m_windows as f64
    }

    /// Center phase of window `m`.
    pub fn center(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.m_windows as f64
    }

    /// Whether window `m` covers phase `phi`.
    pub fn covers(&self, m: usize, phi: f64) -> bool {
        circular_distance(normalize_phase(phi), self.center(m)) <= self.width / 2.0 + WINDOW_EDGE_TOLERANCE
    }

    /// Indices of all windows covering `phi`, ascending.
    pub fn covering_windows(&self, phi: f64) -> Vec<usize> {
        let phi = normalize_phase(phi);
        (0..self.m_windows).filter(|&m| self.covers(m, phi)).collect()
    }
}

/// Coefficients of the second-order shape-noise process
/// `d(delta_dot) = -(alpha * delta_dot + beta * delta) dt + eta dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {}", self.eta)));
        }
        Ok(())
    }

    /// Damping and stiffness tied to the cycle period (`alpha = 2/T`,
    /// `beta = (2pi/T)^2`), with `eta` sized for a target stationary RMS
    /// shape offset.
    pub fn for_period(period: f64, target_rms: f64) -> Self {
        let alpha = 2.0 / period;
        let beta = (2.0 * PI / period).powi(2);
        Self {
            alpha,
            beta,
            eta: eta_for_target_rms(target_rms, alpha, beta),
        }
    }
}

/// Noise amplitude giving a stationary RMS of `rms` per component: the
/// stationary variance of the offset is `eta^2 / (2 alpha beta)`.
pub fn eta_for_target_rms(rms: f64, alpha: f64, beta: f64) -> f64 {
    rms * (2.0 * alpha * beta).sqrt()
}

/// State of the per-joint stochastic perturbation: a smoothed second-order
/// random walk pulled back toward zero offset.
///
/// Advancing is an Euler-Maruyama step; sequences are reproducible for a
/// fixed seed (ChaCha12 stream).
#[derive(Debug, Clone)]
pub struct PerturbationState {
    delta: DVector<f64>,
    delta_dot: DVector<f64>,
    config: NoiseConfig,
    rng: ChaCha12Rng,
}

impl PerturbationState {
    pub fn new(dim: usize, config: NoiseConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("perturbation dimension must be positive".into()));
        }
        Ok(Self {
            delta: DVector::zeros(dim),
            delta_dot: DVector::zeros(dim),
            config,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn delta_dot(&self) -> &DVector<f64> {
        &self.delta_dot
    }

    /// Advances the offset process by `dt`.
    pub fn step(&mut self, dt: f64) {
        debug_assert!(dt > 0.0);
        let sqrt_dt = dt.sqrt();
        let cfg = self.config;
        for i in 0..self.delta.len() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.delta_dot[i] += -(cfg.alpha * self.delta_dot[i] + cfg.beta * self.delta[i]) * dt
                + cfg.eta * sqrt_dt * z;
            self.delta[i] += self.delta_dot[i] * dt;
        }
    }
}
