//! Planar rigid-body pose algebra: group composition, the closed-form
//! exponential map, and integration of sampled body-velocity series.
//!
//! Poses live on SE(2); body velocities are elements of its tangent space
//! expressed in the moving frame. Integration composes exact constant-twist
//! exponentials per step, so no integrator bias enters model comparisons.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Threshold on `|xi_theta * dt|` below which [`exp`] switches to its
/// series-expanded branch to avoid cancellation in the arc formula.
pub const SMALL_ANGLE_THRESHOLD: f64 = 1e-8;

/// A planar pose: world-frame position and heading.
///
/// The heading is kept in `(-pi, pi]` after every operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Body-frame velocity `(xi_x, xi_y, xi_theta)`: longitudinal, lateral,
/// and angular rates of the moving frame expressed in itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub xi_x: f64,
    pub xi_y: f64,
    pub xi_theta: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

impl GroupElement {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    /// Group product: `self` followed by `other` in the frame of `self`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let (s, c) = self.theta.sin_cos();
        GroupElement::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> GroupElement {
        let (s, c) = self.theta.sin_cos();
        GroupElement::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    /// Maps a body-frame point into the world frame.
    pub fn apply(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }
}

impl BodyVelocity {
    pub fn new(xi_x: f64, xi_y: f64, xi_theta: f64) -> Self {
        Self {
            xi_x,
            xi_y,
            xi_theta,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.xi_x.is_finite() && self.xi_y.is_finite() && self.xi_theta.is_finite()
    }

    /// Components as an array in `(xi_x, xi_y, xi_theta)` order.
    pub fn components(&self) -> [f64; 3] {
        [self.xi_x, self.xi_y, self.xi_theta]
    }
}

/// Closed-form exponential: the pose reached by flowing a constant body
/// velocity for `dt`.
///
/// For `|xi_theta * dt|` below [`SMALL_ANGLE_THRESHOLD`] the straight-line
/// series branch is used.
pub fn exp(xi: &BodyVelocity, dt: f64) -> GroupElement {
    debug_assert!(dt >= 0.0, "exp expects a nonnegative duration");
    let th = xi.xi_theta * dt;
    let vx = xi.xi_x * dt;
    let vy = xi.xi_y * dt;
    if th.abs() < SMALL_ANGLE_THRESHOLD {
        // sin(th)/th ~ 1, (1-cos(th))/th ~ th/2
        GroupElement::new(vx - 0.5 * th * vy, vy + 0.5 * th * vx, th)
    } else {
        let (s, c) = th.sin_cos();
        GroupElement::new((s * vx - (1.0 - c) * vy) / th, ((1.0 - c) * vx + s * vy) / th, th)
    }
}

/// Left-composes per-step exponentials of a uniformly sampled body-velocity
/// series: `g_{n+1} = g_n * exp(xi_n, dt)`.
pub fn integrate_trajectory(g0: &GroupElement, xi_series: &[BodyVelocity], dt: f64) -> GroupElement {
    debug_assert!(dt > 0.0 || xi_series.is_empty());
    xi_series
        .iter()
        .fold(*g0, |g, xi| g.compose(&exp(xi, dt)))
}
