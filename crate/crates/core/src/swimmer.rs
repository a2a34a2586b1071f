//! Ground-truth physics for an N-link planar swimmer in a viscous regime.
//!
//! Each link of the chain experiences distributed linear drag with separate
//! tangential and normal coefficients. Setting the net force and torque on
//! the body to zero yields a linear force balance whose solution is the
//! shape-indexed map from joint rates to body velocity. Drag moments along
//! each link are integrated in closed form (zeroth and second moments of a
//! linear velocity field), so no quadrature runs in the inner loop.

use crate::error::{Error, Result};
use crate::gait::Gait;
use crate::se2::{exp, BodyVelocity, GroupElement};
use crate::gait::{normalize_phase, PerturbationState};
use nalgebra::{DMatrix, DVector, Matrix2xX, Matrix3, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Condition-number guard for the 3x3 force balance.
const FORCE_BALANCE_MAX_CONDITION: f64 = 1e12;

/// Joint angles are clamped just inside the open interval `(-pi, pi)`;
/// a command at the boundary means adjacent links fold onto each other.
const JOINT_LIMIT: f64 = PI - 1e-3;

/// Geometry and drag coefficients of an N-link chain swimmer.
///
/// The link count must be odd so the body frame can sit on the middle link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwimmerParams {
    n_links: usize,
    link_length: f64,
    c_tangential: f64,
    drag_ratio: f64,
}

impl SwimmerParams {
    pub fn new(n_links: usize, link_length: f64, c_tangential: f64, drag_ratio: f64) -> Result<Self> {
        if n_links < 3 || n_links % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "link count must be odd and at least 3, got {n_links}"
            )));
        }
        if !(link_length > 0.0 && link_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "link length must be positive, got {link_length}"
            )));
        }
        if !(c_tangential > 0.0 && c_tangential.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tangential drag coefficient must be positive, got {c_tangential}"
            )));
        }
        if !(drag_ratio >= 1.0 && drag_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "drag ratio must be at least 1, got {drag_ratio}"
            )));
        }
        Ok(Self {
            n_links,
            link_length,
            c_tangential,
            drag_ratio,
        })
    }

    /// Unit links, unit tangential drag, drag ratio 2.
    pub fn standard(n_links: usize) -> Result<Self> {
        Self::new(n_links, 1.0, 1.0, 2.0)
    }

    pub fn with_drag_ratio(self, drag_ratio: f64) -> Result<Self> {
        Self::new(self.n_links, self.link_length, self.c_tangential, drag_ratio)
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn link_length(&self) -> f64 {
        self.link_length
    }

    pub fn c_tangential(&self) -> f64 {
        self.c_tangential
    }

    pub fn drag_ratio(&self) -> f64 {
        self.drag_ratio
    }

    /// Shape dimension: one joint per neighboring link pair.
    pub fn shape_dim(&self) -> usize {
        self.n_links - 1
    }
}

/// Internal configuration: relative joint angles between consecutive links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape(DVector<f64>);

impl Shape {
    /// Validates finiteness and the open joint range `(-pi, pi)`.
    pub fn new(angles: DVector<f64>) -> Result<Self> {
        if angles.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        if angles.iter().any(|v| v.abs() >= PI) {
            return Err(Error::InvalidParameter(
                "joint angle out of the open interval (-pi, pi)".into(),
            ));
        }
        Ok(Self(angles))
    }

    pub fn from_slice(angles: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(angles))
    }

    /// Builds a shape, saturating each joint at the mechanical limit just
    /// inside `(-pi, pi)`. Commanded trajectories use this so that a noise
    /// excursion cannot request a folded-over configuration.
    pub fn from_vector_clamped(mut angles: DVector<f64>) -> Self {
        for v in angles.iter_mut() {
            *v = v.clamp(-JOINT_LIMIT, JOINT_LIMIT);
        }
        Self(angles)
    }

    pub fn zero(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Joint angular velocities paired with a [`Shape`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeVelocity(DVector<f64>);

impl ShapeVelocity {
    pub fn new(rates: DVector<f64>) -> Result<Self> {
        if rates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        Ok(Self(rates))
    }

    pub fn from_slice(rates: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(rates))
    }

    pub(crate) fn from_vector(rates: DVector<f64>) -> Self {
        Self(rates)
    }

    pub fn zero(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Body-frame placement of every link for a given shape: orientation,
/// center position, and their joint-angle Jacobians.
struct LinkLayout {
    /// Orientation of each link in the body frame.
    alpha: Vec<f64>,
    /// Center of each link in the body frame.
    center: Vec<Vector2<f64>>,
    /// `dalpha[i]` is the gradient of `alpha[i]` with respect to the joints.
    dalpha: Vec<DVector<f64>>,
    /// `dcenter[i]` is the 2 x d Jacobian of `center[i]`.
    dcenter: Vec<Matrix2xX<f64>>,
}

fn unit(angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c, s)
}

fn unit_derivative(angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(-s, c)
}

/// Chains links outward from the middle link. Joint `j` sets the relative
/// angle of link `j + 1` with respect to link `j`.
fn link_layout(shape: &Shape, params: &SwimmerParams) -> LinkLayout {
    let n = params.n_links;
    let d = params.shape_dim();
    let half = params.link_length / 2.0;
    let mid = n / 2;
    let r = shape.as_vector();

    let mut alpha = vec![0.0; n];
    let mut dalpha = vec![DVector::zeros(d); n];
    for i in mid + 1..n {
        alpha[i] = alpha[i - 1] + r[i - 1];
        dalpha[i] = dalpha[i - 1].clone();
        dalpha[i][i - 1] += 1.0;
    }
    for i in (0..mid).rev() {
        alpha[i] = alpha[i + 1] - r[i];
        dalpha[i] = dalpha[i + 1].clone();
        dalpha[i][i] -= 1.0;
    }

    let mut center = vec![Vector2::zeros(); n];
    let mut dcenter = vec![Matrix2xX::zeros(d); n];
    for i in mid + 1..n {
        center[i] = center[i - 1] + half * (unit(alpha[i - 1]) + unit(alpha[i]));
        dcenter[i] = dcenter[i - 1].clone()
            + half * (unit_derivative(alpha[i - 1]) * dalpha[i - 1].transpose()
                + unit_derivative(alpha[i]) * dalpha[i].transpose());
    }
    for i in (0..mid).rev() {
        center[i] = center[i + 1] - half * (unit(alpha[i + 1]) + unit(alpha[i]));
        dcenter[i] = dcenter[i + 1].clone()
            - half * (unit_derivative(alpha[i + 1]) * dalpha[i + 1].transpose()
                + unit_derivative(alpha[i]) * dalpha[i].transpose());
    }

    LinkLayout {
        alpha,
        center,
        dalpha,
        dcenter,
    }
}

/// Net drag wrench on the swimmer as a linear map of `(xi, r_dot)`.
///
/// Returns the 3x3 block acting on the body velocity and the 3 x d block
/// acting on the joint rates; the force balance sets their sum to zero.
///
/// The velocity of a material point at arc position `s` along link `i` is
/// `v(s) = a_i + s * b_i` with both terms linear in `(xi, r_dot)`, so the
/// drag force integrates to `-l * D a_i` and the torque about the body
/// origin to `-l * (c_i x D a_i) - l^3/12 * (t_i x D b_i)`.
fn drag_wrench_blocks(shape: &Shape, params: &SwimmerParams) -> (Matrix3<f64>, DMatrix<f64>) {
    let d = params.shape_dim();
    let cols = 3 + d;
    let layout = link_layout(shape, params);
    let ell = params.link_length;
    let ct = params.c_tangential;
    let cn = params.drag_ratio * ct;

    let mut wrench = DMatrix::<f64>::zeros(3, cols);
    let mut a_mat = DMatrix::<f64>::zeros(2, cols);
    let mut b_mat = DMatrix::<f64>::zeros(2, cols);

    for i in 0..params.n_links {
        let t = unit(layout.alpha[i]);
        let nvec = Vector2::new(-t.y, t.x);
        let drag = ct * t * t.transpose() + cn * nvec * nvec.transpose();
        let c = layout.center[i];

        // a columns: xi_x, xi_y -> identity; xi_theta -> J c; r_dot -> dcenter
        a_mat.fill(0.0);
        a_mat[(0, 0)] = 1.0;
        a_mat[(1, 1)] = 1.0;
        a_mat[(0, 2)] = -c.y;
        a_mat[(1, 2)] = c.x;
        a_mat.view_mut((0, 3), (2, d)).copy_from(&layout.dcenter[i]);

        // b columns: xi_theta -> t'; r_dot -> t' * dalpha
        let tp = unit_derivative(layout.alpha[i]);
        b_mat.fill(0.0);
        b_mat[(0, 2)] = tp.x;
        b_mat[(1, 2)] = tp.y;
        for j in 0..d {
            b_mat[(0, 3 + j)] = tp.x * layout.dalpha[i][j];
            b_mat[(1, 3 + j)] = tp.y * layout.dalpha[i][j];
        }

        let da = drag * &a_mat;
        let db = drag * &b_mat;
        let second_moment = ell.powi(3) / 12.0;
        for j in 0..cols {
            wrench[(0, j)] -= ell * da[(0, j)];
            wrench[(1, j)] -= ell * da[(1, j)];
            wrench[(2, j)] -= ell * (c.x * da[(1, j)] - c.y * da[(0, j)])
                + second_moment * (t.x * db[(1, j)] - t.y * db[(0, j)]);
        }
    }

    let w_xi = Matrix3::from_fn(|r, c| wrench[(r, c)]);
    let w_r = wrench.columns(3, d).into_owned();
    (w_xi, w_r)
}

/// The shape-indexed linear map `A(r)` with `xi = -A(r) * r_dot`, obtained
/// by zeroing the net drag wrench.
pub fn local_connection(shape: &Shape, params: &SwimmerParams) -> Result<DMatrix<f64>> {
    if shape.dim() != params.shape_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.shape_dim(),
            actual: shape.dim(),
        });
    }
    let (w_xi, w_r) = drag_wrench_blocks(shape, params);

    let sv = w_xi.svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > FORCE_BALANCE_MAX_CONDITION {
        return Err(Error::SingularForceBalance { cond });
    }

    let lu = w_xi.lu();
    let mut a = DMatrix::zeros(3, params.shape_dim());
    for j in 0..params.shape_dim() {
        let col = lu
            .solve(&w_r.column(j).into_owned())
            .ok_or(Error::SingularForceBalance { cond })?;
        a.set_column(j, &col);
    }
    Ok(a)
}

/// Evaluates `xi = -A(r) * r_dot`.
pub fn body_velocity(shape: &Shape, rates: &ShapeVelocity, params: &SwimmerParams) -> Result<BodyVelocity> {
    if rates.dim() != params.shape_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.shape_dim(),
            actual: rates.dim(),
        });
    }
    let a = local_connection(shape, params)?;
    let xi = -(a * rates.as_vector());
    Ok(BodyVelocity::new(xi[0], xi[1], xi[2]))
}

/// Centroid of the link chain in the body frame (uniform line density).
pub fn centroid_offset(shape: &Shape, params: &SwimmerParams) -> Vector2<f64> {
    let layout = link_layout(shape, params);
    let mut sum = Vector2::zeros();
    for c in &layout.center {
        sum += c;
    }
    sum / params.n_links as f64
}

/// One recorded simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStep {
    /// Time at which the sample was taken.
    pub t: f64,
    /// Commanded phase in `[0, 2pi)`.
    pub phi: f64,
    /// Executed shape (nominal plus perturbation offset).
    pub shape: Shape,
    pub shape_vel: ShapeVelocity,
    /// Ground-truth body velocity at the sample.
    pub xi: BodyVelocity,
    /// Pose after integrating this step.
    pub pose: GroupElement,
}

/// Rolls a commanded gait through the drag physics, accumulating pose.
///
/// Owns its pose, clock, and gait; perturbation state is passed per cycle so
/// callers control the noise stream. Distinct simulators are independent.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: SwimmerParams,
    gait: Gait,
    steps_per_cycle: usize,
    pose: GroupElement,
    time: f64,
}

impl Simulator {
    pub fn new(params: SwimmerParams, gait: Gait, steps_per_cycle: usize) -> Result<Self> {
        if gait.joint_count() != params.shape_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.shape_dim(),
                actual: gait.joint_count(),
            });
        }
        if steps_per_cycle == 0 {
            return Err(Error::InvalidParameter("steps_per_cycle must be positive".into()));
        }
        Ok(Self {
            params,
            gait,
            steps_per_cycle,
            pose: GroupElement::identity(),
            time: 0.0,
        })
    }

    pub fn params(&self) -> &SwimmerParams {
        &self.params
    }

    pub fn gait(&self) -> &Gait {
        &self.gait
    }

    pub fn pose(&self) -> GroupElement {
        self.pose
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dt(&self) -> f64 {
        self.gait.period() / self.steps_per_cycle as f64
    }

    /// Swaps the commanded gait (for example after an optimization step).
    pub fn set_gait(&mut self, gait: Gait) -> Result<()> {
        if gait.joint_count() != self.params.shape_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.params.shape_dim(),
                actual: gait.joint_count(),
            });
        }
        self.gait = gait;
        Ok(())
    }

    /// Swaps the physics parameters mid-stream (substrate change).
    pub fn set_params(&mut self, params: SwimmerParams) -> Result<()> {
        if params.shape_dim() != self.params.shape_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.params.shape_dim(),
                actual: params.shape_dim(),
            });
        }
        self.params = params;
        Ok(())
    }

    /// Executes one full gait cycle, optionally perturbed, recording every
    /// step. The perturbation offset is sampled before advancing so the
    /// first sample of a fresh stream lies on the nominal cycle.
    pub fn run_cycle(&mut self, mut perturbation: Option<&mut PerturbationState>) -> Result<Vec<SimStep>> {
        let dt = self.dt();
        let mut steps = Vec::with_capacity(self.steps_per_cycle);
        for k in 0..self.steps_per_cycle {
            let phi = normalize_phase(2.0 * PI * k as f64 / self.steps_per_cycle as f64);
            let (nominal, nominal_rate) = self.gait.nominal_shape(phi);
            let (shape, shape_vel) = match perturbation.as_deref() {
                Some(p) => {
                    let r = nominal.as_vector() + p.delta();
                    let rdot = nominal_rate.as_vector() + p.delta_dot();
                    (Shape::from_vector_clamped(r), ShapeVelocity::new(rdot)?)
                }
                None => (nominal, nominal_rate),
            };
            let xi = body_velocity(&shape, &shape_vel, &self.params)?;
            let t = self.time;
            self.pose = self.pose.compose(&exp(&xi, dt));
            self.time += dt;
            if let Some(p) = perturbation.as_deref_mut() {
                p.step(dt);
            }
            steps.push(SimStep {
                t,
                phi,
                shape,
                shape_vel,
                xi,
                pose: self.pose,
            });
        }
        Ok(steps)
    }
}

/// Simulates one cycle of a gait from the identity pose.
pub fn simulate_cycle(
    gait: &Gait,
    params: &SwimmerParams,
    steps_per_cycle: usize,
    perturbation: Option<&mut PerturbationState>,
) -> Result<Vec<SimStep>> {
    let mut sim = Simulator::new(*params, gait.clone(), steps_per_cycle)?;
    sim.run_cycle(perturbation)
}

/// Net pose change over one clean (unperturbed) cycle of `gait`.
pub fn cycle_displacement(gait: &Gait, params: &SwimmerParams, steps_per_cycle: usize) -> Result<GroupElement> {
    let steps = simulate_cycle(gait, params, steps_per_cycle, None)?;
    Ok(steps.last().map(|s| s.pose).unwrap_or_else(GroupElement::identity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn three_link() -> SwimmerParams {
        SwimmerParams::standard(3).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SwimmerParams::new(4, 1.0, 1.0, 2.0).is_err());
        assert!(SwimmerParams::new(1, 1.0, 1.0, 2.0).is_err());
        assert!(SwimmerParams::new(3, 0.0, 1.0, 2.0).is_err());
        assert!(SwimmerParams::new(3, 1.0, -1.0, 2.0).is_err());
        assert!(SwimmerParams::new(3, 1.0, 1.0, 0.5).is_err());
        assert!(SwimmerParams::new(5, 0.8, 2.0, 1.0).is_ok());
    }

    #[test]
    fn zero_rates_give_zero_velocity() {
        let params = three_link();
        let shape = Shape::from_slice(&[0.4, -0.2]).unwrap();
        let xi = body_velocity(&shape, &ShapeVelocity::zero(2), &params).unwrap();
        assert_eq!(xi, BodyVelocity::zero());
    }

    #[test]
    fn body_velocity_is_linear_in_rates() {
        let params = three_link();
        let shape = Shape::from_slice(&[0.5, -0.5]).unwrap();
        let u = ShapeVelocity::from_slice(&[1.0, 0.3]).unwrap();
        let xi1 = body_velocity(&shape, &u, &params).unwrap();
        let doubled = ShapeVelocity::from_slice(&[2.0, 0.6]).unwrap();
        let xi2 = body_velocity(&shape, &doubled, &params).unwrap();
        assert_relative_eq!(xi2.xi_x, 2.0 * xi1.xi_x, epsilon = 1e-12);
        assert_relative_eq!(xi2.xi_y, 2.0 * xi1.xi_y, epsilon = 1e-12);
        assert_relative_eq!(xi2.xi_theta, 2.0 * xi1.xi_theta, epsilon = 1e-12);
    }

    #[test]
    fn connection_invariant_to_drag_scale() {
        let shape = Shape::from_slice(&[0.3, 0.7]).unwrap();
        let a1 = local_connection(&shape, &SwimmerParams::new(3, 1.0, 1.0, 2.0).unwrap()).unwrap();
        let a2 = local_connection(&shape, &SwimmerParams::new(3, 1.0, 37.5, 2.0).unwrap()).unwrap();
        assert!((a1 - a2).amax() < 1e-12);
    }

    #[test]
    fn zero_amplitude_gait_goes_nowhere() {
        let params = three_link();
        let gait = Gait::rest(2, 1, 2.0 * PI).unwrap();
        let disp = cycle_displacement(&gait, &params, 100).unwrap();
        assert_eq!(disp, GroupElement::identity());
    }

    #[test]
    fn clamped_shape_respects_joint_limit() {
        let shape = Shape::from_vector_clamped(DVector::from_column_slice(&[4.0, -4.0]));
        assert!(shape.as_vector()[0] < PI);
        assert!(shape.as_vector()[1] > -PI);
        assert!(Shape::from_slice(&[3.2, 0.0]).is_err());
    }
}
