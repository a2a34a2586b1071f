//! Group-law property tests and oracle cross-checks for the pose algebra.

use geomadapt::se2::{exp, integrate_trajectory, BodyVelocity, GroupElement};
use geomadapt_test_support::se2_oracle;
use proptest::prelude::*;
use std::f64::consts::PI;

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn coord() -> impl Strategy<Value = f64> {
    -10.0..10.0
}

fn twist() -> impl Strategy<Value = (f64, f64, f64)> {
    (-2.0..2.0, -2.0..2.0, -2.0..2.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn compose_with_inverse_is_identity((x, y, th) in (coord(), coord(), angle())) {
        let g = GroupElement::new(x, y, th);
        let e = g.compose(&g.inverse());
        prop_assert!(e.x.abs() < 1e-12);
        prop_assert!(e.y.abs() < 1e-12);
        prop_assert!(e.theta.abs() < 1e-12);
    }

    #[test]
    fn compose_matches_homogeneous_matrix_oracle(
        (xa, ya, tha) in (coord(), coord(), angle()),
        (xb, yb, thb) in (coord(), coord(), angle()),
    ) {
        let g = GroupElement::new(xa, ya, tha).compose(&GroupElement::new(xb, yb, thb));
        let (ox, oy, oth) = se2_oracle::compose((xa, ya, tha), (xb, yb, thb));
        prop_assert!((g.x - ox).abs() < 1e-10, "{} vs {}", g.x, ox);
        prop_assert!((g.y - oy).abs() < 1e-10, "{} vs {}", g.y, oy);
        // both angles are wrapped representatives of the same rotation
        let dth = (g.theta - oth).rem_euclid(2.0 * PI);
        prop_assert!(dth.min(2.0 * PI - dth) < 1e-10);
    }

    #[test]
    fn compose_is_associative(
        (xa, ya, tha) in (coord(), coord(), angle()),
        (xb, yb, thb) in (coord(), coord(), angle()),
        (xc, yc, thc) in (coord(), coord(), angle()),
    ) {
        let a = GroupElement::new(xa, ya, tha);
        let b = GroupElement::new(xb, yb, thb);
        let c = GroupElement::new(xc, yc, thc);
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        prop_assert!((left.x - right.x).abs() < 1e-10);
        prop_assert!((left.y - right.y).abs() < 1e-10);
        let dth = (left.theta - right.theta).rem_euclid(2.0 * PI);
        prop_assert!(dth.min(2.0 * PI - dth) < 1e-12);
    }

    #[test]
    fn exp_is_a_one_parameter_subgroup((vx, vy, om) in twist(), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let xi = BodyVelocity::new(vx, vy, om);
        let split = exp(&xi, a).compose(&exp(&xi, b));
        let joint = exp(&xi, a + b);
        prop_assert!((split.x - joint.x).abs() < 1e-10);
        prop_assert!((split.y - joint.y).abs() < 1e-10);
        let dth = (split.theta - joint.theta).rem_euclid(2.0 * PI);
        prop_assert!(dth.min(2.0 * PI - dth) < 1e-10);
    }

    #[test]
    fn exp_matches_ode_oracle((vx, vy, om) in twist(), dt in 0.01..1.5f64) {
        let xi = BodyVelocity::new(vx, vy, om);
        let g = exp(&xi, dt);
        let (ox, oy, _) = se2_oracle::integrate_pose((0.0, 0.0, 0.0), |_| (vx, vy, om), dt, 1e-13);
        prop_assert!((g.x - ox).abs() < 1e-9, "{} vs {}", g.x, ox);
        prop_assert!((g.y - oy).abs() < 1e-9, "{} vs {}", g.y, oy);
    }
}

/// A sampled sinusoidal twist integrates to the continuous trajectory;
/// per-step constant twists at midpoint samples are second order, so the
/// fine sampling here lands well under the tolerance.
#[test]
fn sinusoidal_series_matches_adaptive_ode_oracle() {
    let xi_of = |t: f64| (t.sin(), (2.0 * t).cos() * 0.5, 0.4 * (t + 0.3).sin());
    let dt = 1e-3;
    let n = 6283;
    let duration = n as f64 * dt;
    let series: Vec<BodyVelocity> = (0..n)
        .map(|k| {
            let (vx, vy, om) = xi_of((k as f64 + 0.5) * dt);
            BodyVelocity::new(vx, vy, om)
        })
        .collect();
    let got = integrate_trajectory(&GroupElement::identity(), &series, dt);
    let (ox, oy, oth) = se2_oracle::integrate_pose((0.0, 0.0, 0.0), xi_of, duration, 1e-12);
    let scale = (ox * ox + oy * oy).sqrt().max(1.0);
    assert!(
        ((got.x - ox).powi(2) + (got.y - oy).powi(2)).sqrt() / scale < 1e-6,
        "got ({}, {}), oracle ({ox}, {oy})",
        got.x,
        got.y
    );
    let dth = (got.theta - oth).rem_euclid(2.0 * PI);
    assert!(dth.min(2.0 * PI - dth) < 1e-6);
}

/// Halving the step at fixed left-endpoint sampling converges at first
/// order or better toward the continuous trajectory.
#[test]
fn trajectory_integration_converges_with_dt() {
    let xi_of = |t: f64| ((0.7 * t).sin(), 0.3 * (1.3 * t).cos(), 0.5 * t.sin());
    let duration = 4.0;
    let reference = se2_oracle::integrate_pose((0.0, 0.0, 0.0), xi_of, duration, 1e-12);
    let error_at = |n: usize| {
        let dt = duration / n as f64;
        let series: Vec<BodyVelocity> = (0..n)
            .map(|k| {
                let (vx, vy, om) = xi_of(k as f64 * dt);
                BodyVelocity::new(vx, vy, om)
            })
            .collect();
        let got = integrate_trajectory(&GroupElement::identity(), &series, dt);
        ((got.x - reference.0).powi(2) + (got.y - reference.1).powi(2)).sqrt()
    };
    let coarse = error_at(500);
    let fine = error_at(1000);
    let finer = error_at(2000);
    assert!(fine < 0.6 * coarse, "halving dt should shrink error: {coarse} -> {fine}");
    assert!(finer < 0.6 * fine, "halving dt should shrink error: {fine} -> {finer}");
}
