//! Planar pose oracles built on homogeneous matrices and classical ODE
//! integration.

/// A pose expressed as `(x, y, theta)`.
pub type Pose = (f64, f64, f64);

fn homogeneous(p: Pose) -> [[f64; 3]; 3] {
    let (x, y, th) = p;
    let (s, c) = th.sin_cos();
    [[c, -s, x], [s, c, y], [0.0, 0.0, 1.0]]
}

/// Composes two poses through an explicit 3x3 homogeneous-matrix product.
pub fn compose(a: Pose, b: Pose) -> Pose {
    let (ma, mb) = (homogeneous(a), homogeneous(b));
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, mb_row) in mb.iter().enumerate() {
                m[i][j] += ma[i][k] * mb_row[j];
            }
        }
    }
    // recover the angle from the rotation block, position from the last column
    (m[0][2], m[1][2], m[1][0].atan2(m[0][0]))
}

/// Integrates the pose kinematics
/// `x' = vx cos(theta) - vy sin(theta)`, `y' = vx sin(theta) + vy cos(theta)`,
/// `theta' = omega` for a time-varying body velocity, with classical RK4 and
/// step-doubling until the result is converged to `tol` (adaptive refinement).
pub fn integrate_pose<F>(start: Pose, xi: F, duration: f64, tol: f64) -> Pose
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let run = |steps: usize| -> Pose {
        let h = duration / steps as f64;
        let deriv = |t: f64, p: Pose| -> Pose {
            let (vx, vy, om) = xi(t);
            let (s, c) = p.2.sin_cos();
            (vx * c - vy * s, vx * s + vy * c, om)
        };
        let mut p = start;
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = deriv(t, p);
            let k2 = deriv(t + h / 2.0, add(p, scale(k1, h / 2.0)));
            let k3 = deriv(t + h / 2.0, add(p, scale(k2, h / 2.0)));
            let k4 = deriv(t + h, add(p, scale(k3, h)));
            p = add(
                p,
                scale(
                    add(add(k1, scale(k4, 1.0)), scale(add(k2, k3), 2.0)),
                    h / 6.0,
                ),
            );
        }
        p
    };

    let mut steps = 256;
    let mut prev = run(steps);
    loop {
        steps *= 2;
        let next = run(steps);
        let err = (next.0 - prev.0)
            .abs()
            .max((next.1 - prev.1).abs())
            .max((next.2 - prev.2).abs());
        if err < tol || steps >= 1 << 22 {
            return next;
        }
        prev = next;
    }
}

fn add(a: Pose, b: Pose) -> Pose {
    (a.0 + b.0, a.1 + b.1, a.2 + b.2)
}

fn scale(a: Pose, s: f64) -> Pose {
    (a.0 * s, a.1 * s, a.2 * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_against_hand_computation() {
        let g = compose((1.0, 0.0, std::f64::consts::FRAC_PI_2), (1.0, 0.0, 0.0));
        assert!((g.0 - 1.0).abs() < 1e-15);
        assert!((g.1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn straight_line_integration() {
        let p = integrate_pose((0.0, 0.0, 0.0), |_| (1.0, 0.0, 0.0), 2.0, 1e-12);
        assert!((p.0 - 2.0).abs() < 1e-10);
        assert!(p.1.abs() < 1e-10);
    }
}
