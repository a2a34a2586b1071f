//! Brute-force drag force-balance oracle for chain swimmers.
//!
//! Assembles the force balance by midpoint quadrature of pointwise drag
//! along every link, with position Jacobians taken by central finite
//! differences of the chain-position map. No closed-form moment integrals,
//! no shared code with the library's analytic assembly.

/// Chain geometry inputs.
#[derive(Debug, Clone, Copy)]
pub struct ChainSpec {
    pub n_links: usize,
    pub link_length: f64,
    pub c_tangential: f64,
    pub drag_ratio: f64,
}

/// Body-frame position of the point at arc coordinate `s` (measured from
/// the link center) on link `i`, for joint angles `r`. The frame sits on
/// the center of the middle link; joint `j` rotates link `j + 1` relative
/// to link `j`.
fn point_on_link(spec: &ChainSpec, r: &[f64], i: usize, s: f64) -> (f64, f64) {
    let n = spec.n_links;
    let mid = n / 2;
    let half = spec.link_length / 2.0;

    let mut angle = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    if i > mid {
        for link in mid + 1..=i {
            let prev = angle;
            angle += r[link - 1];
            cx += half * (prev.cos() + angle.cos());
            cy += half * (prev.sin() + angle.sin());
        }
    } else if i < mid {
        for link in (i..mid).rev() {
            let prev = angle;
            angle -= r[link];
            cx -= half * (prev.cos() + angle.cos());
            cy -= half * (prev.sin() + angle.sin());
        }
    }
    (cx + s * angle.cos(), cy + s * angle.sin())
}

/// Assembles the two force-balance blocks by quadrature: columns are the
/// net `(force_x, force_y, torque)` responses to unit body-velocity and
/// unit joint-rate inputs. `quad_points` is the number of quadrature nodes
/// per link.
pub fn wrench_blocks(spec: &ChainSpec, r: &[f64], quad_points: usize) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let n = spec.n_links;
    let d = n - 1;
    assert_eq!(r.len(), d);
    let ell = spec.link_length;
    let ct = spec.c_tangential;
    let cn = spec.drag_ratio * ct;
    let weight = ell / quad_points as f64;
    let fd_step = 1e-6;

    let mut xi_cols = vec![[0.0; 3]; 3];
    let mut rdot_cols = vec![[0.0; 3]; d];

    for link in 0..n {
        for q in 0..quad_points {
            let s = -ell / 2.0 + (q as f64 + 0.5) * ell / quad_points as f64;
            let (px, py) = point_on_link(spec, r, link, s);

            // tangent by finite differences along the arc coordinate
            let (txp, typ) = point_on_link(spec, r, link, s + fd_step);
            let (txm, tym) = point_on_link(spec, r, link, s - fd_step);
            let (mut tx, mut ty) = ((txp - txm) / (2.0 * fd_step), (typ - tym) / (2.0 * fd_step));
            let tn = (tx * tx + ty * ty).sqrt();
            tx /= tn;
            ty /= tn;
            let (nx, ny) = (-ty, tx);

            // position Jacobian by central differences in each joint
            let mut jac = vec![(0.0, 0.0); d];
            for j in 0..d {
                let mut rp = r.to_vec();
                rp[j] += fd_step;
                let mut rm = r.to_vec();
                rm[j] -= fd_step;
                let (xp, yp) = point_on_link(spec, &rp, link, s);
                let (xm, ym) = point_on_link(spec, &rm, link, s);
                jac[j] = ((xp - xm) / (2.0 * fd_step), (yp - ym) / (2.0 * fd_step));
            }

            // velocity responses to each unit input
            let mut responses: Vec<(f64, f64)> = Vec::with_capacity(3 + d);
            responses.push((1.0, 0.0)); // unit xi_x
            responses.push((0.0, 1.0)); // unit xi_y
            responses.push((-py, px)); // unit xi_theta
            responses.extend(jac.iter().copied());

            for (col, &(vx, vy)) in responses.iter().enumerate() {
                let vt = vx * tx + vy * ty;
                let vn = vx * nx + vy * ny;
                let fx = -(ct * vt * tx + cn * vn * nx);
                let fy = -(ct * vt * ty + cn * vn * ny);
                let torque = px * fy - py * fx;
                let target = if col < 3 {
                    &mut xi_cols[col]
                } else {
                    &mut rdot_cols[col - 3]
                };
                target[0] += weight * fx;
                target[1] += weight * fy;
                target[2] += weight * torque;
            }
        }
    }

    (xi_cols, rdot_cols)
}

fn solve3(cols: &[[f64; 3]; 3], rhs: [f64; 3]) -> [f64; 3] {
    // Cramer's rule on the column-major 3x3 system
    let det = |a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]| -> f64 {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
            + c[0] * (a[1] * b[2] - a[2] * b[1])
    };
    let d = det(&cols[0], &cols[1], &cols[2]);
    [
        det(&rhs, &cols[1], &cols[2]) / d,
        det(&cols[0], &rhs, &cols[2]) / d,
        det(&cols[0], &cols[1], &rhs) / d,
    ]
}

/// The shape-to-body-velocity map `A(r)` (rows: outputs, columns: joints)
/// obtained from the quadrature force balance, with `xi = -A(r) r_dot`.
pub fn connection(spec: &ChainSpec, r: &[f64], quad_points: usize) -> Vec<[f64; 3]> {
    let (xi_cols, rdot_cols) = wrench_blocks(spec, r, quad_points);
    let xi_mat = [xi_cols[0], xi_cols[1], xi_cols[2]];
    rdot_cols
        .iter()
        .map(|col| solve3(&xi_mat, *col))
        .collect()
}

/// Body velocity for the given joint rates, straight from the oracle's
/// force balance.
pub fn body_velocity(spec: &ChainSpec, r: &[f64], r_dot: &[f64], quad_points: usize) -> [f64; 3] {
    let a = connection(spec, r, quad_points);
    let mut xi = [0.0; 3];
    for (j, col) in a.iter().enumerate() {
        for k in 0..3 {
            xi[k] -= col[k] * r_dot[j];
        }
    }
    xi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_chain_is_symmetric() {
        let spec = ChainSpec {
            n_links: 3,
            link_length: 1.0,
            c_tangential: 1.0,
            drag_ratio: 2.0,
        };
        // symmetric shape: lateral force response to xi_x must vanish
        let (xi_cols, _) = wrench_blocks(&spec, &[0.0, 0.0], 200);
        assert!(xi_cols[0][1].abs() < 1e-9);
        assert!(xi_cols[0][2].abs() < 1e-9);
        // drag along x for a straight chain: 3 links * ct * ell
        assert!((xi_cols[0][0] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn point_map_chains_correctly() {
        let spec = ChainSpec {
            n_links: 3,
            link_length: 2.0,
            c_tangential: 1.0,
            drag_ratio: 1.0,
        };
        // straight chain: link 2 center sits two link-lengths along x
        let (x, y) = point_on_link(&spec, &[0.0, 0.0], 2, 0.0);
        assert!((x - 2.0).abs() < 1e-12);
        assert!(y.abs() < 1e-12);
        // bend the far joint by 90 degrees
        let (x, y) = point_on_link(&spec, &[0.0, std::f64::consts::FRAC_PI_2], 2, 0.0);
        assert!((x - 1.0).abs() < 1e-12);
        assert!((y - 1.0).abs() < 1e-12);
    }
}
