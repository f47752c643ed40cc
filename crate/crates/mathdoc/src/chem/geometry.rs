//! Geometry over raw coordinates. The `Molecule` methods resolve atom ids
//! and delegate here; everything in this file is pure vector math.

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance_points(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Angle at `b` in [0, π]. `None` when either arm has zero length.
pub fn angle_points(a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let u = sub(a, b);
    let v = sub(c, b);
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    // clamp: rounding can push the cosine a few ulp outside [-1, 1]
    Some((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0).acos())
}

/// Signed torsion of the path a-b-c-d in (−π, π], measured between the
/// abc and bcd planes with the usual atan2 form. `None` when b and c
/// coincide or either triple is collinear.
pub fn dihedral_points(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Option<f64> {
    let b1 = sub(b, a);
    let b2 = sub(c, b);
    let b3 = sub(d, c);
    let n1 = cross(b1, b2);
    let n2 = cross(b2, b3);
    let nb2 = norm(b2);
    if nb2 == 0.0 || norm(n1) == 0.0 || norm(n2) == 0.0 {
        return None;
    }
    let m1 = cross(n1, [b2[0] / nb2, b2[1] / nb2, b2[2] / nb2]);
    let x = dot(n1, n2);
    let y = dot(m1, n2);
    let phi = y.atan2(x);
    // atan2 yields [−π, π]; fold the open end onto +π
    Some(if phi == -std::f64::consts::PI { std::f64::consts::PI } else { phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn pythagorean_distance() {
        assert_eq!(distance_points([0.0, 0.0, 0.0], [3.0, 4.0, 0.0]), 5.0);
        assert_eq!(distance_points([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn right_angle_and_collinear() {
        let right = angle_points([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(right, Some(PI / 2.0));
        let straight = angle_points([-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [2.0, 0.0, 0.0]);
        assert_eq!(straight, Some(PI));
        assert_eq!(angle_points([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 1.0]), None);
    }

    #[test]
    fn planar_trans_is_pi_and_cis_is_zero() {
        // zig-zag in the xy plane, like an anti butane backbone: the end
        // atoms sit on opposite sides of the b-c axis
        let trans = dihedral_points(
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [3.0, -1.0, 0.0],
        );
        assert_eq!(trans, Some(PI));
        // same side: eclipsed, torsion zero
        let cis = dihedral_points(
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [3.0, 1.0, 0.0],
        );
        assert_eq!(cis, Some(0.0));
    }

    #[test]
    fn degenerate_dihedrals_are_none() {
        // collinear a, b, c
        assert_eq!(
            dihedral_points(
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [3.0, 1.0, 0.0]
            ),
            None
        );
        // b == c
        assert_eq!(
            dihedral_points(
                [0.0, 1.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [3.0, 1.0, 0.0]
            ),
            None
        );
    }

    fn rotate(p: Vec3, (ax, ay, az): (f64, f64, f64)) -> Vec3 {
        let (sx, cx) = ax.sin_cos();
        let p = [p[0], cx * p[1] - sx * p[2], sx * p[1] + cx * p[2]];
        let (sy, cy) = ay.sin_cos();
        let p = [cy * p[0] + sy * p[2], p[1], -sy * p[0] + cy * p[2]];
        let (sz, cz) = az.sin_cos();
        [cz * p[0] - sz * p[1], sz * p[0] + cz * p[1], p[2]]
    }

    fn shift(p: Vec3, t: Vec3) -> Vec3 {
        [p[0] + t[0], p[1] + t[1], p[2] + t[2]]
    }

    fn coord() -> impl Strategy<Value = f64> {
        -5.0..5.0f64
    }

    fn point() -> impl Strategy<Value = Vec3> {
        [coord(), coord(), coord()]
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_triangle(a in point(), b in point(), c in point()) {
            prop_assert_eq!(distance_points(a, b), distance_points(b, a));
            let ab = distance_points(a, b);
            let bc = distance_points(b, c);
            let ac = distance_points(a, c);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn distance_matches_component_oracle(a in point(), b in point()) {
            let oracle = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            prop_assert_eq!(distance_points(a, b).to_bits(), oracle.to_bits());
        }

        #[test]
        fn angle_matches_normalized_dot_oracle(a in point(), b in point(), c in point()) {
            let u = sub(a, b);
            let v = sub(c, b);
            prop_assume!(norm(u) > 0.5 && norm(v) > 0.5);
            let oracle = (dot(u, v) / (norm(u) * norm(v))).clamp(-1.0, 1.0).acos();
            prop_assert_eq!(angle_points(a, b, c), Some(oracle));
        }

        #[test]
        fn angle_rigid_motion_invariant(
            a in point(), b in point(), c in point(),
            r in (0.0..PI, 0.0..PI, 0.0..PI), t in point(),
        ) {
            let u = sub(a, b);
            let v = sub(c, b);
            prop_assume!(norm(u) > 0.5 && norm(v) > 0.5);
            prop_assume!((dot(u, v) / (norm(u) * norm(v))).abs() < 0.999);
            let before = angle_points(a, b, c).unwrap();
            let after = angle_points(
                shift(rotate(a, r), t),
                shift(rotate(b, r), t),
                shift(rotate(c, r), t),
            ).unwrap();
            prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
        }

        #[test]
        fn dihedral_rigid_motion_invariant_and_mirror_flips(
            a in point(), b in point(), c in point(), d in point(),
            r in (0.0..PI, 0.0..PI, 0.0..PI), t in point(),
        ) {
            let b1 = sub(b, a);
            let b2 = sub(c, b);
            let b3 = sub(d, c);
            prop_assume!(norm(b2) > 0.5);
            prop_assume!(norm(cross(b1, b2)) > 0.5 && norm(cross(b2, b3)) > 0.5);
            let before = dihedral_points(a, b, c, d).unwrap();

            let after = dihedral_points(
                shift(rotate(a, r), t),
                shift(rotate(b, r), t),
                shift(rotate(c, r), t),
                shift(rotate(d, r), t),
            ).unwrap();
            prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");

            // mirror through the xy plane flips the sign (π maps to itself)
            let m = |p: Vec3| [p[0], p[1], -p[2]];
            let mirrored = dihedral_points(m(a), m(b), m(c), m(d)).unwrap();
            if before.abs() < PI - 1e-9 {
                prop_assert!((mirrored + before).abs() < 1e-9, "{before} vs {mirrored}");
            } else {
                prop_assert!((mirrored.abs() - before.abs()).abs() < 1e-9);
            }

            // reversing the path keeps the magnitude
            let reversed = dihedral_points(d, c, b, a).unwrap();
            prop_assert!((reversed.abs() - before.abs()).abs() < 1e-9);
        }
    }
}
