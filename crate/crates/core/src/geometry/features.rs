//! Per-cell geometric terrain features: PCA surface normal, slope, flatness
//! and height difference.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::octree::{Aabb, SpatialIndex};
use crate::error::{Error, Result};

pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Ratio below which the middle covariance eigenvalue counts as zero, i.e.
/// the neighborhood is collinear.
const RANK_TOLERANCE: f64 = 1e-12;

fn centroid(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    c.map(|v| v / n)
}

/// Unit normal of the best-fit plane through `points`, oriented so that
/// `n_z >= 0`.
pub fn pca_normal(points: &[[f64; 3]]) -> Result<[f64; 3]> {
    if points.len() < 3 {
        return Err(Error::DegenerateNeighborhood { points: points.len(), reason: "fewer than 3 points" });
    }
    let c = centroid(points);
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = Vector3::new(p[0] - c[0], p[1] - c[1], p[2] - c[2]);
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, top) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if top <= 0.0 || mid <= RANK_TOLERANCE * top {
        return Err(Error::DegenerateNeighborhood {
            points: points.len(),
            reason: "covariance has rank below 2",
        });
    }
    let mut n = eig.eigenvectors.column(order[0]).into_owned();
    n /= n.norm();
    if n.z < 0.0 {
        n = -n;
    }
    Ok([n.x, n.y, n.z])
}

/// Surface normal of the square `window × window` neighborhood around
/// `center`, all heights included.
pub fn surface_normal(index: &SpatialIndex, center: [f64; 2], window: f64) -> Result<[f64; 3]> {
    let h = window / 2.0;
    let ids = index.query(&Aabb::column(center[0] - h, center[0] + h, center[1] - h, center[1] + h));
    let pts: Vec<[f64; 3]> = ids.into_iter().map(|i| index.position(i)).collect();
    pca_normal(&pts)
}

fn check_unit(n: &[f64; 3]) -> Result<()> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::Contract(format!("normal must have unit length, |n| = {norm}")));
    }
    Ok(())
}

/// Angle in degrees between `n` and the vertical axis, in `[0, 90]`.
pub fn slope(n: [f64; 3]) -> Result<f64> {
    check_unit(&n)?;
    if n[2] < 0.0 {
        return Err(Error::Contract(format!("normal must point upwards, n_z = {}", n[2])));
    }
    // arccos(n_z) for unit n, in the atan2 form that stays well conditioned
    // near vertical normals.
    let s = n[0].hypot(n[1]).atan2(n[2]).to_degrees();
    Ok(s.clamp(0.0, 90.0))
}

fn projected_heights(points: &[[f64; 3]], n: [f64; 3]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::invalid("feature requires at least one point"));
    }
    let c = centroid(points);
    Ok(points
        .iter()
        .map(|p| n[0] * (p[0] - c[0]) + n[1] * (p[1] - c[1]) + n[2] * (p[2] - c[2]))
        .collect())
}

/// Root of the summed squared heights along `n`, divided by `N + 1`.
pub fn flatness(points: &[[f64; 3]], n: [f64; 3]) -> Result<f64> {
    let heights = projected_heights(points, n)?;
    let ss: f64 = heights.iter().map(|h| h * h).sum();
    Ok((ss / (points.len() as f64 + 1.0)).sqrt())
}

pub fn height_difference(points: &[[f64; 3]], n: [f64; 3]) -> Result<f64> {
    let heights = projected_heights(points, n)?;
    let max = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = heights.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max - min).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plane_samples(f: impl Fn(f64, f64) -> f64) -> Vec<[f64; 3]> {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..5 {
                let x = -0.2 + 0.083 * i as f64;
                let y = -0.2 + 0.097 * j as f64;
                pts.push([x, y, f(x, y)]);
            }
        }
        pts
    }

    fn angle(a: [f64; 3], b: [f64; 3]) -> f64 {
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let cn = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        cn.atan2(dot)
    }

    #[test]
    fn flat_plane_normal_is_vertical() {
        let n = pca_normal(&plane_samples(|_, _| 0.0)).unwrap();
        assert!(angle(n, [0.0, 0.0, 1.0]) < 1e-6);
    }

    #[test]
    fn tilted_plane_normal_matches_analytic() {
        let n = pca_normal(&plane_samples(|x, _| x)).unwrap();
        assert!(angle(n, [-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]) < 1e-6, "{n:?}");
    }

    #[test]
    fn degenerate_neighborhoods() {
        let two = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert!(matches!(pca_normal(&two), Err(Error::DegenerateNeighborhood { .. })));
        let line: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 2.0 * i as f64, 0.5 * i as f64]).collect();
        assert!(matches!(pca_normal(&line), Err(Error::DegenerateNeighborhood { .. })));
    }

    #[test]
    fn surface_normal_uses_square_window() {
        let mut pts = plane_samples(|_, _| 0.0);
        // Far-away wall that must stay outside the 0.5 m window.
        pts.extend((0..20).map(|i| [3.0, 0.0, i as f64]));
        let index = SpatialIndex::build(&pts, 8);
        let n = surface_normal(&index, [0.0, 0.0], 0.5).unwrap();
        assert!(angle(n, [0.0, 0.0, 1.0]) < 1e-6);
        let far = surface_normal(&index, [10.0, 10.0], 0.5);
        assert!(far.is_err());
    }

    #[test]
    fn slope_examples() {
        assert_eq!(slope([0.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!((slope([FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]).unwrap() - 45.0).abs() < 1e-9);
        assert!((slope([1.0, 0.0, 0.0]).unwrap() - 90.0).abs() < 1e-9);
        assert!(matches!(slope([0.0, 0.0, 2.0]), Err(Error::Contract(_))));
        assert!(matches!(slope([0.0, 0.0, -1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn flatness_and_height_difference_examples() {
        let ez = [0.0, 0.0, 1.0];
        let coplanar = [[0.0, 0.0, 1.0], [1.0, 2.0, 1.0], [-3.0, 0.5, 1.0]];
        assert_eq!(flatness(&coplanar, ez).unwrap(), 0.0);
        assert_eq!(height_difference(&coplanar, ez).unwrap(), 0.0);
        assert_eq!(flatness(&[[1.0, 2.0, 3.0]], ez).unwrap(), 0.0);
        assert_eq!(height_difference(&[[1.0, 2.0, 3.0]], ez).unwrap(), 0.0);

        // Two points at ±0.1 along n: sqrt((0.01 + 0.01) / 3).
        let pair = [[0.0, 0.0, 0.1], [0.0, 0.0, -0.1]];
        let expected = (0.02f64 / 3.0).sqrt();
        assert!((flatness(&pair, ez).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.08165).abs() < 1e-5);

        // Projected heights {-0.1, 0.05, 0.2} after centering span 0.3.
        let spread = [[0.0, 0.0, -0.1], [0.0, 0.0, 0.05], [0.0, 0.0, 0.2]];
        assert!((height_difference(&spread, ez).unwrap() - 0.3).abs() < 1e-12);

        assert!(flatness(&[], ez).is_err());
        assert!(height_difference(&[], ez).is_err());
    }

    fn rotate_about(axis: [f64; 3], angle: f64, p: [f64; 3]) -> [f64; 3] {
        // Rodrigues' formula.
        let (s, c) = angle.sin_cos();
        let dot = axis[0] * p[0] + axis[1] * p[1] + axis[2] * p[2];
        let cross = [
            axis[1] * p[2] - axis[2] * p[1],
            axis[2] * p[0] - axis[0] * p[2],
            axis[0] * p[1] - axis[1] * p[0],
        ];
        [0, 1, 2].map(|k| p[k] * c + cross[k] * s + axis[k] * dot * (1.0 - c))
    }

    proptest! {
        #[test]
        fn slope_stays_in_range(x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.0..1.0f64) {
            let norm = (x * x + y * y + z * z).sqrt();
            prop_assume!(norm > 1e-3);
            let s = slope([x / norm, y / norm, z / norm]).unwrap();
            prop_assert!((0.0..=90.0).contains(&s));
        }

        #[test]
        fn features_invariant_under_rotation_about_normal_and_translation(
            pts in prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64, -0.2..0.2f64), 4..40),
            theta in 0.0..6.28f64,
            offset in (-50.0..50.0f64, -50.0..50.0f64, -5.0..5.0f64),
            tilt in -0.5..0.5f64,
        ) {
            let pts: Vec<[f64; 3]> = pts.into_iter().map(|(x, y, z)| [x, y, z + tilt * x]).collect();
            let n = match pca_normal(&pts) { Ok(n) => n, Err(_) => return Ok(()) };
            let f0 = flatness(&pts, n).unwrap();
            let h0 = height_difference(&pts, n).unwrap();
            let s0 = slope(n).unwrap();

            let rotated: Vec<[f64; 3]> = pts.iter().map(|&p| rotate_about(n, theta, p)).collect();
            prop_assert!((flatness(&rotated, n).unwrap() - f0).abs() < 1e-9);
            prop_assert!((height_difference(&rotated, n).unwrap() - h0).abs() < 1e-9);

            let moved: Vec<[f64; 3]> = pts.iter().map(|p| [p[0] + offset.0, p[1] + offset.1, p[2] + offset.2]).collect();
            let n2 = pca_normal(&moved).unwrap();
            prop_assert!((slope(n2).unwrap() - s0).abs() < 1e-9);
            prop_assert!((flatness(&moved, n).unwrap() - f0).abs() < 1e-9);
            prop_assert!((height_difference(&moved, n).unwrap() - h0).abs() < 1e-9);
        }
    }
}
