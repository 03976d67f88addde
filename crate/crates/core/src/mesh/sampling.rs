use super::{MeshError, TriangleMesh};
use crate::geometry::{triangle_area, Point3, Vector3};
use crate::seed;
use nalgebra::{Matrix3, Rotation3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;

/// Molecules per square micrometer for an outer-membrane label.
pub const DEFAULT_EMITTER_DENSITY: f64 = 30.0;

/// Fluorophore positions in nanometers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterSet {
    pub positions: Vec<Point3>,
    /// Intended molecules per square micrometer.
    pub density: f64,
    pub seed: u64,
}

impl EmitterSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.positions.is_empty() {
            return None;
        }
        let s: Vector3 = self.positions.iter().map(|p| p.coords).sum();
        Some(Point3::from(s / self.positions.len() as f64))
    }

    pub fn with_positions(&self, positions: Vec<Point3>) -> EmitterSet {
        EmitterSet {
            positions,
            density: self.density,
            seed: self.seed,
        }
    }

    pub fn translated(&self, by: Vector3) -> EmitterSet {
        self.with_positions(self.positions.iter().map(|p| p + by).collect())
    }
}

/// `count` points uniformly distributed over the surface: triangles drawn in
/// proportion to area, then uniform barycentric coordinates.
pub fn sample_surface_points<R: Rng>(
    mesh: &TriangleMesh,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Point3>, MeshError> {
    let areas: Vec<f64> = (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            triangle_area(&a, &b, &c)
        })
        .collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| MeshError::ZeroArea)?;
    Ok((0..count)
        .map(|_| {
            let [a, b, c] = mesh.corners(pick.sample(rng));
            let r1 = rng.random::<f64>().sqrt();
            let r2 = rng.random::<f64>();
            Point3::from(a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2))
        })
        .collect())
}

/// Places fluorophores on a mesh in nanometers at `density` per square
/// micrometer. The count is Poisson with mean `area * density`.
pub fn sample_surface(
    mesh: &TriangleMesh,
    density: f64,
    seed: u64,
) -> Result<EmitterSet, MeshError> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(MeshError::InvalidDensity(density));
    }
    let area_um2 = super::surface_area(mesh);
    if !(area_um2 > 0.0) {
        return Err(MeshError::ZeroArea);
    }
    let mut rng = seed::rng(seed);
    let mean = area_um2 * density;
    let count = Poisson::new(mean)
        .map(|d| d.sample(&mut rng) as usize)
        .unwrap_or(0);
    let positions = sample_surface_points(mesh, count, &mut rng)?;
    Ok(EmitterSet {
        positions,
        density,
        seed,
    })
}

/// `R_z(gamma) * R_y(beta) * R_x(alpha)`.
pub fn rotation_matrix(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), alpha);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), beta);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), gamma);
    (rz * ry * rx).into_inner()
}

/// Rotates points about `origin` by Euler angles about x, y and z (radians),
/// applied in that order.
pub fn rotate(points: &[Point3], alpha: f64, beta: f64, gamma: f64, origin: Point3) -> Vec<Point3> {
    let r = rotation_matrix(alpha, beta, gamma);
    points.iter().map(|p| origin + r * (p - origin)).collect()
}

/// Rotation about the centroid of the points.
pub fn rotate_about_centroid(points: &[Point3], alpha: f64, beta: f64, gamma: f64) -> Vec<Point3> {
    if points.is_empty() {
        return Vec::new();
    }
    let c = Point3::from(points.iter().map(|p| p.coords).sum::<Vector3>() / points.len() as f64);
    rotate(points, alpha, beta, gamma, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::closest_point_on_triangle;
    use crate::mesh::primitives::{axis_box, icosphere};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rotation_identity_and_quarter_turn() {
        let pts = vec![Point3::new(1.0, 2.0, 3.0)];
        assert_eq!(rotate(&pts, 0.0, 0.0, 0.0, Point3::origin()), pts);
        let q = rotate(&[Point3::new(0.0, 1.0, 0.0)], FRAC_PI_2, 0.0, 0.0, Point3::origin());
        assert!((q[0] - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn composition_order_is_x_then_y_then_z() {
        // x-quarter-turn takes y to z; the following y-quarter-turn takes z to x
        let q = rotate(&[Point3::new(0.0, 1.0, 0.0)], FRAC_PI_2, FRAC_PI_2, 0.0, Point3::origin());
        assert!((q[0] - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_about_origin_point() {
        let o = Point3::new(10.0, 0.0, 0.0);
        let q = rotate(&[Point3::new(11.0, 0.0, 0.0)], 0.0, 0.0, FRAC_PI_2, o);
        assert!((q[0] - Point3::new(10.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn emitters_lie_on_surface() {
        let s = icosphere(Point3::new(100.0, 0.0, 0.0), 500.0, 2);
        let e = sample_surface(&s, 30.0, 4).unwrap();
        assert!(!e.is_empty());
        let tol = 1e-6 * s.bounding_box().unwrap().diagonal();
        for p in &e.positions {
            let d = (0..s.triangles.len())
                .map(|t| {
                    let [a, b, c] = s.corners(t);
                    (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(d <= tol);
        }
        assert_eq!(sample_surface(&s, 30.0, 4).unwrap(), e, "seeded determinism");
    }

    #[test]
    fn poisson_count_mean() {
        // 1000 x 500 x 333.3 nm box: 2 (0.5 + 0.333 + 0.1667) = 2 square micrometers
        let b2 = axis_box(Point3::origin(), Point3::new(1000.0, 500.0, 1.0 / 3.0 * 1000.0));
        let area2 = crate::mesh::surface_area(&b2);
        assert!((area2 - 2.0).abs() < 1e-9, "{area2}");
        let n = 200;
        let mean = (0..n)
            .map(|s| sample_surface(&b2, 30.0, s).unwrap().len() as f64)
            .sum::<f64>()
            / n as f64;
        // the spread of a 200-seed mean is sqrt(60 / 200); the stated bound is generous
        assert!((mean - 60.0).abs() <= 3.0 * 60f64.sqrt(), "mean {mean}");
        assert!((mean - 60.0).abs() <= 4.0 * (60.0 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn tiny_density_gives_empty_set() {
        let b = axis_box(Point3::origin(), Point3::new(1000.0, 1000.0, 1000.0));
        let empty = (0..50)
            .filter(|&s| sample_surface(&b, 1e-9, s).unwrap().is_empty())
            .count();
        assert_eq!(empty, 50);
        assert!(matches!(sample_surface(&b, 0.0, 1), Err(MeshError::InvalidDensity(_))));
    }

    #[test]
    fn area_weighted_triangle_choice() {
        // two disjoint triangles with area ratio 9:1
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(3000.0, 0.0, 0.0),
            Point3::new(0.0, 3000.0, 0.0),
            Point3::new(0.0, 0.0, 10.0),
            Point3::new(1000.0, 0.0, 10.0),
            Point3::new(0.0, 1000.0, 10.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let mut rng = seed::rng(12);
        let n = 10_000;
        let pts = sample_surface_points(&m, n, &mut rng).unwrap();
        let big = pts.iter().filter(|p| p.z < 5.0).count() as f64;
        // binomial oracle: p = 0.9, sigma = sqrt(n p (1 - p))
        let sigma = (n as f64 * 0.9 * 0.1).sqrt();
        assert!((big - 0.9 * n as f64).abs() <= 3.0 * sigma, "big {big}");
    }

    #[test]
    fn degenerate_mesh_rejected() {
        let p = Point3::origin();
        let m = TriangleMesh {
            vertices: vec![p, Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)],
            triangles: vec![[0, 1, 2]],
            provenance: None,
        };
        assert!(matches!(sample_surface(&m, 30.0, 1), Err(MeshError::ZeroArea)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rotation_is_isometry_and_invertible(
                a in -7.0f64..7.0, b in -7.0f64..7.0, g in -7.0f64..7.0,
                pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), 2..12),
            ) {
                let pts: Vec<Point3> = pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
                let o = Point3::new(3.0, -2.0, 1.0);
                let r = rotate(&pts, a, b, g, o);
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        let d0 = (pts[i] - pts[j]).norm();
                        let d1 = (r[i] - r[j]).norm();
                        prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
                    }
                }
                // undo: R_x(-a) R_y(-b) R_z(-g) applied as three single rotations
                let back = rotate(&rotate(&rotate(&r, 0.0, 0.0, -g, o), 0.0, -b, 0.0, o), -a, 0.0, 0.0, o);
                for (p, q) in pts.iter().zip(&back) {
                    prop_assert!((p - q).norm() <= 1e-9 * p.coords.norm().max(1.0));
                }
            }
        }
    }
}
