//! Inside/outside classification against a closed mesh.
//!
//! Parity of crossings along a +x ray. Triangles are projected to the y-z
//! plane and bucketed in a uniform grid. Projected containment uses exact
//! orientation predicates with a symbolic perturbation of the query point,
//! so rays through edges or vertices are counted exactly once. Points on the
//! surface (within a tiny tolerance) count as inside.

use super::{MeshError, TriangleMesh};
use crate::geometry::{closest_point_on_triangle, Aabb, Point3};
use robust::{orient2d, Coord};

pub struct InsideTester<'a> {
    mesh: &'a TriangleMesh,
    bbox: Aabb,
    eps: f64,
    grid_min: [f64; 2],
    cell: [f64; 2],
    res: [usize; 2],
    cells: Vec<Vec<u32>>,
    /// Sign of the projected orientation of each triangle; 0 when degenerate.
    orient: Vec<i8>,
}

#[inline]
fn yz(p: &Point3) -> Coord<f64> {
    Coord { x: p.y, y: p.z }
}

#[inline]
fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign of orient(u, w, q + (eps, eps^2)) for infinitesimal eps.
#[inline]
fn perturbed_sign(u: Coord<f64>, w: Coord<f64>, q: Coord<f64>) -> i8 {
    let s = sign(orient2d(u, w, q));
    if s != 0 {
        return s;
    }
    if w.y != u.y {
        if w.y > u.y {
            -1
        } else {
            1
        }
    } else if w.x > u.x {
        1
    } else {
        -1
    }
}

impl<'a> InsideTester<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self, MeshError> {
        mesh.ensure_watertight()?;
        let bbox = mesh.bounding_box().ok_or(MeshError::ZeroExtent)?;
        let eps = 1e-9 * bbox.diagonal().max(f64::MIN_POSITIVE);
        let n = mesh.triangles.len();
        let side = ((n as f64).sqrt() * 0.7).ceil().clamp(1.0, 512.0) as usize;
        let ext = bbox.extent();
        let grid_min = [bbox.min.y, bbox.min.z];
        let cell = [
            (ext.y / side as f64).max(f64::MIN_POSITIVE),
            (ext.z / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut cells = vec![Vec::new(); side * side];
        let mut orient = Vec::with_capacity(n);
        let clamp_idx = |v: f64, a: usize| -> usize {
            (((v - grid_min[a]) / cell[a]).floor().max(0.0) as usize).min(side - 1)
        };
        for t in 0..n {
            let [a, b, c] = mesh.corners(t);
            orient.push(sign(orient2d(yz(&a), yz(&b), yz(&c))));
            let (y0, y1) = (a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y));
            let (z0, z1) = (a.z.min(b.z).min(c.z), a.z.max(b.z).max(c.z));
            for iz in clamp_idx(z0, 1)..=clamp_idx(z1, 1) {
                for iy in clamp_idx(y0, 0)..=clamp_idx(y1, 0) {
                    cells[iy + side * iz].push(t as u32);
                }
            }
        }
        Ok(Self {
            mesh,
            bbox,
            eps,
            grid_min,
            cell,
            res: [side, side],
            cells,
            orient,
        })
    }

    pub fn bounding_box(&self) -> Aabb {
        self.bbox
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let e = self.eps;
        if (0..3).any(|i| p[i] < self.bbox.min[i] - e || p[i] > self.bbox.max[i] + e) {
            return false;
        }
        let iy = (((p.y - self.grid_min[0]) / self.cell[0]).floor().max(0.0) as usize)
            .min(self.res[0] - 1);
        let iz = (((p.z - self.grid_min[1]) / self.cell[1]).floor().max(0.0) as usize)
            .min(self.res[1] - 1);
        let q = yz(p);
        let mut crossings = 0u32;
        for &t in &self.cells[iy + self.res[0] * iz] {
            let t = t as usize;
            let [a, b, c] = self.mesh.corners(t);
            let s = self.orient[t];
            if s == 0 {
                // wall parallel to the ray: only matters for the on-surface test
                let lo_y = a.y.min(b.y).min(c.y) - e;
                let hi_y = a.y.max(b.y).max(c.y) + e;
                let lo_z = a.z.min(b.z).min(c.z) - e;
                let hi_z = a.z.max(b.z).max(c.z) + e;
                if p.y >= lo_y && p.y <= hi_y && p.z >= lo_z && p.z <= hi_z {
                    let cp = closest_point_on_triangle(p, &a, &b, &c);
                    if (cp - p).norm() <= e {
                        return true;
                    }
                }
                continue;
            }
            let (pa, pb, pc) = (yz(&a), yz(&b), yz(&c));
            let o_ab = orient2d(pa, pb, q);
            let o_bc = orient2d(pb, pc, q);
            let o_ca = orient2d(pc, pa, q);
            let sf = s as f64;
            let closed = o_ab * sf >= 0.0 && o_bc * sf >= 0.0 && o_ca * sf >= 0.0;
            if !closed {
                continue;
            }
            let area = o_ab + o_bc + o_ca;
            let x_hit = (o_bc * a.x + o_ca * b.x + o_ab * c.x) / area;
            if (x_hit - p.x).abs() <= e {
                return true;
            }
            let open = perturbed_sign(pa, pb, q) == s
                && perturbed_sign(pb, pc, q) == s
                && perturbed_sign(pc, pa, q) == s;
            if open && x_hit > p.x {
                crossings += 1;
            }
        }
        crossings % 2 == 1
    }
}

/// One-off query. Builds the acceleration structure each call; use
/// [`InsideTester`] for many points.
pub fn point_in_mesh(mesh: &TriangleMesh, p: &Point3) -> Result<bool, MeshError> {
    Ok(InsideTester::new(mesh)?.contains(p))
}
