//! Triangle meshes in physical nanometers: extraction from masks, repair,
//! normalization, inside/outside queries and fluorophore placement.

pub mod io;
mod inside;
mod marching_cubes;
mod normalize;
pub mod primitives;
mod repair;
mod sampling;

pub use inside::{point_in_mesh, InsideTester};
pub use marching_cubes::{marching_cubes, marching_cubes_field, ScalarField};
pub use normalize::{normalize_unit_cube, NormalizationRecord};
pub use repair::make_watertight;
pub use sampling::{
    rotate, rotate_about_centroid, rotation_matrix, sample_surface, sample_surface_points,
    EmitterSet, DEFAULT_EMITTER_DENSITY,
};

use crate::geometry::{triangle_area, Aabb, Point3};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mask has no foreground voxels")]
    EmptyMask,
    #[error("no level set at threshold {0}")]
    EmptyLevelSet(f64),
    #[error("iso level must lie strictly between 0 and 1, got {0}")]
    InvalidIso(f64),
    #[error("mesh is not watertight ({boundary_edges} open edges, {nonmanifold_edges} non-manifold edges, {misoriented_edges} inconsistently oriented edges)")]
    NotWatertight {
        boundary_edges: usize,
        nonmanifold_edges: usize,
        misoriented_edges: usize,
    },
    #[error("mesh is not orientable: directed edge {0}->{1} is used twice")]
    NonOrientable(u32, u32),
    #[error("edge {0}-{1} is shared by more than two triangles")]
    NonManifold(u32, u32),
    #[error("boundary loop through vertex {0} is self-intersecting")]
    SelfIntersectingLoop(u32),
    #[error("bounding box has zero extent")]
    ZeroExtent,
    #[error("mesh has zero surface area")]
    ZeroArea,
    #[error("triangle {0} references an invalid or repeated vertex index")]
    InvalidTriangle(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("emitter density must be positive, got {0}")]
    InvalidDensity(f64),
    #[error("mask is not binary")]
    NonBinaryMask,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Indexed triangle surface. Counter-clockwise triangles (seen from outside)
/// give outward normals and positive volume.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    /// Source instance id, when the mesh came from a labeled volume.
    pub provenance: Option<u32>,
}

/// Edge-incidence audit of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeAudit {
    pub edges: usize,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub misoriented_edges: usize,
}

impl EdgeAudit {
    pub fn is_watertight(&self) -> bool {
        self.boundary_edges == 0 && self.nonmanifold_edges == 0 && self.misoriented_edges == 0
    }
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            triangles,
            provenance: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_provenance(mut self, id: Option<u32>) -> Self {
        self.provenance = id;
        self
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if let Some(i) = self
            .vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        let n = self.vertices.len() as u32;
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(MeshError::InvalidTriangle(i));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        Aabb::from_points(self.referenced_vertices())
    }

    fn referenced_vertices(&self) -> impl Iterator<Item = &Point3> {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        self.vertices
            .iter()
            .zip(used)
            .filter_map(|(v, u)| u.then_some(v))
    }

    /// Sum of triangle areas in mesh units squared.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    /// Signed enclosed volume (sum of origin tetrahedra) in mesh units cubed.
    /// Meaningful only for closed meshes.
    pub fn signed_volume(&self) -> f64 {
        // accumulate relative to a reference point to limit cancellation far from the origin
        let r = self.vertices.first().copied().unwrap_or_else(Point3::origin);
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                (a - r).dot(&(b - r).cross(&(c - r)))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn edge_audit(&self) -> EdgeAudit {
        // (count, directed count in min->max direction)
        let mut edges: HashMap<(u32, u32), (u32, u32)> =
            HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = edges.entry((a.min(b), a.max(b))).or_default();
                e.0 += 1;
                if a < b {
                    e.1 += 1;
                }
            }
        }
        let mut audit = EdgeAudit {
            edges: edges.len(),
            ..Default::default()
        };
        for &(count, forward) in edges.values() {
            match count {
                1 => audit.boundary_edges += 1,
                2 if forward != 1 => audit.misoriented_edges += 1,
                2 => {}
                _ => audit.nonmanifold_edges += 1,
            }
        }
        audit
    }

    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_audit().is_watertight()
    }

    pub fn ensure_watertight(&self) -> Result<(), MeshError> {
        let a = self.edge_audit();
        if a.is_watertight() && !self.triangles.is_empty() {
            Ok(())
        } else {
            Err(MeshError::NotWatertight {
                boundary_edges: a.boundary_edges,
                nonmanifold_edges: a.nonmanifold_edges,
                misoriented_edges: a.misoriented_edges,
            })
        }
    }

    /// Same surface with every triangle reversed.
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
            provenance: self.provenance,
        }
    }

    pub fn map_vertices(&self, f: impl Fn(&Point3) -> Point3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
            provenance: self.provenance,
        }
    }

    /// Concatenates two meshes into one vertex/triangle list.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let off = self.vertices.len() as u32;
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.triangles
            .extend(other.triangles.iter().map(|t| t.map(|v| v + off)));
        out
    }
}

/// Surface area in square micrometers for a mesh in nanometers.
pub fn surface_area(mesh: &TriangleMesh) -> f64 {
    mesh.area() * 1e-6
}

/// Enclosed volume in cubic micrometers for a watertight mesh in nanometers.
/// Negative when the triangles face inward.
pub fn mesh_volume(mesh: &TriangleMesh) -> Result<f64, MeshError> {
    mesh.ensure_watertight()?;
    Ok(mesh.signed_volume() * 1e-9)
}
