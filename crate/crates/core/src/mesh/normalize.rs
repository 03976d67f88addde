use super::{MeshError, TriangleMesh};
use crate::geometry::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Isotropic map from physical coordinates into the centered unit cube:
/// `normalized = (physical - translation) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub scale: f64,
    /// Nanometers.
    pub translation: [f64; 3],
}

impl NormalizationRecord {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: [0.0; 3],
        }
    }

    fn t(&self) -> Vector3 {
        Vector3::from(self.translation)
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from((p - self.t()).coords * self.scale)
    }

    pub fn invert(&self, q: &Point3) -> Point3 {
        Point3::from(q.coords / self.scale + self.t())
    }

    pub fn normalize_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|p| self.apply(p))
    }

    pub fn denormalize_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|q| self.invert(q))
    }

    /// Length in normalized units to nanometers.
    pub fn to_physical_length(&self, d: f64) -> f64 {
        d / self.scale
    }
}

/// Centers the bounding box at the origin and scales its longest side to 1.
pub fn normalize_unit_cube(
    mesh: &TriangleMesh,
) -> Result<(TriangleMesh, NormalizationRecord), MeshError> {
    let bb = mesh.bounding_box().ok_or(MeshError::ZeroExtent)?;
    let longest = bb.extent().max();
    if !(longest > 0.0) {
        return Err(MeshError::ZeroExtent);
    }
    let c = bb.center();
    let record = NormalizationRecord {
        scale: 1.0 / longest,
        translation: [c.x, c.y, c.z],
    };
    Ok((record.normalize_mesh(mesh), record))
}
