//! Occupancy training pairs and dense occupancy grids in the centered unit
//! cube `[-0.5, 0.5]^3`.

mod io;

pub use io::{from_bytes, read_samples, to_bytes, to_csv, write_samples};

use crate::geometry::Point3;
use crate::mesh::{marching_cubes_field, InsideTester, MeshError, ScalarField, TriangleMesh};
use crate::seed;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;

/// Slack allowed when checking that a mesh lies in the unit cube.
const CUBE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum OccupancyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("mesh is not normalized: bounding box exceeds the centered unit cube")]
    NotNormalized,
    #[error("sample count must be >= 1")]
    EmptySampleSet,
    #[error("grid resolution must be >= 2 per axis, got {0}")]
    InvalidResolution(usize),
    #[error("malformed sample file: {0}")]
    Malformed(String),
    #[error("sample file checksum mismatch")]
    ChecksumMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Query points with binary inside labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySampleSet {
    /// Single precision, so the on-disk form is lossless.
    pub points: Vec<[f32; 3]>,
    pub labels: Vec<u8>,
    /// Free-form description of the source mesh.
    pub source: String,
    pub seed: u64,
}

impl OccupancySampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point3 {
        let p = self.points[i];
        Point3::new(p[0] as f64, p[1] as f64, p[2] as f64)
    }

    pub fn inside_fraction(&self) -> f64 {
        self.labels.iter().map(|&l| l as f64).sum::<f64>() / self.len().max(1) as f64
    }
}

fn ensure_normalized(mesh: &TriangleMesh) -> Result<(), OccupancyError> {
    let bb = mesh.bounding_box().ok_or(MeshError::ZeroExtent)?;
    let lim = 0.5 + CUBE_TOLERANCE;
    if (0..3).any(|a| bb.min[a] < -lim || bb.max[a] > lim) {
        return Err(OccupancyError::NotNormalized);
    }
    Ok(())
}

/// `n` points drawn uniformly from the unit cube, labeled by
/// [`crate::mesh::point_in_mesh`] (surface counts as inside).
pub fn sample_occupancy(
    mesh: &TriangleMesh,
    n: usize,
    seed_value: u64,
    source: impl Into<String>,
) -> Result<OccupancySampleSet, OccupancyError> {
    if n == 0 {
        return Err(OccupancyError::EmptySampleSet);
    }
    ensure_normalized(mesh)?;
    let tester = InsideTester::new(mesh)?;
    let mut rng = seed::rng(seed_value);
    let points: Vec<[f32; 3]> = (0..n)
        .map(|_| {
            [0, 1, 2].map(|_| (rng.random::<f64>() - 0.5) as f32)
        })
        .collect();
    let labels = points
        .iter()
        .map(|p| {
            let q = Point3::new(p[0] as f64, p[1] as f64, p[2] as f64);
            tester.contains(&q) as u8
        })
        .collect();
    Ok(OccupancySampleSet {
        points,
        labels,
        source: source.into(),
        seed: seed_value,
    })
}

/// Values on a regular grid of nodes. Node `(i, j, k)` sits at
/// `origin + (i, j, k) * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: [usize; 3],
    pub values: Vec<f64>,
    pub origin: Point3,
    pub spacing: f64,
}

impl OccupancyGrid {
    /// Cell-centered nodes covering the centered unit cube.
    pub fn unit_cube_layout(resolution: usize) -> Result<(Point3, f64), OccupancyError> {
        if resolution < 2 {
            return Err(OccupancyError::InvalidResolution(resolution));
        }
        let spacing = 1.0 / resolution as f64;
        let first = -0.5 + spacing / 2.0;
        Ok((Point3::new(first, first, first), spacing))
    }

    /// Evaluates `f` at every node of a unit-cube grid, in parallel over z slices.
    pub fn from_fn(
        resolution: usize,
        f: impl Fn(&Point3) -> f64 + Sync,
    ) -> Result<Self, OccupancyError> {
        let (origin, spacing) = Self::unit_cube_layout(resolution)?;
        let r = resolution;
        let mut values = vec![0.0; r * r * r];
        values.par_chunks_mut(r * r).enumerate().for_each(|(z, slab)| {
            for y in 0..r {
                for x in 0..r {
                    let p = origin + crate::geometry::Vector3::new(x as f64, y as f64, z as f64) * spacing;
                    slab[x + r * y] = f(&p);
                }
            }
        });
        Ok(Self {
            resolution: [r, r, r],
            values,
            origin,
            spacing,
        })
    }

    pub fn node(&self, x: usize, y: usize, z: usize) -> Point3 {
        self.origin + crate::geometry::Vector3::new(x as f64, y as f64, z as f64) * self.spacing
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[x + self.resolution[0] * (y + self.resolution[1] * z)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn as_field(&self) -> ScalarField {
        ScalarField {
            dims: self.resolution,
            origin: self.origin,
            spacing: self.spacing,
            values: self.values.clone(),
        }
    }

    /// Marching cubes of `{value > threshold}`, closed at the grid boundary.
    pub fn to_mesh(&self, threshold: f64) -> Result<TriangleMesh, MeshError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(MeshError::InvalidIso(threshold));
        }
        marching_cubes_field(&self.as_field(), threshold, Some(0.0))
    }

    /// Maps a normalized-space mesh back to physical units.
    pub fn physical_mesh(
        &self,
        threshold: f64,
        record: &crate::mesh::NormalizationRecord,
    ) -> Result<TriangleMesh, MeshError> {
        Ok(record.denormalize_mesh(&self.to_mesh(threshold)?))
    }
}

/// Hard 0/1 occupancy of a watertight mesh at every node of a unit-cube grid.
pub fn occupancy_grid(mesh: &TriangleMesh, resolution: usize) -> Result<OccupancyGrid, OccupancyError> {
    let tester = InsideTester::new(mesh)?;
    OccupancyGrid::from_fn(resolution, |p| tester.contains(p) as u8 as f64)
}
