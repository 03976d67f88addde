//! Mitochondria shape pipeline: segmented EM volumes to watertight meshes,
//! occupancy samples and small implicit-surface fits, plus simulated
//! fluorescence images, z-stacks and ground-truth datasets.
//!
//! Lengths are nanometers unless a function says otherwise. Normalized
//! shapes live in the centered unit cube `[-0.5, 0.5]^3`.

pub mod checksum;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod implicit;
pub mod mesh;
pub mod metrics;
pub mod microscope;
pub mod occupancy;
pub mod seed;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{Point3, Vector3};
pub use implicit::{FitConfig, MlpOccupancy};
pub use mesh::{EmitterSet, NormalizationRecord, TriangleMesh};
pub use metrics::{MaskScores, MeshComparison};
pub use microscope::{ImageStack, MicroscopeConfig, MicroscopeKind};
pub use occupancy::{OccupancyGrid, OccupancySampleSet};
pub use volume::{Connectivity, InstanceIndex, VoxelVolume};
