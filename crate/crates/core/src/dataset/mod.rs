//! Dataset production: segmentation montages, stack-to-shape pairs,
//! shape-level splits and microscope-to-microscope re-rendering.

mod manifest;
mod seg;
mod split;
mod stack2shape;
mod transform;

pub use manifest::{
    read_manifest, verify_manifest, DatasetKind, FileRecord, GenerationManifest, ItemRecord, ShapeRecord,
    MANIFEST_FILE,
};
pub use seg::{gen_segmentation_dataset, SegConfig};
pub use split::{split, split_counts, SplitAssignment, SplitSpec};
pub use stack2shape::{default_perspectives, gen_stack2shape_dataset, render_perspective, Stack2ShapeConfig};
pub use transform::{gen_m2m_dataset, microscope_transform, M2mConfig, ShapeInput, TransformOptions};

use crate::fixtures::mitochondrion_mesh;
use crate::implicit::FitError;
use crate::mesh::io::read_mesh;
use crate::mesh::{MeshError, TriangleMesh};
use crate::microscope::{MicroscopeConfig, MicroscopeError};
use crate::occupancy::OccupancyError;
use crate::seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("output directory {0} is not empty")]
    OutputNotEmpty(PathBuf),
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("file listed in manifest is missing: {0}")]
    MissingFile(String),
    #[error("file not listed in manifest: {0}")]
    OrphanFile(String),
    #[error("shape {0}: {1}")]
    Shape(u32, MeshError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Microscope(#[from] MicroscopeError),
    #[error(transparent)]
    Occupancy(#[from] OccupancyError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A preset name or a full microscope description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MicroscopeSpec {
    Preset(String),
    Inline(MicroscopeConfig),
}

impl MicroscopeSpec {
    pub fn resolve(&self) -> Result<MicroscopeConfig, MicroscopeError> {
        let cfg = match self {
            MicroscopeSpec::Preset(name) => MicroscopeConfig::preset(name)?,
            MicroscopeSpec::Inline(c) => c.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where the shape corpus comes from. Mesh files are in nanometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSource {
    /// Synthetic mitochondria built through the volume pipeline.
    Synthetic { count: usize },
    Files(Vec<PathBuf>),
}

impl Default for ShapeSource {
    fn default() -> Self {
        ShapeSource::Synthetic { count: 4 }
    }
}

impl ShapeSource {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let n = match self {
            ShapeSource::Synthetic { count } => *count,
            ShapeSource::Files(f) => f.len(),
        };
        if n == 0 {
            return Err(DatasetError::InvalidConfig("shape corpus is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CorpusShape {
    pub id: u32,
    pub provenance: String,
    pub mesh: TriangleMesh,
}

/// Builds or reads the corpus. Relative file paths resolve against
/// `base_dir` when given.
pub fn load_corpus(
    source: &ShapeSource,
    master_seed: u64,
    base_dir: Option<&Path>,
    jobs: usize,
) -> Result<Vec<CorpusShape>, DatasetError> {
    source.validate()?;
    match source {
        ShapeSource::Synthetic { count } => run_parallel(jobs, (0..*count as u32).collect(), |&id| {
            let s = seed::derive_seed(master_seed, seed::stream::CORPUS, id as u64);
            Ok(CorpusShape {
                id,
                provenance: format!("synthetic:{s}"),
                mesh: mitochondrion_mesh(s).with_provenance(Some(id)),
            })
        }),
        ShapeSource::Files(files) => files
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let path = match base_dir {
                    Some(b) if f.is_relative() => b.join(f),
                    _ => f.clone(),
                };
                let mesh = read_mesh(&path).map_err(|e| DatasetError::Shape(i as u32, e))?;
                Ok(CorpusShape {
                    id: i as u32,
                    provenance: f.display().to_string(),
                    mesh: mesh.with_provenance(Some(i as u32)),
                })
            })
            .collect(),
    }
}

/// Maps `f` over `items` on a pool of `jobs` threads, keeping input order.
pub fn run_parallel<T: Sync, R: Send>(
    jobs: usize,
    items: Vec<T>,
    f: impl Fn(&T) -> Result<R, DatasetError> + Sync + Send,
) -> Result<Vec<R>, DatasetError> {
    if jobs == 0 {
        return Err(DatasetError::InvalidConfig("jobs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| DatasetError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// Creates `out` and its subdirectories; refuses a non-empty directory.
pub(crate) fn prepare_output(out: &Path, subdirs: &[&str]) -> Result<(), DatasetError> {
    if out.exists() && std::fs::read_dir(out)?.next().is_some() {
        return Err(DatasetError::OutputNotEmpty(out.to_path_buf()));
    }
    for s in subdirs {
        std::fs::create_dir_all(out.join(s))?;
    }
    std::fs::create_dir_all(out)?;
    Ok(())
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<(), DatasetError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DatasetError::InvalidConfig(format!("{name} must be positive")))
    }
}

pub(crate) fn check_sbr(t: &crate::microscope::SbrTarget) -> Result<(), DatasetError> {
    match t {
        crate::microscope::SbrTarget::Fixed(v) if !(v.is_finite() && *v >= 1.0) => {
            Err(DatasetError::InvalidConfig("fixed SBR must be >= 1".into()))
        }
        _ => Ok(()),
    }
}

pub(crate) fn check_perspectives(p: &[[f64; 3]]) -> Result<(), DatasetError> {
    if p.is_empty() {
        return Err(DatasetError::InvalidConfig("perspectives must be nonempty".into()));
    }
    if p.iter().flatten().any(|a| !a.is_finite()) {
        return Err(DatasetError::InvalidConfig("perspective angles must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
