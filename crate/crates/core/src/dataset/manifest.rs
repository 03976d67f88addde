use super::split::SplitAssignment;
use super::DatasetError;
use crate::checksum::sha256_file;
use crate::mesh::NormalizationRecord;
use crate::microscope::MicroscopeConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Segmentation,
    Stack2shape,
    M2m,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the dataset root, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub(crate) fn of(root: &Path, rel: &str) -> Result<Self, DatasetError> {
        let p = root.join(rel);
        Ok(Self {
            path: rel.to_string(),
            sha256: sha256_file(&p)?,
            bytes: std::fs::metadata(&p)?.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub id: u32,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub index: u64,
    /// Derived from the master seed and `index` alone.
    pub seed: u64,
    pub shape_ids: Vec<u32>,
    /// `(alpha, beta, gamma)` in radians, one per shape placement.
    pub rotations: Vec<[f64; 3]>,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub format_version: u32,
    pub kind: DatasetKind,
    pub master_seed: u64,
    pub microscope: MicroscopeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_microscope: Option<MicroscopeConfig>,
    /// The resolved generation config.
    pub config: serde_json::Value,
    pub shapes: Vec<ShapeRecord>,
    pub items: Vec<ItemRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitAssignment>,
    pub files: Vec<FileRecord>,
}

impl GenerationManifest {
    pub(crate) fn new(
        kind: DatasetKind,
        master_seed: u64,
        microscope: MicroscopeConfig,
        config: serde_json::Value,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind,
            master_seed,
            microscope,
            target_microscope: None,
            config,
            shapes: Vec::new(),
            items: Vec::new(),
            split: None,
            files: Vec::new(),
        }
    }

    /// Sorts the file list and writes `manifest.json` under `root`.
    pub fn write(&mut self, root: &Path) -> Result<(), DatasetError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(root.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}

pub fn read_manifest(root: &Path) -> Result<GenerationManifest, DatasetError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(root.join(MANIFEST_FILE))?)?)
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeSet<String>) -> Result<(), DatasetError> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            walk(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap();
            out.insert(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
        }
    }
    Ok(())
}

/// Re-reads the manifest, re-hashes every listed file and rejects files on
/// disk that the manifest does not list.
pub fn verify_manifest(root: &Path) -> Result<GenerationManifest, DatasetError> {
    let m = read_manifest(root)?;
    let mut on_disk = BTreeSet::new();
    walk(root, root, &mut on_disk)?;
    on_disk.remove(MANIFEST_FILE);
    for f in &m.files {
        if !on_disk.remove(&f.path) {
            return Err(DatasetError::MissingFile(f.path.clone()));
        }
        if sha256_file(&root.join(&f.path))? != f.sha256 {
            return Err(DatasetError::ChecksumMismatch(f.path.clone()));
        }
    }
    if let Some(orphan) = on_disk.into_iter().next() {
        return Err(DatasetError::OrphanFile(orphan));
    }
    Ok(m)
}
