pub mod dataset;
pub mod implicit;
pub mod mesh;
pub mod metrics;
pub mod presets;
pub mod render;
pub mod volume;

use crate::failure::{CliResult, Failure};
use clap::Args;
use mitoforge::volume::{header_path_for, load_volume, read_header};
use mitoforge::VoxelVolume;
use std::path::PathBuf;

/// A raw volume and its JSON header.
#[derive(Args, Debug, Clone)]
pub struct VolumeInput {
    /// Raw little-endian voxel file.
    pub input: PathBuf,
    /// Header path; defaults to `<input>.json`.
    #[arg(long)]
    pub header: Option<PathBuf>,
}

impl VolumeInput {
    pub fn header_path(&self) -> PathBuf {
        self.header.clone().unwrap_or_else(|| header_path_for(&self.input))
    }

    pub fn check(&self) -> CliResult<()> {
        crate::require_file(&self.input)?;
        crate::require_file(&self.header_path())
    }

    pub fn load(&self) -> CliResult<VoxelVolume> {
        self.check()?;
        let header = read_header(&self.header_path())?;
        Ok(load_volume(&self.input, &header)?)
    }
}

/// Parses `a,b,c` into three floats.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b, c] if parts.iter().all(|v| v.is_finite()) => Ok([*a, *b, *c]),
        _ => Err(format!("expected three finite numbers, got {s:?}")),
    }
}

/// `sample` or a fixed ratio.
pub fn parse_sbr(s: &str) -> Result<mitoforge::microscope::SbrTarget, String> {
    use mitoforge::microscope::SbrTarget;
    if s.eq_ignore_ascii_case("sample") {
        return Ok(SbrTarget::Sample);
    }
    s.parse::<f64>()
        .map(SbrTarget::Fixed)
        .map_err(|_| format!("expected \"sample\" or a number, got {s:?}"))
}

pub fn json_file<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> CliResult<T> {
    crate::require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &std::path::Path, v: &impl serde::Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).expect("serializable");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
