//! Fluorescence image formation: separable Gaussian PSF, z-stacks, Poisson
//! noise over a constant background, and in-focus ground-truth masks.

mod image;
mod io;

pub use image::{FieldOfView, Image, ImageStack, Mask};
pub use io::{
    read_f32_raw, read_pgm16, read_pgm8, read_stack, write_f32_raw, write_mask_pgm, write_pgm16, write_stack,
    RawImageHeader, StackManifest,
};

use crate::geometry::Point3;
use crate::mesh::EmitterSet;
use crate::seed;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// FWHM = 2 sqrt(2 ln 2) sigma.
pub const FWHM_PER_SIGMA: f64 = 2.3548;
pub const DEFAULT_PHOTONS_PER_EMITTER: f64 = 1000.0;
pub const DEFAULT_BACKGROUND: f64 = 100.0;
pub const DEFAULT_SBR_RANGE: [f64; 2] = [2.0, 4.0];
/// Emitters whose axial weight falls below this are not rendered.
pub const AXIAL_CUTOFF: f64 = 1e-6;
/// Lateral kernels are evaluated out to this many sigmas.
const LATERAL_SUPPORT_SIGMAS: f64 = 8.0;

#[derive(Debug, Error)]
pub enum MicroscopeError {
    #[error("invalid microscope config: {0}")]
    InvalidConfig(String),
    #[error("unknown preset {0:?}; known presets are Con1, Epi1, Epi2")]
    UnknownPreset(String),
    #[error("image has no signal; cannot scale to a target SBR")]
    ZeroSignal,
    #[error("negative or non-finite intensity at pixel {0}")]
    InvalidIntensity(usize),
    #[error("count {0} does not fit in 16 bits")]
    CountOverflow(f64),
    #[error("malformed image file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MicroscopeKind {
    Widefield,
    Confocal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroscopeConfig {
    pub name: String,
    pub kind: MicroscopeKind,
    pub emission_wavelength_nm: f64,
    pub numerical_aperture: f64,
    pub magnification: f64,
    /// Sample-plane pixel size.
    pub pixel_size_nm: f64,
    pub dof_nm: f64,
    #[serde(default = "default_background")]
    pub background: f64,
    #[serde(default = "default_sbr_range")]
    pub sbr_range: [f64; 2],
}

fn default_background() -> f64 {
    DEFAULT_BACKGROUND
}

fn default_sbr_range() -> [f64; 2] {
    DEFAULT_SBR_RANGE
}

pub const PRESET_NAMES: [&str; 3] = ["Con1", "Epi1", "Epi2"];

impl MicroscopeConfig {
    fn preset_row(name: &str, kind: MicroscopeKind, wavelength: f64, pixel: f64, na: f64, mag: f64, dof: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            emission_wavelength_nm: wavelength,
            numerical_aperture: na,
            magnification: mag,
            pixel_size_nm: pixel,
            dof_nm: dof,
            background: DEFAULT_BACKGROUND,
            sbr_range: DEFAULT_SBR_RANGE,
        }
    }

    pub fn con1() -> Self {
        Self::preset_row("Con1", MicroscopeKind::Confocal, 600.0, 70.0, 1.4, 63.0, 250.0)
    }

    pub fn epi1() -> Self {
        Self::preset_row("Epi1", MicroscopeKind::Widefield, 688.0, 109.0, 1.42, 60.0, 500.0)
    }

    /// DOF is not listed for this preset; the widefield value is assumed.
    pub fn epi2() -> Self {
        Self::preset_row("Epi2", MicroscopeKind::Widefield, 608.0, 80.0, 1.4, 60.0, 500.0)
    }

    /// Case-insensitive preset lookup.
    pub fn preset(name: &str) -> Result<Self, MicroscopeError> {
        match name.to_ascii_lowercase().as_str() {
            "con1" => Ok(Self::con1()),
            "epi1" => Ok(Self::epi1()),
            "epi2" => Ok(Self::epi2()),
            _ => Err(MicroscopeError::UnknownPreset(name.to_string())),
        }
    }

    pub fn presets() -> Vec<Self> {
        vec![Self::con1(), Self::epi1(), Self::epi2()]
    }

    /// Reads a JSON file holding either a full config or a preset name string.
    pub fn from_json_file(path: &Path) -> Result<Self, MicroscopeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MicroscopeError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let cfg = match value {
            serde_json::Value::String(name) => Self::preset(&name)?,
            v => serde_json::from_value(v)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MicroscopeError> {
        let bad = |m: &str| Err(MicroscopeError::InvalidConfig(m.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.emission_wavelength_nm) {
            return bad("emission_wavelength_nm must be positive");
        }
        if !positive(self.pixel_size_nm) {
            return bad("pixel_size_nm must be positive");
        }
        if !positive(self.dof_nm) {
            return bad("dof_nm must be positive");
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 2.0) {
            return bad("numerical_aperture must lie in (0, 2)");
        }
        if !positive(self.magnification) {
            return bad("magnification must be positive");
        }
        if !positive(self.background) {
            return bad("background must be positive");
        }
        let [lo, hi] = self.sbr_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 1.0 && lo <= hi) {
            return bad("sbr_range must satisfy 1 <= low <= high");
        }
        Ok(())
    }

    /// `lambda / (2 NA)`, divided by a further sqrt(2) for confocal.
    pub fn lateral_resolution(&self) -> f64 {
        let r = self.emission_wavelength_nm / (2.0 * self.numerical_aperture);
        match self.kind {
            MicroscopeKind::Widefield => r,
            MicroscopeKind::Confocal => r / std::f64::consts::SQRT_2,
        }
    }

    /// `(sigma_xy, sigma_z)` in nm.
    pub fn psf_sigma(&self) -> (f64, f64) {
        (self.lateral_resolution() / FWHM_PER_SIGMA, self.dof_nm / FWHM_PER_SIGMA)
    }

    pub fn axial_weight(&self, dz: f64) -> f64 {
        let (_, sz) = self.psf_sigma();
        (-dz * dz / (2.0 * sz * sz)).exp()
    }
}

pub fn lateral_resolution(config: &MicroscopeConfig) -> f64 {
    config.lateral_resolution()
}

pub fn psf_sigma(config: &MicroscopeConfig) -> (f64, f64) {
    config.psf_sigma()
}

/// Fraction of a unit 1D Gaussian at `mu` falling in each pixel, for the
/// pixels within the kernel support. Returns the first pixel index and the
/// weights.
fn pixel_weights(mu: f64, sigma: f64, origin: f64, pixel: f64, count: usize) -> (usize, Vec<f64>) {
    let reach = LATERAL_SUPPORT_SIGMAS * sigma;
    let lo = ((mu - reach - origin) / pixel).floor().max(0.0);
    let hi = ((mu + reach - origin) / pixel).ceil().min(count as f64);
    if hi <= lo {
        return (0, Vec::new());
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let scale = 1.0 / (std::f64::consts::SQRT_2 * sigma);
    let cdf = |edge: f64| 0.5 * libm::erf((edge - mu) * scale);
    let mut prev = cdf(origin + lo as f64 * pixel);
    let w = (lo..hi)
        .map(|i| {
            let next = cdf(origin + (i + 1) as f64 * pixel);
            let v = next - prev;
            prev = next;
            v
        })
        .collect();
    (lo, w)
}

/// Noise-free image of the emitters with the focal plane at `z_focal`.
pub fn render_slice(
    emitters: &EmitterSet,
    config: &MicroscopeConfig,
    fov: &FieldOfView,
    z_focal: f64,
    photons_per_emitter: f64,
) -> Image {
    let mut img = Image::zeros(fov.width, fov.height);
    let (sxy, _) = config.psf_sigma();
    let px = config.pixel_size_nm;
    let [ox, oy] = fov.origin(px);
    for e in &emitters.positions {
        let wz = config.axial_weight(e.z - z_focal);
        if wz < AXIAL_CUTOFF {
            continue;
        }
        let (x0, wx) = pixel_weights(e.x, sxy, ox, px, fov.width);
        let (y0, wy) = pixel_weights(e.y, sxy, oy, px, fov.height);
        let amp = photons_per_emitter * wz;
        for (j, &vy) in wy.iter().enumerate() {
            let row = fov.width * (y0 + j);
            let ay = amp * vy;
            for (i, &vx) in wx.iter().enumerate() {
                img.pixels[row + x0 + i] += ay * vx;
            }
        }
    }
    img
}

/// Focal offsets `n * dz_nm` for each `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackPlan {
    pub dz_nm: f64,
    pub n: Vec<i32>,
}

impl StackPlan {
    /// Three slices at `n = -1, 0, 1` spaced by half the DOF.
    pub fn default_for(config: &MicroscopeConfig) -> Self {
        Self {
            dz_nm: config.dof_nm / 2.0,
            n: vec![-1, 0, 1],
        }
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.n.iter().map(|&n| n as f64 * self.dz_nm).collect()
    }

    pub fn validate(&self) -> Result<(), MicroscopeError> {
        if self.n.is_empty() {
            return Err(MicroscopeError::InvalidConfig("stack needs at least one slice".into()));
        }
        if !(self.dz_nm.is_finite() && self.dz_nm > 0.0) {
            return Err(MicroscopeError::InvalidConfig("dz must be positive".into()));
        }
        Ok(())
    }
}

pub fn render_zstack(
    emitters: &EmitterSet,
    config: &MicroscopeConfig,
    plan: &StackPlan,
    fov: &FieldOfView,
    photons_per_emitter: f64,
) -> Result<ImageStack, MicroscopeError> {
    plan.validate()?;
    let offsets = plan.offsets();
    let slices = offsets
        .iter()
        .map(|&z| render_slice(emitters, config, fov, z, photons_per_emitter))
        .collect();
    Ok(ImageStack {
        width: fov.width,
        height: fov.height,
        pixel_size_nm: config.pixel_size_nm,
        z_offsets_nm: offsets,
        slices,
        noisy: false,
        seed: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SbrTarget {
    Fixed(f64),
    /// Uniform draw from the config's `sbr_range`.
    Sample,
}

fn resolve_target(target: SbrTarget, config: &MicroscopeConfig, rng: &mut seed::Rng) -> Result<f64, MicroscopeError> {
    let t = match target {
        SbrTarget::Fixed(t) => t,
        SbrTarget::Sample => {
            let [lo, hi] = config.sbr_range;
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        }
    };
    if !(t.is_finite() && t >= 1.0) {
        return Err(MicroscopeError::InvalidConfig(format!("target SBR {t} must be >= 1")));
    }
    Ok(t)
}

fn check_intensities(img: &Image) -> Result<(), MicroscopeError> {
    match img.pixels.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(i) => Err(MicroscopeError::InvalidIntensity(i)),
        None => Ok(()),
    }
}

fn poisson_counts(img: &Image, scale: f64, background: f64, rng: &mut seed::Rng) -> Image {
    let pixels = img
        .pixels
        .iter()
        .map(|&v| Poisson::new(scale * v + background).expect("positive rate").sample(rng))
        .collect();
    Image {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Scales the signal so that `(peak + b) / b` equals the target SBR, then
/// draws Poisson counts around `signal + b`. Returns the counts and the SBR
/// that was applied.
pub fn add_noise_with_sbr(
    image: &Image,
    config: &MicroscopeConfig,
    target: SbrTarget,
    seed_value: u64,
) -> Result<(Image, f64), MicroscopeError> {
    check_intensities(image)?;
    let mut rng = seed::rng(seed_value);
    let sbr = resolve_target(target, config, &mut rng)?;
    let peak = image.max();
    if peak <= 0.0 {
        return Err(MicroscopeError::ZeroSignal);
    }
    let scale = config.background * (sbr - 1.0) / peak;
    Ok((poisson_counts(image, scale, config.background, &mut rng), sbr))
}

pub fn add_noise(
    image: &Image,
    config: &MicroscopeConfig,
    target: SbrTarget,
    seed_value: u64,
) -> Result<Image, MicroscopeError> {
    Ok(add_noise_with_sbr(image, config, target, seed_value)?.0)
}

/// Noise for a whole stack: one SBR scale from the stack-wide peak, so the
/// relative brightness of slices is kept.
pub fn add_noise_stack(
    stack: &ImageStack,
    config: &MicroscopeConfig,
    target: SbrTarget,
    seed_value: u64,
) -> Result<ImageStack, MicroscopeError> {
    for s in &stack.slices {
        check_intensities(s)?;
    }
    let mut rng = seed::rng(seed_value);
    let sbr = resolve_target(target, config, &mut rng)?;
    let peak = stack.max();
    if peak <= 0.0 {
        return Err(MicroscopeError::ZeroSignal);
    }
    let scale = config.background * (sbr - 1.0) / peak;
    let slices = stack
        .slices
        .iter()
        .map(|s| poisson_counts(s, scale, config.background, &mut rng))
        .collect();
    Ok(ImageStack {
        slices,
        noisy: true,
        seed: Some(seed_value),
        ..stack.clone()
    })
}

/// Poisson background alone, for frames with no emitters.
pub fn background_counts(width: usize, height: usize, config: &MicroscopeConfig, seed_value: u64) -> Image {
    let mut rng = seed::rng(seed_value);
    poisson_counts(&Image::zeros(width, height), 0.0, config.background, &mut rng)
}

pub fn in_dof(config: &MicroscopeConfig, z: f64, z_focal: f64) -> bool {
    (z - z_focal).abs() <= config.dof_nm / 2.0
}

/// Emitters with `|z - z_focal| <= dof / 2`.
pub fn dof_mask(emitters: &EmitterSet, config: &MicroscopeConfig, z_focal: f64) -> EmitterSet {
    emitters.with_positions(
        emitters
            .positions
            .iter()
            .filter(|p| in_dof(config, p.z, z_focal))
            .copied()
            .collect(),
    )
}

/// Pixels whose centers lie within `dilation_radius_nm` of the lateral
/// projection of an in-DOF emitter.
pub fn ground_truth_mask(
    emitters: &EmitterSet,
    config: &MicroscopeConfig,
    fov: &FieldOfView,
    z_focal: f64,
    dilation_radius_nm: f64,
) -> Mask {
    let mut mask = Mask::zeros(fov.width, fov.height);
    let px = config.pixel_size_nm;
    let [ox, oy] = fov.origin(px);
    let r = dilation_radius_nm.max(0.0);
    let r2 = r * r;
    let span = |c: f64, o: f64, n: usize| {
        let lo = ((c - r - o) / px - 0.5).floor().max(0.0) as usize;
        let hi = (((c + r - o) / px - 0.5).ceil() + 1.0).clamp(0.0, n as f64) as usize;
        lo..hi
    };
    for p in dof_mask(emitters, config, z_focal).positions.iter() {
        for y in span(p.y, oy, fov.height) {
            let cy = oy + (y as f64 + 0.5) * px - p.y;
            for x in span(p.x, ox, fov.width) {
                let cx = ox + (x as f64 + 0.5) * px - p.x;
                if cx * cx + cy * cy <= r2 {
                    mask.set(x, y, true);
                }
            }
        }
    }
    mask
}

/// Emitter set translated so its centroid sits at `center`.
pub fn place_emitters(emitters: &EmitterSet, center: Point3) -> EmitterSet {
    match emitters.centroid() {
        Some(c) => emitters.translated(center - c),
        None => emitters.clone(),
    }
}

#[cfg(test)]
mod tests;
