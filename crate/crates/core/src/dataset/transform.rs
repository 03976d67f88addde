use super::manifest::{DatasetKind, FileRecord, GenerationManifest, ItemRecord, ShapeRecord};
use super::{
    check_perspectives, check_positive, check_sbr, prepare_output, run_parallel, CorpusShape, DatasetError,
    MicroscopeSpec, ShapeSource,
};
use crate::implicit::{extract_mesh, MlpOccupancy};
use crate::mesh::{normalize_unit_cube, rotate_about_centroid, sample_surface, NormalizationRecord, TriangleMesh, DEFAULT_EMITTER_DENSITY};
use crate::microscope::{
    add_noise_stack, render_zstack, write_stack, FieldOfView, ImageStack, MicroscopeConfig, SbrTarget, StackPlan,
    DEFAULT_PHOTONS_PER_EMITTER,
};
use crate::seed::{derive_seed, stream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

/// A shape in normalized unit-cube coordinates.
#[derive(Debug, Clone)]
pub enum ShapeInput {
    Mesh(TriangleMesh),
    /// Meshed by marching cubes at `resolution` and `threshold` first.
    Model {
        model: MlpOccupancy,
        resolution: usize,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformOptions {
    pub emitter_density: f64,
    pub photons_per_emitter: f64,
    pub sbr: SbrTarget,
    /// Side of the square field of view; sized to the shape plus a PSF
    /// margin when absent.
    pub fov_nm: Option<f64>,
    pub noise: bool,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            emitter_density: DEFAULT_EMITTER_DENSITY,
            photons_per_emitter: DEFAULT_PHOTONS_PER_EMITTER,
            sbr: SbrTarget::Sample,
            fov_nm: None,
            noise: true,
        }
    }
}

impl TransformOptions {
    pub fn validate(&self) -> Result<(), DatasetError> {
        check_positive("emitter_density", self.emitter_density)?;
        check_positive("photons_per_emitter", self.photons_per_emitter)?;
        check_sbr(&self.sbr)?;
        if let Some(f) = self.fov_nm {
            check_positive("fov_nm", f)?;
        }
        Ok(())
    }
}

/// Rescales the shape to nanometers, samples emitters once, and renders the
/// same emitters as a default z-stack under both microscopes. Both stacks
/// share the noise seed.
pub fn microscope_transform(
    shape: &ShapeInput,
    source_scale: &NormalizationRecord,
    from: &MicroscopeConfig,
    to: &MicroscopeConfig,
    perspective: [f64; 3],
    seed_value: u64,
    options: &TransformOptions,
) -> Result<(ImageStack, ImageStack), DatasetError> {
    options.validate()?;
    from.validate()?;
    to.validate()?;
    let normalized = match shape {
        ShapeInput::Mesh(m) => m.clone(),
        ShapeInput::Model { model, resolution, threshold } => extract_mesh(model, *resolution, *threshold)?,
    };
    let physical = source_scale.denormalize_mesh(&normalized);
    let emitters = sample_surface(&physical, options.emitter_density, derive_seed(seed_value, stream::EMITTERS, 0))?;
    let rotated = emitters.with_positions(rotate_about_centroid(
        &emitters.positions,
        perspective[0],
        perspective[1],
        perspective[2],
    ));
    let set = match rotated.centroid() {
        Some(c) => rotated.translated(-c.coords),
        None => rotated,
    };
    let fov_nm = options.fov_nm.unwrap_or_else(|| {
        let reach = set.positions.iter().map(|p| p.x.abs().max(p.y.abs())).fold(0.0, f64::max);
        let sigma = from.psf_sigma().0.max(to.psf_sigma().0);
        2.0 * (reach + 4.0 * sigma)
    });
    let noise_seed = derive_seed(seed_value, stream::NOISE, 0);
    let render = |cfg: &MicroscopeConfig| -> Result<ImageStack, DatasetError> {
        let n = (fov_nm / cfg.pixel_size_nm).ceil().max(1.0) as usize;
        let fov = FieldOfView::new(n, n, [0.0, 0.0]);
        let clean = render_zstack(&set, cfg, &StackPlan::default_for(cfg), &fov, options.photons_per_emitter)?;
        Ok(if options.noise {
            add_noise_stack(&clean, cfg, options.sbr, noise_seed)?
        } else {
            clean
        })
    };
    Ok((render(from)?, render(to)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct M2mConfig {
    pub from: MicroscopeSpec,
    pub to: MicroscopeSpec,
    pub shapes: ShapeSource,
    pub perspectives: Vec<[f64; 3]>,
    pub options: TransformOptions,
}

impl Default for M2mConfig {
    fn default() -> Self {
        Self {
            from: MicroscopeSpec::Preset("Epi1".into()),
            to: MicroscopeSpec::Preset("Con1".into()),
            shapes: ShapeSource::default(),
            perspectives: vec![[0.0, 0.0, 0.0]],
            options: TransformOptions::default(),
        }
    }
}

impl M2mConfig {
    pub fn validate(&self) -> Result<(MicroscopeConfig, MicroscopeConfig), DatasetError> {
        let from = self.from.resolve()?;
        let to = self.to.resolve()?;
        self.shapes.validate()?;
        check_perspectives(&self.perspectives)?;
        self.options.validate()?;
        Ok((from, to))
    }
}

/// Paired stacks under two microscopes for every (shape, perspective).
pub fn gen_m2m_dataset(
    corpus: &[CorpusShape],
    config: &M2mConfig,
    master_seed: u64,
    out: &Path,
    jobs: usize,
) -> Result<GenerationManifest, DatasetError> {
    let (from, to) = config.validate()?;
    if corpus.is_empty() {
        return Err(DatasetError::InvalidConfig("shape corpus is empty".into()));
    }
    prepare_output(out, &["pairs"])?;
    let per_shape = run_parallel(jobs, corpus.iter().collect(), |shape| {
        let (normalized, record) = normalize_unit_cube(&shape.mesh).map_err(|e| DatasetError::Shape(shape.id, e))?;
        let input = ShapeInput::Mesh(normalized);
        let mut items = Vec::new();
        let mut files = Vec::new();
        for (k, &persp) in config.perspectives.iter().enumerate() {
            let index = shape.id as u64 * config.perspectives.len() as u64 + k as u64;
            let item_seed = derive_seed(master_seed, stream::ITEM, index);
            let (a, b) = microscope_transform(&input, &record, &from, &to, persp, item_seed, &config.options)?;
            let mut item_files = Vec::new();
            for (stack, side) in [(&a, "from"), (&b, "to")] {
                let stem = format!("shape_{:04}_p{k}_{side}", shape.id);
                for p in write_stack(stack, &out.join("pairs"), &stem)? {
                    let rel = format!("pairs/{}", p.file_name().unwrap().to_string_lossy());
                    files.push(FileRecord::of(out, &rel)?);
                    item_files.push(rel);
                }
            }
            items.push(ItemRecord {
                index,
                seed: item_seed,
                shape_ids: vec![shape.id],
                rotations: vec![persp],
                files: item_files,
                split: None,
                details: json!({"from": from.name, "to": to.name, "from_pixels": a.width, "to_pixels": b.width}),
            });
        }
        let rec = ShapeRecord {
            id: shape.id,
            provenance: shape.provenance.clone(),
            normalization: Some(record),
            occupancy_file: None,
        };
        Ok((rec, items, files))
    })?;
    let mut manifest = GenerationManifest::new(DatasetKind::M2m, master_seed, from, serde_json::to_value(config)?);
    manifest.target_microscope = Some(to);
    for (rec, items, files) in per_shape {
        manifest.shapes.push(rec);
        manifest.items.extend(items);
        manifest.files.extend(files);
    }
    manifest.write(out)?;
    Ok(manifest)
}
