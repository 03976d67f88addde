use super::manifest::{DatasetKind, FileRecord, GenerationManifest, ItemRecord, ShapeRecord};
use super::{
    check_perspectives, check_positive, check_sbr, prepare_output, run_parallel, CorpusShape, DatasetError,
    MicroscopeSpec, ShapeSource,
};
use crate::mesh::{normalize_unit_cube, rotate_about_centroid, sample_surface, EmitterSet, DEFAULT_EMITTER_DENSITY};
use crate::microscope::{
    add_noise_stack, render_zstack, write_stack, FieldOfView, ImageStack, MicroscopeConfig, MicroscopeError,
    SbrTarget, StackPlan, DEFAULT_PHOTONS_PER_EMITTER,
};
use crate::occupancy::{sample_occupancy, write_samples, DEFAULT_SAMPLE_COUNT};
use crate::seed::{derive_seed, stream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::Path;

/// Identity, a quarter turn about each axis, and two oblique views.
pub fn default_perspectives() -> Vec<[f64; 3]> {
    vec![
        [0.0, 0.0, 0.0],
        [FRAC_PI_2, 0.0, 0.0],
        [0.0, FRAC_PI_2, 0.0],
        [0.0, 0.0, FRAC_PI_2],
        [FRAC_PI_4, FRAC_PI_4, 0.0],
        [FRAC_PI_4, 0.0, FRAC_PI_4],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stack2ShapeConfig {
    pub microscope: MicroscopeSpec,
    pub shapes: ShapeSource,
    pub perspectives: Vec<[f64; 3]>,
    /// Focal offsets; half-DOF spacing at n = -1, 0, 1 when absent.
    pub stack: Option<StackPlan>,
    pub fov_pixels: usize,
    pub emitter_density: f64,
    pub photons_per_emitter: f64,
    pub sbr: SbrTarget,
    pub occupancy_samples: usize,
}

impl Default for Stack2ShapeConfig {
    fn default() -> Self {
        Self {
            microscope: MicroscopeSpec::Preset("Epi1".into()),
            shapes: ShapeSource::default(),
            perspectives: default_perspectives(),
            stack: None,
            fov_pixels: 64,
            emitter_density: DEFAULT_EMITTER_DENSITY,
            photons_per_emitter: DEFAULT_PHOTONS_PER_EMITTER,
            sbr: SbrTarget::Sample,
            occupancy_samples: DEFAULT_SAMPLE_COUNT,
        }
    }
}

impl Stack2ShapeConfig {
    pub fn validate(&self) -> Result<(MicroscopeConfig, StackPlan), DatasetError> {
        let mc = self.microscope.resolve()?;
        self.shapes.validate()?;
        check_perspectives(&self.perspectives)?;
        let plan = self.stack.clone().unwrap_or_else(|| StackPlan::default_for(&mc));
        plan.validate()?;
        if self.fov_pixels < 4 {
            return Err(DatasetError::InvalidConfig("fov_pixels must be >= 4".into()));
        }
        if self.occupancy_samples == 0 {
            return Err(DatasetError::InvalidConfig("occupancy_samples must be >= 1".into()));
        }
        check_positive("emitter_density", self.emitter_density)?;
        check_positive("photons_per_emitter", self.photons_per_emitter)?;
        check_sbr(&self.sbr)?;
        Ok((mc, plan))
    }
}

/// Noise-free stack of the emitters rotated about their centroid by
/// `(alpha, beta, gamma)`, with the centroid at the fov center and on the
/// `n = 0` focal plane.
pub fn render_perspective(
    emitters: &EmitterSet,
    config: &MicroscopeConfig,
    perspective: [f64; 3],
    plan: &StackPlan,
    fov_pixels: usize,
    photons_per_emitter: f64,
) -> Result<ImageStack, MicroscopeError> {
    let rotated = rotate_about_centroid(&emitters.positions, perspective[0], perspective[1], perspective[2]);
    let set = emitters.with_positions(rotated);
    let set = match set.centroid() {
        Some(c) => set.translated(-c.coords),
        None => set,
    };
    render_zstack(&set, config, plan, &FieldOfView::new(fov_pixels, fov_pixels, [0.0, 0.0]), photons_per_emitter)
}

struct ShapeOutput {
    shape: ShapeRecord,
    items: Vec<ItemRecord>,
    files: Vec<FileRecord>,
}

fn gen_shape(
    shape: &CorpusShape,
    cfg: &Stack2ShapeConfig,
    mc: &MicroscopeConfig,
    plan: &StackPlan,
    master_seed: u64,
    out: &Path,
) -> Result<ShapeOutput, DatasetError> {
    let shape_err = |e| DatasetError::Shape(shape.id, e);
    let (normalized, record) = normalize_unit_cube(&shape.mesh).map_err(shape_err)?;
    let occ = sample_occupancy(
        &normalized,
        cfg.occupancy_samples,
        derive_seed(master_seed, stream::OCCUPANCY, shape.id as u64),
        shape.provenance.clone(),
    )?;
    let occ_rel = format!("occupancy/shape_{:04}.mfoc", shape.id);
    write_samples(&occ, &out.join(&occ_rel))?;
    let mut files = vec![FileRecord::of(out, &occ_rel)?];
    let emitters = sample_surface(&shape.mesh, cfg.emitter_density, derive_seed(master_seed, stream::EMITTERS, shape.id as u64))
        .map_err(shape_err)?;
    let mut items = Vec::new();
    for (k, &persp) in cfg.perspectives.iter().enumerate() {
        let index = shape.id as u64 * cfg.perspectives.len() as u64 + k as u64;
        let item_seed = derive_seed(master_seed, stream::ITEM, index);
        let clean = render_perspective(&emitters, mc, persp, plan, cfg.fov_pixels, cfg.photons_per_emitter)?;
        let noisy = add_noise_stack(&clean, mc, cfg.sbr, derive_seed(item_seed, stream::NOISE, 0))?;
        let stem = format!("shape_{:04}_p{k}", shape.id);
        let written = write_stack(&noisy, &out.join("stacks"), &stem)?;
        let mut item_files = Vec::new();
        for p in written {
            let rel = format!("stacks/{}", p.file_name().unwrap().to_string_lossy());
            files.push(FileRecord::of(out, &rel)?);
            item_files.push(rel);
        }
        item_files.push(occ_rel.clone());
        items.push(ItemRecord {
            index,
            seed: item_seed,
            shape_ids: vec![shape.id],
            rotations: vec![persp],
            files: item_files,
            split: None,
            details: json!({
                "z_offsets_nm": noisy.z_offsets_nm,
                "emitters": emitters.len(),
                "occupancy_file": occ_rel,
            }),
        });
    }
    Ok(ShapeOutput {
        shape: ShapeRecord {
            id: shape.id,
            provenance: shape.provenance.clone(),
            normalization: Some(record),
            occupancy_file: Some(occ_rel),
        },
        items,
        files,
    })
}

/// Per shape: one occupancy sample file and a normalization record; per
/// (shape, perspective): one noisy z-stack.
pub fn gen_stack2shape_dataset(
    corpus: &[CorpusShape],
    config: &Stack2ShapeConfig,
    master_seed: u64,
    out: &Path,
    jobs: usize,
) -> Result<GenerationManifest, DatasetError> {
    let (mc, plan) = config.validate()?;
    if corpus.is_empty() {
        return Err(DatasetError::InvalidConfig("shape corpus is empty".into()));
    }
    prepare_output(out, &["stacks", "occupancy"])?;
    let outputs = run_parallel(jobs, corpus.iter().collect(), |s| gen_shape(s, config, &mc, &plan, master_seed, out))?;
    let mut manifest = GenerationManifest::new(DatasetKind::Stack2shape, master_seed, mc, serde_json::to_value(config)?);
    for o in outputs {
        manifest.shapes.push(o.shape);
        manifest.items.extend(o.items);
        manifest.files.extend(o.files);
    }
    manifest.write(out)?;
    log::info!("stack2shape dataset: {} stacks in {}", manifest.items.len(), out.display());
    Ok(manifest)
}
