use super::manifest::{DatasetKind, FileRecord, GenerationManifest, ItemRecord, ShapeRecord};
use super::{check_positive, check_sbr, prepare_output, run_parallel, CorpusShape, DatasetError, MicroscopeSpec, ShapeSource};
use crate::geometry::{Point3, Vector3};
use crate::mesh::{rotate_about_centroid, sample_surface, DEFAULT_EMITTER_DENSITY};
use crate::microscope::{
    add_noise_with_sbr, background_counts, dof_mask, ground_truth_mask, render_slice, write_mask_pgm, write_pgm16,
    FieldOfView, Image, Mask, MicroscopeConfig, SbrTarget, DEFAULT_PHOTONS_PER_EMITTER,
};
use crate::seed::{self, derive_seed, stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::TAU;
use std::path::Path;

const MAX_ITEMS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegConfig {
    pub microscope: MicroscopeSpec,
    pub shapes: ShapeSource,
    pub count: usize,
    pub tile_size: usize,
    pub tiles_per_side: usize,
    pub shapes_per_tile: usize,
    pub emitter_density: f64,
    pub photons_per_emitter: f64,
    pub sbr: SbrTarget,
    /// Ground-truth dilation; the lateral resolution when absent.
    pub dilation_radius_nm: Option<f64>,
    pub placement_attempts: usize,
    /// Shape centroids are placed uniformly within this distance of the
    /// focal plane.
    pub z_jitter_nm: f64,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            microscope: MicroscopeSpec::Preset("Epi2".into()),
            shapes: ShapeSource::default(),
            count: 1,
            tile_size: 128,
            tiles_per_side: 2,
            shapes_per_tile: 2,
            emitter_density: DEFAULT_EMITTER_DENSITY,
            photons_per_emitter: DEFAULT_PHOTONS_PER_EMITTER,
            sbr: SbrTarget::Sample,
            dilation_radius_nm: None,
            placement_attempts: 100,
            z_jitter_nm: 100.0,
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<MicroscopeConfig, DatasetError> {
        let mc = self.microscope.resolve()?;
        self.shapes.validate()?;
        let bad = |m: &str| Err(DatasetError::InvalidConfig(m.to_string()));
        if self.count == 0 || self.count > MAX_ITEMS {
            return bad("count must lie in 1..=1000000");
        }
        if self.tile_size < 8 || self.tiles_per_side == 0 || self.shapes_per_tile == 0 {
            return bad("tile_size must be >= 8; tiles_per_side and shapes_per_tile >= 1");
        }
        if self.placement_attempts == 0 {
            return bad("placement_attempts must be >= 1");
        }
        check_positive("emitter_density", self.emitter_density)?;
        check_positive("photons_per_emitter", self.photons_per_emitter)?;
        check_sbr(&self.sbr)?;
        if let Some(r) = self.dilation_radius_nm {
            if !(r.is_finite() && r >= 0.0) {
                return bad("dilation_radius_nm must be >= 0");
            }
        }
        if !(self.z_jitter_nm.is_finite() && self.z_jitter_nm >= 0.0) {
            return bad("z_jitter_nm must be >= 0");
        }
        Ok(mc)
    }

    pub fn montage_size(&self) -> usize {
        self.tile_size * self.tiles_per_side
    }
}

#[derive(Debug, Serialize)]
struct PlacementLog {
    shape_id: u32,
    rotation: [f64; 3],
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    center_nm: Option<[f64; 3]>,
    emitters: usize,
    in_dof_emitters: usize,
}

struct Tile {
    image: Image,
    mask: Mask,
    log: Vec<PlacementLog>,
    sbr: Option<f64>,
}

fn gen_tile(
    corpus: &[CorpusShape],
    cfg: &SegConfig,
    mc: &MicroscopeConfig,
    tile_seed: u64,
) -> Result<Tile, DatasetError> {
    let mut rng = seed::rng(derive_seed(tile_seed, stream::PLACEMENT, 0));
    let px = mc.pixel_size_nm;
    let half = cfg.tile_size as f64 * px / 2.0;
    let radius = cfg.dilation_radius_nm.unwrap_or_else(|| mc.lateral_resolution());
    let fov = FieldOfView::new(cfg.tile_size, cfg.tile_size, [0.0, 0.0]);
    let mut placed: Vec<Point3> = Vec::new();
    let mut log = Vec::new();
    for k in 0..cfg.shapes_per_tile {
        let shape = &corpus[rng.random_range(0..corpus.len())];
        let rotation = [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)];
        let z0 = if cfg.z_jitter_nm > 0.0 {
            rng.random_range(-cfg.z_jitter_nm..=cfg.z_jitter_nm)
        } else {
            0.0
        };
        let emitters = sample_surface(&shape.mesh, cfg.emitter_density, derive_seed(tile_seed, stream::EMITTERS, k as u64))
            .map_err(|e| DatasetError::Shape(shape.id, e))?;
        let mut entry = PlacementLog {
            shape_id: shape.id,
            rotation,
            status: String::new(),
            center_nm: None,
            emitters: emitters.len(),
            in_dof_emitters: 0,
        };
        let rotated = rotate_about_centroid(&emitters.positions, rotation[0], rotation[1], rotation[2]);
        let Some(c) = emitters.with_positions(rotated.clone()).centroid() else {
            entry.status = "skipped: no emitters".into();
            log::warn!("tile seed {tile_seed}: shape {} has no emitters, skipped", shape.id);
            log.push(entry);
            continue;
        };
        let centered: Vec<Point3> = rotated.iter().map(|p| p - c.coords + Vector3::new(0.0, 0.0, z0)).collect();
        let set = emitters.with_positions(centered);
        let in_dof = dof_mask(&set, mc, 0.0);
        entry.in_dof_emitters = in_dof.len();
        if in_dof.is_empty() {
            entry.status = "skipped: no emitters in the depth of field".into();
            log::warn!("tile seed {tile_seed}: shape {} has no in-focus emitters, skipped", shape.id);
            log.push(entry);
            continue;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &in_dof.positions {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a] - radius);
                hi[a] = hi[a].max(p[a] + radius);
            }
        }
        if (0..2).any(|a| hi[a] - lo[a] > 2.0 * half) {
            entry.status = "skipped: too large for tile".into();
            log::warn!("tile seed {tile_seed}: shape {} does not fit a {} px tile, skipped", shape.id, cfg.tile_size);
            log.push(entry);
            continue;
        }
        let mut offset = None;
        for _ in 0..cfg.placement_attempts {
            let o = [rng.random_range(-half..half), rng.random_range(-half..half)];
            if (0..2).all(|a| lo[a] + o[a] >= -half && hi[a] + o[a] <= half) {
                offset = Some(o);
                break;
            }
        }
        let Some(o) = offset else {
            entry.status = "skipped: placement attempts exhausted".into();
            log::warn!("tile seed {tile_seed}: shape {} could not be placed, skipped", shape.id);
            log.push(entry);
            continue;
        };
        placed.extend(set.positions.iter().map(|p| p + Vector3::new(o[0], o[1], 0.0)));
        entry.status = "placed".into();
        entry.center_nm = Some([o[0], o[1], z0]);
        log.push(entry);
    }
    let all = crate::mesh::EmitterSet {
        positions: placed,
        density: cfg.emitter_density,
        seed: tile_seed,
    };
    let clean = render_slice(&all, mc, &fov, 0.0, cfg.photons_per_emitter);
    let mask = ground_truth_mask(&all, mc, &fov, 0.0, radius);
    let noise_seed = derive_seed(tile_seed, stream::NOISE, 0);
    let (image, sbr) = if clean.max() > 0.0 {
        let (img, s) = add_noise_with_sbr(&clean, mc, cfg.sbr, noise_seed)?;
        (img, Some(s))
    } else {
        (background_counts(cfg.tile_size, cfg.tile_size, mc, noise_seed), None)
    };
    Ok(Tile { image, mask, log, sbr })
}

fn gen_item(
    corpus: &[CorpusShape],
    cfg: &SegConfig,
    mc: &MicroscopeConfig,
    master_seed: u64,
    index: u64,
    out: &Path,
) -> Result<(ItemRecord, Vec<FileRecord>), DatasetError> {
    let item_seed = derive_seed(master_seed, stream::ITEM, index);
    let n = cfg.montage_size();
    let mut image = Image::zeros(n, n);
    let mut mask = Mask::zeros(n, n);
    let mut tiles = Vec::new();
    let mut shape_ids = Vec::new();
    let mut rotations = Vec::new();
    for t in 0..cfg.tiles_per_side * cfg.tiles_per_side {
        let tile = gen_tile(corpus, cfg, mc, derive_seed(item_seed, stream::ITEM, t as u64))?;
        let (x0, y0) = ((t % cfg.tiles_per_side) * cfg.tile_size, (t / cfg.tiles_per_side) * cfg.tile_size);
        image.blit(&tile.image, x0, y0);
        mask.blit(&tile.mask, x0, y0);
        for p in &tile.log {
            if p.status == "placed" {
                shape_ids.push(p.shape_id);
                rotations.push(p.rotation);
            }
        }
        tiles.push(json!({"tile": t, "sbr": tile.sbr, "mask_pixels": tile.mask.count(), "placements": tile.log}));
    }
    let img_rel = format!("images/seg_{index:06}.pgm");
    let mask_rel = format!("masks/seg_{index:06}.pgm");
    write_pgm16(&image, &out.join(&img_rel))?;
    write_mask_pgm(&mask, &out.join(&mask_rel))?;
    let files = vec![FileRecord::of(out, &img_rel)?, FileRecord::of(out, &mask_rel)?];
    Ok((
        ItemRecord {
            index,
            seed: item_seed,
            shape_ids,
            rotations,
            files: vec![img_rel, mask_rel],
            split: None,
            details: json!({ "tiles": tiles }),
        },
        files,
    ))
}

/// Writes `images/` and `masks/` montages plus `manifest.json` under `out`.
pub fn gen_segmentation_dataset(
    corpus: &[CorpusShape],
    config: &SegConfig,
    master_seed: u64,
    out: &Path,
    jobs: usize,
) -> Result<GenerationManifest, DatasetError> {
    let mc = config.validate()?;
    if corpus.is_empty() {
        return Err(DatasetError::InvalidConfig("shape corpus is empty".into()));
    }
    prepare_output(out, &["images", "masks"])?;
    let results = run_parallel(jobs, (0..config.count as u64).collect(), |&i| {
        gen_item(corpus, config, &mc, master_seed, i, out)
    })?;
    let mut manifest = GenerationManifest::new(DatasetKind::Segmentation, master_seed, mc, serde_json::to_value(config)?);
    manifest.shapes = corpus
        .iter()
        .map(|s| ShapeRecord {
            id: s.id,
            provenance: s.provenance.clone(),
            normalization: None,
            occupancy_file: None,
        })
        .collect();
    for (item, files) in results {
        manifest.items.push(item);
        manifest.files.extend(files);
    }
    manifest.write(out)?;
    log::info!("segmentation dataset: {} items in {}", config.count, out.display());
    Ok(manifest)
}
