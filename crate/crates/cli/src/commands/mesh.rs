use super::volume::connectivity;
use super::{write_json, VolumeInput};
use crate::failure::{CliResult, Failure};
use crate::{print_json, require_file, Ctx, OutArg};
use clap::Subcommand;
use mitoforge::mesh::io::{read_mesh, write_mesh};
use mitoforge::mesh::{make_watertight, marching_cubes, mesh_volume, normalize_unit_cube, surface_area};
use mitoforge::volume::{connected_components, downsample, extract_instance, filter_small_components, DEFAULT_MIN_VOXELS};
use mitoforge::TriangleMesh;
use rayon::prelude::*;
use serde_json::json;
use std::path::PathBuf;

#[derive(Subcommand, Debug)]
pub enum MeshCmd {
    /// One watertight mesh per component of a binary volume.
    Build {
        #[command(flatten)]
        input: VolumeInput,
        /// Downsample by this factor first.
        #[arg(long)]
        downsample: Option<usize>,
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
        #[arg(long, default_value_t = DEFAULT_MIN_VOXELS)]
        min_voxels: u64,
        #[arg(long, default_value_t = 0.5)]
        iso: f64,
        /// Keep only the largest N components.
        #[arg(long)]
        max_instances: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Size, area, volume and watertightness.
    Info { mesh: PathBuf },
    /// Center and scale into the unit cube; writes the mesh and its record.
    Normalize {
        mesh: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

pub fn load_mesh(path: &std::path::Path) -> CliResult<TriangleMesh> {
    require_file(path)?;
    Ok(read_mesh(path)?)
}

fn describe(m: &TriangleMesh) -> serde_json::Value {
    let audit = m.edge_audit();
    let bb = m.bounding_box();
    json!({
        "vertices": m.vertices.len(),
        "triangles": m.triangles.len(),
        "area_um2": surface_area(m),
        "volume_um3": mesh_volume(m).ok(),
        "watertight": audit.is_watertight(),
        "boundary_edges": audit.boundary_edges,
        "nonmanifold_edges": audit.nonmanifold_edges,
        "bbox_min": bb.map(|b| [b.min.x, b.min.y, b.min.z]),
        "bbox_max": bb.map(|b| [b.max.x, b.max.y, b.max.z]),
    })
}

pub fn run(ctx: &Ctx, cmd: MeshCmd) -> CliResult<()> {
    match cmd {
        MeshCmd::Build {
            input,
            downsample: factor,
            connectivity: c,
            min_voxels,
            iso,
            max_instances,
            out,
        } => {
            let conn = connectivity(c)?;
            if factor == Some(0) {
                return Err(Failure::config("--downsample must be >= 1"));
            }
            if !(iso > 0.0 && iso < 1.0) {
                return Err(Failure::config("--iso must lie in (0, 1)"));
            }
            ctx.resolved(
                "mesh build",
                json!({"input": input.input, "downsample": factor, "connectivity": c,
                       "min_voxels": min_voxels, "iso": iso, "max_instances": max_instances, "out": out.out}),
            );
            input.check()?;
            if ctx.dry_run {
                return Ok(());
            }
            let mut vol = input.load()?;
            if let Some(f) = factor {
                vol = downsample(&vol, f)?;
            }
            let (labeled, instances) = connected_components(&vol, conn)?;
            let (labeled, mut instances) = filter_small_components(&labeled, &instances, min_voxels);
            if let Some(k) = max_instances {
                instances.truncate(k);
            }
            ctx.prepare_out(&out.out)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(ctx.jobs)
                .build()
                .map_err(|e| Failure::config(e.to_string()))?;
            let records = pool.install(|| {
                instances
                    .par_iter()
                    .map(|inst| -> CliResult<serde_json::Value> {
                        let mask = extract_instance(&labeled, inst.instance_id, 1)?;
                        let mesh = make_watertight(&marching_cubes(&mask, iso)?)?;
                        let name = format!("instance_{:04}.off", inst.instance_id);
                        write_mesh(&mesh, &out.out.join(&name))?;
                        let mut d = describe(&mesh);
                        d["instance_id"] = json!(inst.instance_id);
                        d["voxel_count"] = json!(inst.voxel_count);
                        d["file"] = json!(name);
                        Ok(d)
                    })
                    .collect::<CliResult<Vec<_>>>()
            })?;
            write_json(&out.out.join("meshes.json"), &records)?;
            print_json(&json!({"meshes": records.len(), "out": out.out}));
        }
        MeshCmd::Info { mesh } => {
            ctx.resolved("mesh info", json!({"mesh": mesh}));
            print_json(&describe(&load_mesh(&mesh)?));
        }
        MeshCmd::Normalize { mesh, out } => {
            ctx.resolved("mesh normalize", json!({"mesh": mesh, "out": out.out}));
            let m = load_mesh(&mesh)?;
            if ctx.dry_run {
                return Ok(());
            }
            let (n, record) = normalize_unit_cube(&m)?;
            ctx.prepare_out(&out.out)?;
            write_mesh(&n, &out.out.join("normalized.off"))?;
            write_json(&out.out.join("normalization.json"), &record)?;
            print_json(&json!({"scale": record.scale, "translation": record.translation}));
        }
    }
    Ok(())
}
