use super::{write_json, VolumeInput};
use crate::failure::{CliResult, Failure};
use crate::{print_json, Ctx, OutArg};
use clap::Subcommand;
use mitoforge::volume::{
    connected_components, downsample, extract_instance, filter_small_components, write_volume, Connectivity,
};
use mitoforge::VoxelVolume;
use serde_json::json;

#[derive(Subcommand, Debug)]
pub enum VolumeCmd {
    /// Geometry and foreground count.
    Info(VolumeInput),
    /// Majority-vote downsampling by an integer factor.
    Downsample {
        #[command(flatten)]
        input: VolumeInput,
        #[arg(long)]
        factor: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Connected components of a binary volume.
    Cc {
        #[command(flatten)]
        input: VolumeInput,
        /// 6, 18 or 26.
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
        /// Drop components smaller than this.
        #[arg(long, default_value_t = 0)]
        min_voxels: u64,
        /// Also write the label volume and instance table here.
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Crop one component as a padded binary mask.
    Extract {
        #[command(flatten)]
        input: VolumeInput,
        #[arg(long)]
        id: u32,
        #[arg(long, default_value_t = 1)]
        pad: usize,
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
        #[command(flatten)]
        out: OutArg,
    },
}

pub fn connectivity(c: u32) -> CliResult<Connectivity> {
    Connectivity::try_from(c).map_err(|e| Failure::config(e.to_string()))
}

fn geometry(v: &VoxelVolume) -> serde_json::Value {
    let o = v.origin();
    json!({
        "dims": v.dims(),
        "voxel_size_nm": v.voxel_size(),
        "origin_nm": [o.x, o.y, o.z],
        "foreground_voxels": v.foreground_count(),
        "binary": v.is_binary(),
    })
}

/// Binary volumes are labeled first; label volumes are used as they are.
pub fn labels(vol: &VoxelVolume, conn: Connectivity) -> CliResult<VoxelVolume> {
    if vol.is_binary() {
        Ok(connected_components(vol, conn)?.0)
    } else {
        Ok(vol.clone())
    }
}

pub fn run(ctx: &Ctx, cmd: VolumeCmd) -> CliResult<()> {
    match cmd {
        VolumeCmd::Info(input) => {
            ctx.resolved("volume info", json!({"input": input.input, "header": input.header_path()}));
            let v = input.load()?;
            print_json(&geometry(&v));
        }
        VolumeCmd::Downsample { input, factor, out } => {
            if factor == 0 {
                return Err(Failure::config("--factor must be >= 1"));
            }
            ctx.resolved("volume downsample", json!({"input": input.input, "factor": factor, "out": out.out}));
            input.check()?;
            if ctx.dry_run {
                return Ok(());
            }
            let v = downsample(&input.load()?, factor)?;
            ctx.prepare_out(&out.out)?;
            write_volume(&v, &out.out.join("downsampled.raw"), 8)?;
            print_json(&geometry(&v));
        }
        VolumeCmd::Cc {
            input,
            connectivity: c,
            min_voxels,
            out,
        } => {
            let conn = connectivity(c)?;
            ctx.resolved(
                "volume cc",
                json!({"input": input.input, "connectivity": c, "min_voxels": min_voxels, "out": out}),
            );
            input.check()?;
            if ctx.dry_run {
                return Ok(());
            }
            let v = input.load()?;
            let (labeled, instances) = connected_components(&v, conn)?;
            let (labeled, instances) = filter_small_components(&labeled, &instances, min_voxels);
            if let Some(dir) = &out {
                ctx.prepare_out(dir)?;
                write_volume(&labeled, &dir.join("labels.raw"), 32)?;
                write_json(&dir.join("instances.json"), &instances)?;
            }
            print_json(&json!({
                "components": instances.len(),
                "connectivity": c,
                "voxel_counts": instances.iter().map(|i| i.voxel_count).collect::<Vec<_>>(),
            }));
        }
        VolumeCmd::Extract {
            input,
            id,
            pad,
            connectivity: c,
            out,
        } => {
            let conn = connectivity(c)?;
            ctx.resolved(
                "volume extract",
                json!({"input": input.input, "id": id, "pad": pad, "connectivity": c, "out": out.out}),
            );
            input.check()?;
            if ctx.dry_run {
                return Ok(());
            }
            let mask = extract_instance(&labels(&input.load()?, conn)?, id, pad)?;
            ctx.prepare_out(&out.out)?;
            write_volume(&mask, &out.out.join(format!("instance_{id:04}.raw")), 8)?;
            print_json(&geometry(&mask));
        }
    }
    Ok(())
}
