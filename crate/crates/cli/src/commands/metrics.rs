use super::json_file;
use super::mesh::load_mesh;
use crate::failure::CliResult;
use crate::{print_json, require_file, Ctx};
use clap::Subcommand;
use mitoforge::metrics::{chamfer_l1, compare_meshes, mask_scores, volumetric_iou, DEFAULT_CHAMFER_POINTS, DEFAULT_IOU_SAMPLES};
use mitoforge::microscope::read_pgm8;
use mitoforge::NormalizationRecord;
use serde_json::json;
use std::path::PathBuf;

#[derive(Subcommand, Debug)]
pub enum MetricsCmd {
    /// Monte Carlo volumetric IoU of two closed meshes.
    Iou {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_IOU_SAMPLES)]
        samples: usize,
    },
    /// Symmetric Chamfer-L1 between two surfaces.
    Chamfer {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CHAMFER_POINTS)]
        points: usize,
    },
    /// IoU and Chamfer-L1 together.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_IOU_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_CHAMFER_POINTS)]
        points: usize,
        /// Normalization record for reporting Chamfer in nanometers.
        #[arg(long)]
        normalization: Option<PathBuf>,
    },
    /// Dice, IoU and F1 of two 8-bit PGM masks.
    Masks {
        pred: PathBuf,
        gt: PathBuf,
        /// Score the foreground class alone instead of the two-class mean.
        #[arg(long)]
        foreground_only: bool,
    },
}

pub fn run(ctx: &Ctx, cmd: MetricsCmd) -> CliResult<()> {
    match cmd {
        MetricsCmd::Iou { a, b, seed, samples } => {
            ctx.resolved("metrics iou", json!({"a": a, "b": b, "seed": seed, "samples": samples}));
            let (ma, mb) = (load_mesh(&a)?, load_mesh(&b)?);
            if ctx.dry_run {
                return Ok(());
            }
            let v = volumetric_iou(&ma, &mb, samples, seed)?;
            print_json(&json!({"metric": "iou", "value": v, "samples": samples, "seed": seed}));
        }
        MetricsCmd::Chamfer { a, b, seed, points } => {
            ctx.resolved("metrics chamfer", json!({"a": a, "b": b, "seed": seed, "points": points}));
            let (ma, mb) = (load_mesh(&a)?, load_mesh(&b)?);
            if ctx.dry_run {
                return Ok(());
            }
            let v = chamfer_l1(&ma, &mb, points, seed)?;
            print_json(&json!({"metric": "chamfer_l1", "value": v, "points": points, "seed": seed}));
        }
        MetricsCmd::Compare {
            a,
            b,
            seed,
            samples,
            points,
            normalization,
        } => {
            ctx.resolved(
                "metrics compare",
                json!({"a": a, "b": b, "seed": seed, "samples": samples, "points": points, "normalization": normalization}),
            );
            let (ma, mb) = (load_mesh(&a)?, load_mesh(&b)?);
            let record: Option<NormalizationRecord> = normalization.as_deref().map(json_file).transpose()?;
            if ctx.dry_run {
                return Ok(());
            }
            let c = compare_meshes(&ma, &mb, samples, points, seed, record.as_ref())?;
            print_json(&serde_json::to_value(c).expect("serializable"));
        }
        MetricsCmd::Masks { pred, gt, foreground_only } => {
            ctx.resolved("metrics masks", json!({"pred": pred, "gt": gt, "foreground_only": foreground_only}));
            require_file(&pred)?;
            require_file(&gt)?;
            if ctx.dry_run {
                return Ok(());
            }
            let s = mask_scores(&read_pgm8(&pred)?, &read_pgm8(&gt)?, foreground_only)?;
            print_json(&serde_json::to_value(s).expect("serializable"));
        }
    }
    Ok(())
}
