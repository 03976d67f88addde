use super::write_json;
use crate::config::{resolve, Overrides};
use crate::failure::{CliResult, Failure};
use crate::{print_json, require_file, Ctx, OutArg};
use clap::{Args, Subcommand};
use mitoforge::dataset::{
    gen_m2m_dataset, gen_segmentation_dataset, gen_stack2shape_dataset, load_corpus, read_manifest, split,
    verify_manifest, GenerationManifest, M2mConfig, SegConfig, ShapeSource, SplitSpec, Stack2ShapeConfig,
};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Args, Debug)]
pub struct GenArgs {
    /// JSON dataset config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; every item seed derives from it.
    #[arg(long)]
    pub seed: u64,
    /// Number of synthetic shapes in the corpus.
    #[arg(long)]
    pub shapes: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Subcommand, Debug)]
pub enum DatasetCmd {
    /// 2D segmentation montages with ground-truth masks.
    Seg {
        #[command(flatten)]
        args: GenArgs,
        /// Number of montages.
        #[arg(long)]
        count: Option<usize>,
        /// Preset name.
        #[arg(long)]
        microscope: Option<String>,
    },
    /// Noisy z-stacks from several perspectives plus occupancy samples.
    Stack2shape {
        #[command(flatten)]
        args: GenArgs,
        #[arg(long)]
        microscope: Option<String>,
    },
    /// The same shapes rendered under two microscopes.
    M2m {
        #[command(flatten)]
        args: GenArgs,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
    /// Shape-level train/val/test assignment of a generated dataset.
    Split {
        dataset: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.7)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        val: f64,
        #[arg(long, default_value_t = 0.2)]
        test: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Re-hash every file listed in a manifest.
    Verify { dataset: PathBuf },
}

fn shape_override(o: &mut Overrides, shapes: Option<usize>) {
    o.set("shapes", shapes.map(|count| ShapeSource::Synthetic { count }));
}

/// Shape files in a config resolve against the config's directory.
fn base_dir(config: Option<&Path>) -> Option<PathBuf> {
    config.and_then(|p| p.parent()).map(Path::to_path_buf)
}

fn check_inputs(shapes: &ShapeSource, base: Option<&Path>, out: &Path) -> CliResult<()> {
    if let ShapeSource::Files(files) = shapes {
        for f in files {
            let p = match base {
                Some(b) if f.is_relative() => b.join(f),
                _ => f.clone(),
            };
            require_file(&p)?;
        }
    }
    if out.exists() && std::fs::read_dir(out)?.next().is_some() {
        return Err(Failure::config(format!("output directory {} is not empty", out.display())));
    }
    Ok(())
}

fn summary(m: &GenerationManifest, out: &Path) {
    print_json(&json!({
        "kind": m.kind,
        "items": m.items.len(),
        "shapes": m.shapes.len(),
        "files": m.files.len(),
        "master_seed": m.master_seed,
        "out": out,
    }));
}

pub fn run(ctx: &Ctx, cmd: DatasetCmd) -> CliResult<()> {
    match cmd {
        DatasetCmd::Seg { args, count, microscope } => {
            let mut o = Overrides::default();
            o.set("count", count).set("microscope", microscope);
            shape_override(&mut o, args.shapes);
            let cfg: SegConfig = resolve(args.config.as_deref(), &o)?;
            let mc = cfg.validate()?;
            let base = base_dir(args.config.as_deref());
            ctx.resolved(
                "dataset seg",
                json!({"dataset": cfg, "microscope": mc, "master_seed": args.seed, "out": args.out.out}),
            );
            check_inputs(&cfg.shapes, base.as_deref(), &args.out.out)?;
            if ctx.dry_run {
                return Ok(());
            }
            let corpus = load_corpus(&cfg.shapes, args.seed, base.as_deref(), ctx.jobs)?;
            let m = gen_segmentation_dataset(&corpus, &cfg, args.seed, &args.out.out, ctx.jobs)?;
            summary(&m, &args.out.out);
        }
        DatasetCmd::Stack2shape { args, microscope } => {
            let mut o = Overrides::default();
            o.set("microscope", microscope);
            shape_override(&mut o, args.shapes);
            let cfg: Stack2ShapeConfig = resolve(args.config.as_deref(), &o)?;
            let (mc, plan) = cfg.validate()?;
            let base = base_dir(args.config.as_deref());
            ctx.resolved(
                "dataset stack2shape",
                json!({"dataset": cfg, "microscope": mc, "stack": plan, "master_seed": args.seed, "out": args.out.out}),
            );
            check_inputs(&cfg.shapes, base.as_deref(), &args.out.out)?;
            if ctx.dry_run {
                return Ok(());
            }
            let corpus = load_corpus(&cfg.shapes, args.seed, base.as_deref(), ctx.jobs)?;
            let m = gen_stack2shape_dataset(&corpus, &cfg, args.seed, &args.out.out, ctx.jobs)?;
            summary(&m, &args.out.out);
        }
        DatasetCmd::M2m { args, from, to } => {
            let mut o = Overrides::default();
            o.set("from", from).set("to", to);
            shape_override(&mut o, args.shapes);
            let cfg: M2mConfig = resolve(args.config.as_deref(), &o)?;
            let (f, t) = cfg.validate()?;
            let base = base_dir(args.config.as_deref());
            ctx.resolved(
                "dataset m2m",
                json!({"dataset": cfg, "from": f, "to": t, "master_seed": args.seed, "out": args.out.out}),
            );
            check_inputs(&cfg.shapes, base.as_deref(), &args.out.out)?;
            if ctx.dry_run {
                return Ok(());
            }
            let corpus = load_corpus(&cfg.shapes, args.seed, base.as_deref(), ctx.jobs)?;
            let m = gen_m2m_dataset(&corpus, &cfg, args.seed, &args.out.out, ctx.jobs)?;
            summary(&m, &args.out.out);
        }
        DatasetCmd::Split {
            dataset,
            seed,
            train,
            val,
            test,
            out,
        } => {
            let spec = SplitSpec {
                fractions: [train, val, test],
                seed,
            };
            spec.validate()?;
            ctx.resolved("dataset split", json!({"dataset": dataset, "split": spec, "out": out.out}));
            let manifest = read_manifest(&dataset)?;
            let parted = split(&manifest, &spec)?;
            if ctx.dry_run {
                return Ok(());
            }
            ctx.prepare_out(&out.out)?;
            write_json(&out.out.join("split.json"), &parted)?;
            let s = parted.split.as_ref().expect("split sets the assignment");
            print_json(&json!({"unit": s.unit, "train": s.train.len(), "val": s.val.len(), "test": s.test.len(), "seed": seed}));
        }
        DatasetCmd::Verify { dataset } => {
            ctx.resolved("dataset verify", json!({"dataset": dataset}));
            let m = verify_manifest(&dataset)?;
            print_json(&json!({"verified": true, "files": m.files.len(), "items": m.items.len()}));
        }
    }
    Ok(())
}
