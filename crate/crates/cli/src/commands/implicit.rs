use super::mesh::load_mesh;
use super::{json_file, parse_triple, write_json};
use crate::config::{resolve, Overrides};
use crate::failure::{CliResult, Failure};
use crate::{print_json, require_file, Ctx, OutArg};
use clap::Args;
use mitoforge::implicit::{extract_mesh, fit_with_history, loss, read_checkpoint, write_checkpoint, DEFAULT_THRESHOLD};
use mitoforge::mesh::io::write_mesh;
use mitoforge::mesh::normalize_unit_cube;
use mitoforge::occupancy::{read_samples, sample_occupancy, to_csv, write_samples, DEFAULT_SAMPLE_COUNT};
use mitoforge::{FitConfig, NormalizationRecord, Point3};
use serde_json::json;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Mesh in physical units; it is normalized into the unit cube first.
    pub mesh: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Also write the samples as CSV.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn sample(ctx: &Ctx, a: SampleArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(Failure::config("--n must be >= 1"));
    }
    ctx.resolved("sample", json!({"mesh": a.mesh, "n": a.n, "seed": a.seed, "csv": a.csv, "out": a.out.out}));
    let mesh = load_mesh(&a.mesh)?;
    if ctx.dry_run {
        return Ok(());
    }
    let (normalized, record) = normalize_unit_cube(&mesh)?;
    let set = sample_occupancy(&normalized, a.n, a.seed, a.mesh.display().to_string())?;
    ctx.prepare_out(&a.out.out)?;
    write_samples(&set, &a.out.out.join("samples.mfoc"))?;
    write_json(&a.out.out.join("normalization.json"), &record)?;
    write_mesh(&normalized, &a.out.out.join("normalized.off"))?;
    if a.csv {
        std::fs::write(a.out.out.join("samples.csv"), to_csv(&set))?;
    }
    print_json(&json!({"samples": set.len(), "inside_fraction": set.inside_fraction(), "seed": a.seed}));
    Ok(())
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Occupancy sample file.
    pub samples: PathBuf,
    /// JSON fit config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Initialization and shuffling seed.
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// relu or softplus.
    #[arg(long)]
    pub activation: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn fit(ctx: &Ctx, a: FitArgs) -> CliResult<()> {
    let mut o = Overrides::default();
    o.set("seed", Some(a.seed))
        .set("epochs", a.epochs)
        .set("batch_size", a.batch_size)
        .set("learning_rate", a.learning_rate)
        .set("width", a.width)
        .set("blocks", a.blocks)
        .set("activation", a.activation.clone());
    let cfg: FitConfig = resolve(a.config.as_deref(), &o)?;
    cfg.validate()?;
    ctx.resolved("fit", json!({"samples": a.samples, "fit": cfg, "out": a.out.out}));
    require_file(&a.samples)?;
    if ctx.dry_run {
        return Ok(());
    }
    let set = read_samples(&a.samples)?;
    let (model, history) = fit_with_history(&set, &cfg)?;
    ctx.prepare_out(&a.out.out)?;
    write_checkpoint(&model, &a.out.out.join("model.mfmp"))?;
    write_json(&a.out.out.join("fit.json"), &json!({"config": cfg, "loss_history": history}))?;
    print_json(&json!({
        "epochs": cfg.epochs,
        "final_loss": history.last(),
        "parameters": model.parameter_count(),
        "seed": cfg.seed,
    }));
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model checkpoint.
    pub model: PathBuf,
    /// Report loss and accuracy on this sample file.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// A unit-cube point `x,y,z`; repeatable.
    #[arg(long, value_parser = parse_triple)]
    pub point: Vec<[f64; 3]>,
}

pub fn eval(ctx: &Ctx, a: EvalArgs) -> CliResult<()> {
    if a.samples.is_none() && a.point.is_empty() {
        return Err(Failure::config("give --samples or at least one --point"));
    }
    ctx.resolved("eval", json!({"model": a.model, "samples": a.samples, "points": a.point}));
    require_file(&a.model)?;
    if let Some(s) = &a.samples {
        require_file(s)?;
    }
    if ctx.dry_run {
        return Ok(());
    }
    let model = read_checkpoint(&a.model)?;
    for p in &a.point {
        let prob = model.forward(&Point3::new(p[0], p[1], p[2]));
        print_json(&json!({"point": p, "probability": prob}));
    }
    if let Some(s) = &a.samples {
        let set = read_samples(s)?;
        let l = loss(&model, &set)?;
        let points: Vec<Point3> = (0..set.len()).map(|i| set.point(i)).collect();
        let correct = model
            .forward_batch(&points)
            .iter()
            .zip(&set.labels)
            .filter(|(p, &l)| (**p >= DEFAULT_THRESHOLD) == (l == 1))
            .count();
        print_json(&json!({"samples": set.len(), "loss": l, "accuracy": correct as f64 / set.len() as f64}));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Model checkpoint.
    pub model: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Normalization record; the mesh is mapped back to nanometers with it.
    #[arg(long)]
    pub normalization: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn extract(ctx: &Ctx, a: ExtractArgs) -> CliResult<()> {
    if a.resolution < 2 {
        return Err(Failure::config("--resolution must be >= 2"));
    }
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(Failure::config("--threshold must lie in (0, 1)"));
    }
    ctx.resolved(
        "extract",
        json!({"model": a.model, "resolution": a.resolution, "threshold": a.threshold,
               "normalization": a.normalization, "out": a.out.out}),
    );
    require_file(&a.model)?;
    let record: Option<NormalizationRecord> = a.normalization.as_deref().map(json_file).transpose()?;
    if ctx.dry_run {
        return Ok(());
    }
    let model = read_checkpoint(&a.model)?;
    let mut mesh = extract_mesh(&model, a.resolution, a.threshold)?;
    if let Some(r) = &record {
        mesh = r.denormalize_mesh(&mesh);
    }
    ctx.prepare_out(&a.out.out)?;
    write_mesh(&mesh, &a.out.out.join("mesh.off"))?;
    print_json(&json!({"vertices": mesh.vertices.len(), "triangles": mesh.triangles.len(), "watertight": mesh.is_watertight()}));
    Ok(())
}
