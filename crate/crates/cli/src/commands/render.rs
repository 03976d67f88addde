use super::mesh::load_mesh;
use super::{parse_sbr, parse_triple, write_json};
use crate::config::{resolve, Overrides};
use crate::failure::{CliResult, Failure};
use crate::{print_json, Ctx, OutArg};
use clap::Args;
use mitoforge::dataset::{render_perspective, MicroscopeSpec};
use mitoforge::mesh::io::emitters_to_csv;
use mitoforge::mesh::{sample_surface, DEFAULT_EMITTER_DENSITY};
use mitoforge::microscope::{add_noise_stack, write_stack, SbrTarget, StackPlan, DEFAULT_PHOTONS_PER_EMITTER};
use mitoforge::seed::{derive_seed, stream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub microscope: MicroscopeSpec,
    pub perspective: [f64; 3],
    /// Half-DOF spacing at n = -1, 0, 1 when absent.
    pub stack: Option<StackPlan>,
    pub fov_pixels: usize,
    pub emitter_density: f64,
    pub photons_per_emitter: f64,
    pub sbr: SbrTarget,
    pub noise: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            microscope: MicroscopeSpec::Preset("Epi1".into()),
            perspective: [0.0; 3],
            stack: None,
            fov_pixels: 64,
            emitter_density: DEFAULT_EMITTER_DENSITY,
            photons_per_emitter: DEFAULT_PHOTONS_PER_EMITTER,
            sbr: SbrTarget::Sample,
            noise: true,
        }
    }
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Mesh in nanometers.
    pub mesh: PathBuf,
    /// JSON render config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Preset name.
    #[arg(long)]
    pub microscope: Option<String>,
    /// Rotation angles `alpha,beta,gamma` in radians.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub perspective: Option<[f64; 3]>,
    #[arg(long)]
    pub fov_pixels: Option<usize>,
    /// Molecules per square micrometer.
    #[arg(long)]
    pub emitter_density: Option<f64>,
    #[arg(long)]
    pub photons_per_emitter: Option<f64>,
    /// `sample` or a fixed ratio.
    #[arg(long, value_parser = parse_sbr)]
    pub sbr: Option<SbrTarget>,
    /// Write the noise-free stack as f32 instead.
    #[arg(long)]
    pub clean: bool,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn run(ctx: &Ctx, a: RenderArgs) -> CliResult<()> {
    let mut o = Overrides::default();
    o.set("microscope", a.microscope.clone())
        .set("perspective", a.perspective)
        .set("fov_pixels", a.fov_pixels)
        .set("emitter_density", a.emitter_density)
        .set("photons_per_emitter", a.photons_per_emitter)
        .set("sbr", a.sbr)
        .set("noise", a.clean.then_some(false));
    let cfg: RenderConfig = resolve(a.config.as_deref(), &o)?;
    let mc = cfg.microscope.resolve()?;
    let plan = cfg.stack.clone().unwrap_or_else(|| StackPlan::default_for(&mc));
    plan.validate()?;
    if cfg.fov_pixels == 0 {
        return Err(Failure::config("fov_pixels must be >= 1"));
    }
    if !(cfg.emitter_density > 0.0 && cfg.photons_per_emitter > 0.0) {
        return Err(Failure::config("emitter_density and photons_per_emitter must be positive"));
    }
    let emitter_seed = derive_seed(a.seed, stream::EMITTERS, 0);
    let noise_seed = derive_seed(a.seed, stream::NOISE, 0);
    ctx.resolved(
        "render",
        json!({"mesh": a.mesh, "render": cfg, "microscope": mc, "stack": plan, "seed": a.seed,
               "emitter_seed": emitter_seed, "noise_seed": noise_seed, "out": a.out.out}),
    );
    let mesh = load_mesh(&a.mesh)?;
    if ctx.dry_run {
        return Ok(());
    }
    let emitters = sample_surface(&mesh, cfg.emitter_density, emitter_seed)?;
    let clean = render_perspective(&emitters, &mc, cfg.perspective, &plan, cfg.fov_pixels, cfg.photons_per_emitter)?;
    let stack = if cfg.noise {
        add_noise_stack(&clean, &mc, cfg.sbr, noise_seed)?
    } else {
        clean
    };
    ctx.prepare_out(&a.out.out)?;
    let files = write_stack(&stack, &a.out.out, "stack")?;
    std::fs::write(a.out.out.join("emitters.csv"), emitters_to_csv(&emitters))?;
    write_json(&a.out.out.join("render.json"), &json!({"render": cfg, "microscope": mc, "seed": a.seed}))?;
    print_json(&json!({
        "emitters": emitters.len(),
        "slices": stack.slices.len(),
        "z_offsets_nm": stack.z_offsets_nm,
        "files": files.len(),
    }));
    Ok(())
}
