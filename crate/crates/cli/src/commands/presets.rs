use crate::failure::CliResult;
use crate::{print_json, Ctx};
use clap::Subcommand;
use mitoforge::MicroscopeConfig;
use serde_json::json;

#[derive(Subcommand, Debug)]
pub enum PresetsCmd {
    /// One JSON line per preset.
    List,
    /// Full record for one preset.
    Show { name: String },
}

fn describe(c: &MicroscopeConfig) -> serde_json::Value {
    let (sxy, sz) = c.psf_sigma();
    json!({
        "name": c.name,
        "kind": c.kind,
        "emission_wavelength_nm": c.emission_wavelength_nm,
        "numerical_aperture": c.numerical_aperture,
        "magnification": c.magnification,
        "pixel_size_nm": c.pixel_size_nm,
        "dof_nm": c.dof_nm,
        "lateral_resolution_nm": c.lateral_resolution(),
        "psf_sigma_xy_nm": sxy,
        "psf_sigma_z_nm": sz,
        "background": c.background,
        "sbr_range": c.sbr_range,
    })
}

pub fn run(ctx: &Ctx, cmd: PresetsCmd) -> CliResult<()> {
    match cmd {
        PresetsCmd::List => {
            ctx.resolved("presets list", json!({}));
            for c in MicroscopeConfig::presets() {
                print_json(&describe(&c));
            }
        }
        PresetsCmd::Show { name } => {
            let c = MicroscopeConfig::preset(&name)?;
            ctx.resolved("presets show", json!({"name": name}));
            print_json(&describe(&c));
        }
    }
    Ok(())
}
