use super::*;
use crate::geometry::Vector3;

fn set(points: &[[f64; 3]]) -> EmitterSet {
    EmitterSet {
        positions: points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect(),
        density: 30.0,
        seed: 0,
    }
}

fn rotate90(img: &Image) -> Image {
    let mut out = Image::zeros(img.height, img.width);
    for y in 0..img.height {
        for x in 0..img.width {
            out.set(img.height - 1 - y, x, img.get(x, y));
        }
    }
    out
}

#[test]
fn preset_resolutions() {
    let r: Vec<f64> = MicroscopeConfig::presets().iter().map(lateral_resolution).collect();
    assert!((r[0] - 600.0 / (2.0 * 1.4 * 2f64.sqrt())).abs() < 1e-12);
    assert!((r[1] - 688.0 / 2.84).abs() < 1e-12);
    assert!((r[2] - 608.0 / 2.8).abs() < 1e-12);
    let (sxy, sz) = psf_sigma(&MicroscopeConfig::epi1());
    assert!((sxy * FWHM_PER_SIGMA - r[1]).abs() < 1e-12);
    assert!((sz * FWHM_PER_SIGMA - 500.0).abs() < 1e-12);
}

#[test]
fn preset_lookup_and_json() {
    assert_eq!(MicroscopeConfig::preset("EPI1").unwrap(), MicroscopeConfig::epi1());
    assert!(matches!(MicroscopeConfig::preset("epi3"), Err(MicroscopeError::UnknownPreset(_))));
    assert_eq!(MicroscopeConfig::from_json("\"con1\"").unwrap(), MicroscopeConfig::con1());
    let text = serde_json::to_string(&MicroscopeConfig::epi2()).unwrap();
    assert_eq!(MicroscopeConfig::from_json(&text).unwrap(), MicroscopeConfig::epi2());
    let partial = r#"{"name":"x","kind":"widefield","emission_wavelength_nm":500,"numerical_aperture":1.0,
        "magnification":40,"pixel_size_nm":100,"dof_nm":400}"#;
    let c = MicroscopeConfig::from_json(partial).unwrap();
    assert_eq!(c.background, 100.0);
    assert_eq!(c.sbr_range, [2.0, 4.0]);
    assert!(MicroscopeConfig::from_json(&partial.replace("\"dof_nm\"", "\"dof\"")).is_err());
}

#[test]
fn config_validation() {
    let ok = MicroscopeConfig::epi1();
    for c in [
        MicroscopeConfig { numerical_aperture: 2.0, ..ok.clone() },
        MicroscopeConfig { numerical_aperture: 0.0, ..ok.clone() },
        MicroscopeConfig { pixel_size_nm: 0.0, ..ok.clone() },
        MicroscopeConfig { dof_nm: -1.0, ..ok.clone() },
        MicroscopeConfig { emission_wavelength_nm: f64::NAN, ..ok.clone() },
        MicroscopeConfig { sbr_range: [0.5, 3.0], ..ok.clone() },
        MicroscopeConfig { sbr_range: [4.0, 2.0], ..ok.clone() },
    ] {
        assert!(matches!(c.validate(), Err(MicroscopeError::InvalidConfig(_))), "{c:?}");
    }
}

#[test]
fn centered_emitter_peaks_at_center_and_is_rotation_symmetric() {
    let cfg = MicroscopeConfig::epi1();
    let fov = FieldOfView::new(31, 31, [0.0, 0.0]);
    let img = render_slice(&set(&[[0.0, 0.0, 0.0]]), &cfg, &fov, 0.0, 1000.0);
    assert_eq!(img.argmax(), (15, 15));
    let r = rotate90(&img);
    for (a, b) in img.pixels.iter().zip(&r.pixels) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn in_focus_energy_is_photon_count() {
    for cfg in MicroscopeConfig::presets() {
        let (sxy, _) = cfg.psf_sigma();
        let half = (6.0 * sxy / cfg.pixel_size_nm).ceil() as usize + 1;
        let fov = FieldOfView::new(2 * half + 1, 2 * half + 1, [10.0, -20.0]);
        let img = render_slice(&set(&[[0.0, 0.0, 0.0]]), &cfg, &fov, 0.0, 1000.0);
        assert!((img.sum() - 1000.0).abs() <= 10.0, "{}: {}", cfg.name, img.sum());
    }
}

#[test]
fn axial_weight_one_fwhm_out() {
    let cfg = MicroscopeConfig::epi1();
    let fov = FieldOfView::new(15, 15, [0.0, 0.0]);
    let focus = render_slice(&set(&[[0.0, 0.0, 0.0]]), &cfg, &fov, 0.0, 1000.0);
    let off = render_slice(&set(&[[0.0, 0.0, 500.0]]), &cfg, &fov, 0.0, 1000.0);
    let expected = (-(FWHM_PER_SIGMA * FWHM_PER_SIGMA) / 2.0f64).exp();
    assert!((expected - 0.0625).abs() < 1e-4);
    assert!((off.max() / focus.max() - expected).abs() < 1e-12);
    let far = render_slice(&set(&[[0.0, 0.0, 5000.0]]), &cfg, &fov, 0.0, 1000.0);
    assert_eq!(far.sum(), 0.0);
}

#[test]
fn empty_emitters_render_zero() {
    let img = render_slice(&set(&[]), &MicroscopeConfig::con1(), &FieldOfView::new(8, 8, [0.0; 2]), 0.0, 1000.0);
    assert!(img.pixels.iter().all(|&v| v == 0.0));
}

#[test]
fn default_stack_offsets_and_peak_slice() {
    let cfg = MicroscopeConfig::epi1();
    let plan = StackPlan::default_for(&cfg);
    let fov = FieldOfView::new(21, 21, [0.0; 2]);
    let s = render_zstack(&set(&[[0.0, 0.0, 250.0]]), &cfg, &plan, &fov, 1000.0).unwrap();
    assert_eq!(s.z_offsets_nm, vec![-250.0, 0.0, 250.0]);
    let peaks: Vec<f64> = s.slices.iter().map(Image::max).collect();
    assert!(peaks[2] > peaks[1] && peaks[1] > peaks[0]);
    assert!(matches!(
        render_zstack(&set(&[]), &cfg, &StackPlan { dz_nm: 250.0, n: vec![] }, &fov, 1.0),
        Err(MicroscopeError::InvalidConfig(_))
    ));
}

#[test]
fn single_slice_stack_equals_render_slice() {
    let cfg = MicroscopeConfig::epi2();
    let e = set(&[[30.0, -40.0, 100.0], [200.0, 0.0, -50.0]]);
    let fov = FieldOfView::new(16, 12, [50.0, 0.0]);
    let s = render_zstack(&e, &cfg, &StackPlan { dz_nm: 123.0, n: vec![0] }, &fov, 700.0).unwrap();
    assert_eq!(s.slices[0], render_slice(&e, &cfg, &fov, 0.0, 700.0));
}

#[test]
fn background_mean_and_determinism() {
    let cfg = MicroscopeConfig::epi1();
    let mut img = Image::zeros(256, 257);
    img.set(0, 256, 5.0);
    let noisy = add_noise(&img, &cfg, SbrTarget::Fixed(3.0), 4).unwrap();
    let bg: Vec<f64> = noisy.pixels[..256 * 256].to_vec();
    let mean = bg.iter().sum::<f64>() / bg.len() as f64;
    assert!((mean - 100.0).abs() <= 2.0, "{mean}");
    assert!(noisy.pixels.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
    assert_eq!(noisy, add_noise(&img, &cfg, SbrTarget::Fixed(3.0), 4).unwrap());
    assert_ne!(noisy, add_noise(&img, &cfg, SbrTarget::Fixed(3.0), 5).unwrap());
}

#[test]
fn sampled_sbr_within_range() {
    let cfg = MicroscopeConfig::con1();
    let mut img = Image::zeros(4, 4);
    img.set(1, 1, 1.0);
    for s in 0..200 {
        let (_, sbr) = add_noise_with_sbr(&img, &cfg, SbrTarget::Sample, s).unwrap();
        assert!((2.0..=4.0).contains(&sbr));
    }
}

#[test]
fn zero_and_invalid_images_rejected() {
    let cfg = MicroscopeConfig::epi1();
    let z = Image::zeros(4, 4);
    assert!(matches!(add_noise(&z, &cfg, SbrTarget::Fixed(3.0), 1), Err(MicroscopeError::ZeroSignal)));
    let mut neg = z.clone();
    neg.pixels[3] = -1.0;
    assert!(matches!(add_noise(&neg, &cfg, SbrTarget::Fixed(3.0), 1), Err(MicroscopeError::InvalidIntensity(3))));
    let mut one = z;
    one.pixels[0] = 1.0;
    assert!(matches!(add_noise(&one, &cfg, SbrTarget::Fixed(0.5), 1), Err(MicroscopeError::InvalidConfig(_))));
}

#[test]
fn stack_noise_shares_one_scale() {
    let cfg = MicroscopeConfig::epi1();
    let fov = FieldOfView::new(21, 21, [0.0; 2]);
    let e = set(&[[0.0, 0.0, 250.0]]);
    let clean = render_zstack(&e, &cfg, &StackPlan::default_for(&cfg), &fov, 1000.0).unwrap();
    let mut means = [0.0; 3];
    for s in 0..200 {
        let n = add_noise_stack(&clean, &cfg, SbrTarget::Fixed(3.0), s).unwrap();
        assert!(n.noisy && n.seed == Some(s));
        for k in 0..3 {
            means[k] += n.slices[k].get(10, 10) / 200.0;
        }
    }
    // brightest slice peak maps to 3b; the others keep their ratios
    let pk = clean.max();
    for k in 0..3 {
        let expected = 100.0 + 200.0 * clean.slices[k].get(10, 10) / pk;
        assert!((means[k] - expected).abs() < 4.0 * (expected / 200.0).sqrt(), "{k}: {} vs {expected}", means[k]);
    }
}

#[test]
fn dof_filter() {
    let cfg = MicroscopeConfig::epi1();
    let all_in = set(&[[0.0, 0.0, 100.0], [5.0, 5.0, 100.0]]);
    assert_eq!(dof_mask(&all_in, &cfg, 100.0), all_in);
    assert!(dof_mask(&set(&[[0.0, 0.0, 500.0], [0.0, 0.0, -500.0]]), &cfg, 0.0).is_empty());
    let zs = [-300.0, -250.0, -249.0, 0.0, 249.9, 250.0, 250.1, 800.0];
    let mixed = set(&zs.map(|z| [0.0, 0.0, z]));
    let kept: Vec<f64> = dof_mask(&mixed, &cfg, 0.0).positions.iter().map(|p| p.z).collect();
    let oracle: Vec<f64> = zs.iter().copied().filter(|z| z.abs() <= 250.0).collect();
    assert_eq!(kept, oracle);
}

#[test]
fn ground_truth_disc() {
    let cfg = MicroscopeConfig::epi1();
    let fov = FieldOfView::new(9, 9, [0.0; 2]);
    assert_eq!(ground_truth_mask(&set(&[]), &cfg, &fov, 0.0, 300.0).count(), 0);
    assert_eq!(ground_truth_mask(&set(&[[0.0, 0.0, 900.0]]), &cfg, &fov, 0.0, 300.0).count(), 0);
    let m = ground_truth_mask(&set(&[[0.0, 0.0, 0.0]]), &cfg, &fov, 0.0, cfg.pixel_size_nm);
    let on: Vec<(usize, usize)> = (0..81).filter(|i| m.data[*i] != 0).map(|i| (i % 9, i / 9)).collect();
    assert_eq!(on, vec![(4, 3), (3, 4), (4, 4), (5, 4), (4, 5)]);
}

#[test]
fn ground_truth_covers_half_max_region() {
    use crate::mesh::{primitives::torus, sample_surface};
    for (k, cfg) in MicroscopeConfig::presets().into_iter().enumerate() {
        // flat ring well inside the DOF
        let ring = torus(Point3::origin(), 700.0, 40.0, 48, 12);
        let e = sample_surface(&ring, 30.0, k as u64).unwrap();
        let fov = FieldOfView::new(48, 48, [0.0; 2]);
        let img = render_slice(&e, &cfg, &fov, 0.0, 1000.0);
        let mask = ground_truth_mask(&e, &cfg, &fov, 0.0, cfg.lateral_resolution());
        let half = img.max() / 2.0;
        for (i, &v) in img.pixels.iter().enumerate() {
            if v >= half {
                assert!(mask.data[i] != 0, "{} pixel {i}", cfg.name);
            }
        }
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn emitters() -> impl Strategy<Value = Vec<[f64; 3]>> {
        proptest::collection::vec([-800.0f64..800.0, -800.0f64..800.0, -600.0f64..600.0], 0..12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rendering_is_linear(a in emitters(), b in emitters(), zf in -300.0f64..300.0) {
            let cfg = MicroscopeConfig::epi2();
            let fov = FieldOfView::new(24, 20, [0.0, 0.0]);
            let both: Vec<[f64; 3]> = a.iter().chain(&b).copied().collect();
            let mut sum = render_slice(&set(&a), &cfg, &fov, zf, 1000.0);
            sum.add_assign(&render_slice(&set(&b), &cfg, &fov, zf, 1000.0));
            let joint = render_slice(&set(&both), &cfg, &fov, zf, 1000.0);
            for (x, y) in sum.pixels.iter().zip(&joint.pixels) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn lateral_shift_by_whole_pixels(a in emitters(), kx in -3i64..=3, ky in -3i64..=3) {
            let cfg = MicroscopeConfig::con1();
            let fov = FieldOfView::new(40, 40, [0.0, 0.0]);
            let px = cfg.pixel_size_nm;
            let e = set(&a);
            let base = render_slice(&e, &cfg, &fov, 0.0, 1000.0);
            let moved = render_slice(&e.translated(Vector3::new(kx as f64 * px, ky as f64 * px, 0.0)), &cfg, &fov, 0.0, 1000.0);
            for y in 3..37i64 {
                for x in 3..37i64 {
                    let v = moved.get((x + kx) as usize, (y + ky) as usize);
                    prop_assert!((v - base.get(x as usize, y as usize)).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn axial_weight_even_and_decreasing(d1 in 0.0f64..2000.0, d2 in 0.0f64..2000.0) {
            let cfg = MicroscopeConfig::epi1();
            prop_assert_eq!(cfg.axial_weight(d1), cfg.axial_weight(-d1));
            if d1 < d2 {
                let (w1, w2) = (cfg.axial_weight(d1), cfg.axial_weight(d2));
                prop_assert!(w1 > w2 || (w1 == 0.0 && w2 == 0.0));
            }
        }
    }
}
