use super::*;
use crate::geometry::Point3;
use crate::implicit::{fit, FitConfig, MlpOccupancy};
use crate::mesh::primitives::icosphere;
use crate::mesh::{normalize_unit_cube, EmitterSet};
use crate::microscope::{read_pgm16, read_pgm8, ImageStack, MicroscopeConfig, SbrTarget, StackPlan};
use crate::occupancy::sample_occupancy;
use std::fs;
use std::path::Path;
use tempfile::tempdir;

fn corpus(n: usize) -> Vec<CorpusShape> {
    load_corpus(&ShapeSource::Synthetic { count: n }, 11, None, 1).unwrap()
}

fn sphere_corpus() -> Vec<CorpusShape> {
    vec![CorpusShape {
        id: 0,
        provenance: "sphere".into(),
        mesh: icosphere(Point3::origin(), 300.0, 3),
    }]
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn segmentation_item_shapes_and_determinism() {
    let shapes = corpus(2);
    let cfg = SegConfig::default();
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let m = gen_segmentation_dataset(&shapes, &cfg, 5, a.path(), 1).unwrap();
    gen_segmentation_dataset(&shapes, &cfg, 5, b.path(), 4).unwrap();
    assert_eq!(m.items.len(), 1);
    let img = read_pgm16(&a.path().join("images/seg_000000.pgm")).unwrap();
    let mask = read_pgm8(&a.path().join("masks/seg_000000.pgm")).unwrap();
    assert_eq!((img.width, img.height), (256, 256));
    assert_eq!((mask.width, mask.height), (256, 256));
    assert!(mask.count() > 0);
    assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));
    verify_manifest(a.path()).unwrap();
}

#[test]
fn segmentation_config_limits() {
    let cfg = SegConfig {
        count: 7000,
        ..SegConfig::default()
    };
    cfg.validate().unwrap();
    let bad = SegConfig {
        count: 0,
        ..SegConfig::default()
    };
    assert!(matches!(bad.validate(), Err(DatasetError::InvalidConfig(_))));
    let bad = SegConfig {
        microscope: MicroscopeSpec::Preset("nope".into()),
        ..SegConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn output_dir_must_be_empty() {
    let d = tempdir().unwrap();
    fs::write(d.path().join("x"), b"1").unwrap();
    let err = gen_segmentation_dataset(&corpus(1), &SegConfig::default(), 1, d.path(), 1).unwrap_err();
    assert!(matches!(err, DatasetError::OutputNotEmpty(_)));
}

#[test]
fn stack2shape_file_counts() {
    let d = tempdir().unwrap();
    let cfg = Stack2ShapeConfig {
        shapes: ShapeSource::Synthetic { count: 1 },
        occupancy_samples: 500,
        ..Stack2ShapeConfig::default()
    };
    let m = gen_stack2shape_dataset(&corpus(1), &cfg, 3, d.path(), 1).unwrap();
    assert_eq!(m.items.len(), 6);
    let stacks = fs::read_dir(d.path().join("stacks")).unwrap().count();
    let slices = fs::read_dir(d.path().join("stacks"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "pgm")
        .count();
    assert_eq!(slices, 18);
    assert_eq!(stacks, 18 + 6);
    assert_eq!(fs::read_dir(d.path().join("occupancy")).unwrap().count(), 1);
    let verified = verify_manifest(d.path()).unwrap();
    assert_eq!(verified.shapes[0].occupancy_file.as_deref(), Some("occupancy/shape_0000.mfoc"));
}

#[test]
fn z_symmetric_emitters_give_equal_outer_slices() {
    let mut positions = Vec::new();
    for i in 0..20 {
        let t = i as f64 * 0.7;
        let p = Point3::new(200.0 * t.cos(), 150.0 * t.sin(), 40.0 + 10.0 * i as f64);
        positions.push(p);
        positions.push(Point3::new(p.x, p.y, -p.z));
    }
    let set = EmitterSet {
        positions,
        density: 30.0,
        seed: 0,
    };
    let cfg = MicroscopeConfig::epi1();
    let s = render_perspective(&set, &cfg, [0.0; 3], &StackPlan::default_for(&cfg), 32, 1000.0).unwrap();
    assert_eq!(s.slices.len(), 3);
    for (a, b) in s.slices[0].pixels.iter().zip(&s.slices[2].pixels) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
    let sum = |k: usize| s.slices[k].sum();
    assert!(sum(1) > sum(0));
}

#[test]
fn manifest_detects_corruption_and_orphans() {
    let shapes = corpus(1);
    let d = tempdir().unwrap();
    let cfg = Stack2ShapeConfig {
        shapes: ShapeSource::Synthetic { count: 1 },
        perspectives: vec![[0.0; 3]],
        occupancy_samples: 100,
        ..Stack2ShapeConfig::default()
    };
    gen_stack2shape_dataset(&shapes, &cfg, 9, d.path(), 1).unwrap();
    verify_manifest(d.path()).unwrap();

    fs::write(d.path().join("stacks/extra.bin"), b"x").unwrap();
    assert!(matches!(verify_manifest(d.path()), Err(DatasetError::OrphanFile(_))));
    fs::remove_file(d.path().join("stacks/extra.bin")).unwrap();

    let target = d.path().join("occupancy/shape_0000.mfoc");
    let mut bytes = fs::read(&target).unwrap();
    let last = bytes.len() - 40;
    bytes[last] ^= 1;
    fs::write(&target, &bytes).unwrap();
    assert!(matches!(verify_manifest(d.path()), Err(DatasetError::ChecksumMismatch(_))));

    fs::remove_file(&target).unwrap();
    assert!(matches!(verify_manifest(d.path()), Err(DatasetError::MissingFile(_))));
}

fn dummy_manifest(kind: DatasetKind, n: usize) -> GenerationManifest {
    let mut m = GenerationManifest::new(kind, 0, MicroscopeConfig::epi1(), serde_json::Value::Null);
    for i in 0..n {
        m.shapes.push(ShapeRecord {
            id: i as u32,
            provenance: format!("s{i}"),
            normalization: None,
            occupancy_file: None,
        });
        m.items.push(ItemRecord {
            index: i as u64,
            seed: 0,
            shape_ids: vec![i as u32],
            rotations: vec![[0.0; 3]],
            files: vec![],
            split: None,
            details: serde_json::Value::Null,
        });
    }
    m
}

#[test]
fn split_counts_and_determinism() {
    assert_eq!(split_counts(10, &[0.7, 0.1, 0.2]), [7, 1, 2]);
    assert_eq!(split_counts(3, &[0.7, 0.1, 0.2]).iter().sum::<usize>(), 3);
    let m = dummy_manifest(DatasetKind::Stack2shape, 10);
    let spec = SplitSpec { seed: 4, ..SplitSpec::default() };
    let a = split(&m, &spec).unwrap();
    let b = split(&m, &spec).unwrap();
    let sa = a.split.clone().unwrap();
    assert_eq!(sa, b.split.unwrap());
    assert_eq!((sa.train.len(), sa.val.len(), sa.test.len()), (7, 1, 2));
    let mut all: Vec<_> = sa.train.iter().chain(&sa.val).chain(&sa.test).copied().collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 10);
    assert!(a.items.iter().all(|i| i.split.is_some()));
    let other = split(&m, &SplitSpec { seed: 5, ..SplitSpec::default() }).unwrap();
    assert_ne!(other.split.unwrap(), sa);
}

#[test]
fn split_rejects_too_few_units() {
    let m = dummy_manifest(DatasetKind::Segmentation, 2);
    assert!(matches!(split(&m, &SplitSpec::default()), Err(DatasetError::InvalidSplit(_))));
    let bad = SplitSpec {
        fractions: [0.5, 0.5, 0.5],
        seed: 0,
    };
    assert!(bad.validate().is_err());
}

fn fwhm_proxy(s: &ImageStack) -> f64 {
    // second-moment width of the in-focus slice, in nm
    let img = &s.slices[s.slices.len() / 2];
    let total = img.sum();
    let (mut mx, mut my) = (0.0, 0.0);
    for y in 0..img.height {
        for x in 0..img.width {
            let v = img.get(x, y);
            mx += v * x as f64;
            my += v * y as f64;
        }
    }
    mx /= total;
    my /= total;
    let mut var = 0.0;
    for y in 0..img.height {
        for x in 0..img.width {
            let v = img.get(x, y);
            var += v * ((x as f64 - mx).powi(2) + (y as f64 - my).powi(2));
        }
    }
    (var / total / 2.0).sqrt() * s.pixel_size_nm * 2.3548
}

#[test]
fn transform_same_microscope_is_identical() {
    let mesh = icosphere(Point3::origin(), 400.0, 3);
    let (norm, rec) = normalize_unit_cube(&mesh).unwrap();
    let epi = MicroscopeConfig::epi1();
    let (a, b) = microscope_transform(
        &ShapeInput::Mesh(norm),
        &rec,
        &epi,
        &epi,
        [0.3, 0.2, 0.1],
        7,
        &TransformOptions::default(),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn transform_confocal_is_sharper() {
    let point = icosphere(Point3::origin(), 5.0, 1);
    let (norm, rec) = normalize_unit_cube(&point).unwrap();
    let opts = TransformOptions {
        noise: false,
        emitter_density: 1e5,
        fov_nm: Some(3000.0),
        ..TransformOptions::default()
    };
    let (epi, con) = microscope_transform(
        &ShapeInput::Mesh(norm),
        &rec,
        &MicroscopeConfig::epi1(),
        &MicroscopeConfig::con1(),
        [0.0; 3],
        1,
        &opts,
    )
    .unwrap();
    assert!(fwhm_proxy(&con) < fwhm_proxy(&epi));
    assert_ne!(epi.pixel_size_nm, con.pixel_size_nm);
}

#[test]
fn model_input_matches_extracted_mesh() {
    let mesh = icosphere(Point3::origin(), 400.0, 2);
    let (norm, rec) = normalize_unit_cube(&mesh).unwrap();
    let samples = sample_occupancy(&norm, 500, 3, "sphere").unwrap();
    let cfg = FitConfig {
        epochs: 5,
        width: 16,
        blocks: 1,
        ..FitConfig::default()
    };
    let model: MlpOccupancy = fit(&samples, &cfg).unwrap();
    let input = ShapeInput::Model {
        model: model.clone(),
        resolution: 24,
        threshold: 0.5,
    };
    let epi = MicroscopeConfig::epi1();
    let opts = TransformOptions::default();
    let extracted = crate::implicit::extract_mesh(&model, 24, 0.5).unwrap();
    let from_model = microscope_transform(&input, &rec, &epi, &epi, [0.0; 3], 2, &opts).unwrap();
    let from_mesh = microscope_transform(&ShapeInput::Mesh(extracted), &rec, &epi, &epi, [0.0; 3], 2, &opts).unwrap();
    assert_eq!(from_model, from_mesh);
}

#[test]
fn m2m_dataset_pairs() {
    let d = tempdir().unwrap();
    let cfg = M2mConfig {
        shapes: ShapeSource::Synthetic { count: 1 },
        options: TransformOptions {
            sbr: SbrTarget::Fixed(3.0),
            ..TransformOptions::default()
        },
        ..M2mConfig::default()
    };
    let m = gen_m2m_dataset(&sphere_corpus(), &cfg, 2, d.path(), 1).unwrap();
    assert_eq!(m.kind, DatasetKind::M2m);
    assert_eq!(m.target_microscope.as_ref().unwrap().name, "Con1");
    assert_eq!(m.items.len(), 1);
    assert_eq!(m.items[0].files.iter().filter(|f| f.ends_with(".pgm")).count(), 6);
    verify_manifest(d.path()).unwrap();
}
