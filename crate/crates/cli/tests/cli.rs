use mitoforge::fixtures::five_balls;
use mitoforge::geometry::Point3;
use mitoforge::mesh::io::write_mesh;
use mitoforge::mesh::primitives::icosphere;
use mitoforge::volume::write_volume;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mitoforge"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("stdout line {l:?}: {e}")))
        .collect()
}

fn stderr_json(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stderr)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("stderr line {l:?}: {e}")))
        .collect()
}

fn error_record(o: &Output) -> Value {
    stderr_json(o)
        .into_iter()
        .find(|r| r["event"] == "error")
        .expect("an error record on stderr")
}

fn listing(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p.clone());
            }
            out.push(p.strip_prefix(root).unwrap().to_path_buf());
        }
    }
    out.sort();
    out
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    listing(root)
        .into_iter()
        .filter(|p| root.join(p).is_file())
        .map(|p| {
            let b = std::fs::read(root.join(&p)).unwrap();
            (p, b)
        })
        .collect()
}

fn meshes(dir: &Path) {
    write_mesh(&icosphere(Point3::origin(), 300.0, 3), &dir.join("a.off")).unwrap();
    write_mesh(&icosphere(Point3::new(120.0, 0.0, 0.0), 300.0, 3), &dir.join("b.off")).unwrap();
}

#[test]
fn presets_list_shows_three_microscopes() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["presets", "list"]);
    assert!(o.status.success());
    let rows = stdout_json(&o);
    let names: Vec<_> = rows.iter().map(|r| r["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["Con1", "Epi1", "Epi2"]);
    let res: Vec<f64> = rows.iter().map(|r| r["lateral_resolution_nm"].as_f64().unwrap()).collect();
    for (got, want) in res.iter().zip([152.0, 245.0, 217.0]) {
        assert!((got - want).abs() <= 3.0, "{got} vs {want}");
    }
    for key in ["pixel_size_nm", "numerical_aperture", "magnification", "emission_wavelength_nm", "dof_nm"] {
        assert!(rows.iter().all(|r| r[key].is_number()), "{key}");
    }
}

#[test]
fn volume_cc_counts_five_balls() {
    let d = tempfile::tempdir().unwrap();
    write_volume(&five_balls(64, 24.0, 3), &d.path().join("in.raw"), 8).unwrap();
    let o = run_in(d.path(), &["volume", "cc", "in.raw", "--connectivity", "26"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)[0]["components"], 5);

    let o = run_in(d.path(), &["volume", "cc", "in.raw", "--connectivity", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_iou_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    meshes(d.path());
    let args = ["metrics", "iou", "a.off", "b.off", "--seed", "7"];
    let a = run_in(d.path(), &args);
    let b = run_in(d.path(), &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 1);
    let v = stdout_json(&a)[0]["value"].as_f64().unwrap();
    assert!(v > 0.3 && v < 0.9);
}

#[test]
fn metrics_masks_scores_identical_masks() {
    let d = tempfile::tempdir().unwrap();
    let mut m = mitoforge::microscope::Mask::zeros(8, 8);
    m.set(2, 3, true);
    m.set(4, 4, true);
    mitoforge::microscope::write_mask_pgm(&m, &d.path().join("m.pgm")).unwrap();
    let o = run_in(d.path(), &["metrics", "masks", "m.pgm", "m.pgm", "--foreground-only"]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)[0]["dice"], 1.0);
}

#[test]
fn unknown_flag_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["presets", "list", "--colour"]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["class"], "config");
    assert_eq!(rec["exit_code"], 2);
}

#[test]
fn help_lists_every_flag() {
    let o = bin().args(["dataset", "seg", "--help"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--config", "--seed", "--shapes", "--out", "--count", "--microscope", "--jobs", "--dry-run", "--log-level"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn generating_commands_require_seed() {
    let d = tempfile::tempdir().unwrap();
    meshes(d.path());
    for args in [
        vec!["dataset", "seg", "--out", "x"],
        vec!["sample", "a.off", "--out", "x"],
        vec!["render", "a.off", "--out", "x"],
        vec!["fit", "s.mfoc", "--out", "x"],
    ] {
        let o = run_in(d.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(error_record(&o)["message"].as_str().unwrap().contains("--seed"));
    }
    assert!(!d.path().join("x").exists());
}

#[test]
fn dry_run_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    meshes(d.path());
    let before = listing(d.path());
    for args in [
        vec!["--dry-run", "dataset", "seg", "--seed", "1", "--out", "ds"],
        vec!["--dry-run", "dataset", "stack2shape", "--seed", "1", "--out", "ds"],
        vec!["--dry-run", "dataset", "m2m", "--seed", "1", "--out", "ds"],
        vec!["--dry-run", "sample", "a.off", "--seed", "1", "--out", "s"],
        vec!["--dry-run", "render", "a.off", "--seed", "1", "--out", "r"],
        vec!["--dry-run", "mesh", "normalize", "a.off", "--out", "n"],
    ] {
        let o = run_in(d.path(), &args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let resolved = &stdout_json(&o)[0];
        assert_eq!(resolved["dry_run"], true);
    }
    assert_eq!(listing(d.path()), before);
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("seg.json"), r#"{"count": 3, "tile_size": 64}"#).unwrap();
    let o = run_in(
        d.path(),
        &["--dry-run", "dataset", "seg", "--config", "seg.json", "--count", "1", "--seed", "4", "--out", "o"],
    );
    assert!(o.status.success());
    let cfg = &stdout_json(&o)[0]["config"]["dataset"];
    assert_eq!(cfg["count"], 1);
    assert_eq!(cfg["tile_size"], 64);
}

#[test]
fn bad_configs_exit_2() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("typo.json"), r#"{"cuont": 3}"#).unwrap();
    std::fs::write(d.path().join("scope.json"), r#"{"microscope": "Epi9"}"#).unwrap();
    for cfg in ["typo.json", "scope.json", "missing.json"] {
        let o = run_in(d.path(), &["dataset", "seg", "--config", cfg, "--seed", "1", "--out", "o"]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
    }
    let o = run_in(d.path(), &["--jobs", "0", "presets", "list"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("o").exists());
}

#[test]
fn missing_inputs_exit_3() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["mesh", "info", "nope.off"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_record(&o)["class"], "input");
    std::fs::write(d.path().join("short.raw"), [1u8; 63]).unwrap();
    std::fs::write(
        d.path().join("short.raw.json"),
        r#"{"dims": [4, 4, 4], "voxel_size_nm": 24.0, "element_bits": 8}"#,
    )
    .unwrap();
    let o = run_in(d.path(), &["volume", "info", "short.raw"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_record(&o)["module"], "volume");
}

#[test]
fn shape_pipeline_stays_inside_out_dirs() {
    let d = tempfile::tempdir().unwrap();
    meshes(d.path());
    let steps: Vec<Vec<&str>> = vec![
        vec!["sample", "a.off", "--n", "2000", "--seed", "1", "--out", "s"],
        vec!["fit", "s/samples.mfoc", "--seed", "2", "--epochs", "20", "--width", "16", "--blocks", "1", "--out", "f"],
        vec!["eval", "f/model.mfmp", "--samples", "s/samples.mfoc", "--point", "0,0,0"],
        vec!["extract", "f/model.mfmp", "--resolution", "24", "--normalization", "s/normalization.json", "--out", "e"],
        vec!["render", "a.off", "--seed", "3", "--perspective", "0.1,-0.2,0.3", "--sbr", "3", "--out", "r"],
    ];
    for args in &steps {
        let o = run_in(d.path(), args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let log = stderr_json(&o);
        assert_eq!(log[0]["event"], "resolved_config");
    }
    let top: Vec<_> = std::fs::read_dir(d.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let mut top = top;
    top.sort();
    assert_eq!(top, ["a.off", "b.off", "e", "f", "r", "s"]);
    assert!(d.path().join("e/mesh.off").is_file());
    assert!(d.path().join("r/stack_z2.pgm").is_file());
}

#[test]
fn fit_divergence_exits_4() {
    let d = tempfile::tempdir().unwrap();
    meshes(d.path());
    assert!(run_in(d.path(), &["sample", "a.off", "--n", "500", "--seed", "1", "--out", "s"]).status.success());
    let o = run_in(
        d.path(),
        &["fit", "s/samples.mfoc", "--seed", "1", "--epochs", "3", "--learning-rate", "1e300", "--out", "f"],
    );
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_record(&o)["class"], "numeric");
}

#[test]
fn dataset_is_independent_of_jobs() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("seg.json"), r#"{"count": 3, "shapes": {"synthetic": {"count": 2}}}"#).unwrap();
    for (jobs, out) in [("1", "a"), ("4", "b")] {
        let o = run_in(
            d.path(),
            &["--jobs", jobs, "dataset", "seg", "--config", "seg.json", "--seed", "9", "--out", out],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout_json(&o)[0]["items"], 3);
    }
    assert_eq!(tree_bytes(&d.path().join("a")), tree_bytes(&d.path().join("b")));

    let o = run_in(d.path(), &["dataset", "verify", "a"]);
    assert!(o.status.success());
    let o = run_in(d.path(), &["dataset", "split", "a", "--seed", "2", "--out", "sp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = &stdout_json(&o)[0];
    assert_eq!(s["train"].as_u64().unwrap() + s["val"].as_u64().unwrap() + s["test"].as_u64().unwrap(), 3);

    let o = run_in(d.path(), &["dataset", "seg", "--config", "seg.json", "--seed", "9", "--out", "a"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mesh_build_from_volume() {
    let d = tempfile::tempdir().unwrap();
    write_volume(&five_balls(48, 24.0, 5), &d.path().join("in.raw"), 8).unwrap();
    let o = run_in(d.path(), &["--jobs", "2", "mesh", "build", "in.raw", "--out", "m"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table: Vec<Value> = serde_json::from_slice(&std::fs::read(d.path().join("m/meshes.json")).unwrap()).unwrap();
    assert!(!table.is_empty());
    assert!(table.iter().all(|r| r["watertight"] == true));
    let o = run_in(d.path(), &["mesh", "info", "m/instance_0001.off"]);
    assert_eq!(stdout_json(&o)[0]["watertight"], true);
}
