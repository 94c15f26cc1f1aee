//! End-to-end runs of the `travcost` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use travcost::config::PipelineConfig;
use travcost::dataset::Dataset;
use travcost::eval::semantic_costmap;
use travcost::pipeline;
use travcost::world::spec::stock_classes;
use travcost::world::{generate_world, BaseTerrain, Region, Shape, TerrainSpec, World};

fn travcost(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_travcost")).arg("--root").arg(root).args(args).output().expect("spawn travcost")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn flat_spec() -> TerrainSpec {
    TerrainSpec {
        name: "flat".into(),
        extent: [30.0, 30.0],
        resolution: 0.1,
        seed: 1,
        classes: stock_classes(),
        base: BaseTerrain { amplitude: 0.0, wavelength: 10.0, octaves: 1, slope: [0.0, 0.0] },
        regions: vec![Region { class: "ground".into(), shape: Shape::Everywhere, roughness: 0.0, roughness_variation: 0.0, elevation: 0.0 }],
    }
}

#[test]
fn generate_writes_rasters_reproducibly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&travcost(d.path(), &["--seed", "5", "generate", "--stock", "hill"]));
    }
    let dir = a.path().join("out/world");
    for ch in ["height", "class", "roughness"] {
        let bytes = fs::read(dir.join(format!("{ch}.f64"))).unwrap();
        assert_eq!(bytes, fs::read(b.path().join(format!("out/world/{ch}.f64"))).unwrap());
    }
    assert_eq!(World::load(&dir).unwrap().spec().name, "hill");
}

#[test]
fn bad_spec_key_is_named() {
    let d = tempfile::tempdir().unwrap();
    let text = format!("bogus_key = 3\n{}", flat_spec().to_toml().unwrap());
    let spec = d.path().join("bad.toml");
    fs::write(&spec, text).unwrap();
    let out = travcost(d.path(), &["generate", "--spec", spec.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));
}

#[test]
fn bad_config_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "[collect]\nroutes = 0\n").unwrap();
    let out = travcost(d.path(), &["--config", cfg.to_str().unwrap(), "collect"]);
    assert_eq!(out.status.code(), Some(2));
    let out = travcost(d.path(), &["collect", "--routes", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = travcost(d.path(), &["predict", "--pose", "1,2,3,4"]);
    assert_eq!(out.status.code(), Some(2));
    // Missing inputs are runtime errors.
    let out = travcost(d.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn collect_on_hill_records_provenance() {
    let d = tempfile::tempdir().unwrap();
    ok(&travcost(d.path(), &["--seed", "3", "generate", "--stock", "hill"]));
    ok(&travcost(d.path(), &["--seed", "3", "collect", "--routes", "10"]));
    let ds = Dataset::load(&d.path().join("out/dataset")).unwrap();
    let total = ds.split.train.len() + ds.split.val.len() + ds.split.test.len();
    assert!(total >= 1000, "{total} sequences");
    assert_eq!(ds.meta.seed, 3);
    for ch in travcost::dataset::GEOMETRIC_CHANNELS {
        assert!(ds.meta.channels.iter().any(|c| c == ch), "{:?}", ds.meta.channels);
    }
    assert_eq!(ds.meta.trajectories, 10);
}

#[test]
fn flat_world_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let spec = d.path().join("flat.toml");
    fs::write(&spec, flat_spec().to_toml().unwrap()).unwrap();
    ok(&travcost(d.path(), &["generate", "--spec", spec.to_str().unwrap()]));
    ok(&travcost(d.path(), &["collect", "--routes", "6"]));
    ok(&travcost(d.path(), &["train", "--epochs", "4"]));
    let stdout = ok(&travcost(d.path(), &["predict"]));
    assert!(stdout.contains("mean value"));
    let cm = travcost::costmap::CostMap::load(&d.path().join("out/reports/costmap")).unwrap();
    let mean = cm.mean_present().unwrap();
    assert!(mean >= 0.9, "mean {mean}");
    assert!(d.path().join("out/reports/costmap/costmap.png").exists());

    let stdout = ok(&travcost(d.path(), &["predict", "--pose", "15,15,0.5"]));
    assert!(stdout.contains("cells present"));

    let stdout = ok(&travcost(d.path(), &["navigate", "--trials", "1"]));
    for col in ["success", "norm_length", "rel_time", "stability"] {
        assert!(stdout.contains(col), "{stdout}");
    }
    assert!(d.path().join("out/reports/navigation.txt").exists());
}

#[test]
fn semantic_oracle_scores_perfectly() {
    let cfg = PipelineConfig::default();
    let world = generate_world(&pipeline::terrain_spec(&cfg, None, true).unwrap()).unwrap();
    let m = pipeline::score_costmap(&semantic_costmap(&world).unwrap(), &world, &cfg).unwrap();
    assert_eq!(m.all_acc, 100.0);
    assert_eq!(m.trav_acc, 100.0);
    assert_eq!(m.auc, Some(1.0));
}
