use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rbal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbal"))
        .args(args)
        .output()
        .expect("spawn rbal")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn config_json(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, value: &serde_json::Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_example_passes() {
    let out = rbal(&["verify-example"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("5.415"));
    assert_eq!(text.lines().last(), Some("PASS"));
    assert_eq!(rbal(&["verify-example"]).stdout, out.stdout);
}

#[test]
fn verify_example_fails_on_perturbed_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config_json("synthetic.json");
    cfg["decision"]["u_action"][1] = (-31.0).into();
    let path = write_config(tmp.path(), "perturbed.json", &cfg);
    let out = rbal(&["verify-example", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(text.contains("FAIL"));
    assert!(text.contains("delta"));
}

#[test]
fn missing_field_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config_json("synthetic.json");
    cfg["run"].as_object_mut().unwrap().remove("initial_fraction");
    let path = write_config(tmp.path(), "missing.json", &cfg);
    let out = rbal(&["run", "--config", &path, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("initial_fraction"), "{}", stderr(&out));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(rbal(&["run", "--config", "/nonexistent.json"]).status.code(), Some(3));
    assert_eq!(rbal(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rbal(&[]).status.code(), Some(1));
    assert_eq!(rbal(&["--help"]).status.code(), Some(0));
    // only --seed and --out may override the config
    assert_eq!(
        rbal(&["run", "--config", config("synthetic.json").to_str().unwrap(), "--repetitions", "3"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("synthetic.json");
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    for p in [&a, &b] {
        let out = rbal(&["generate", "--config", cfg.to_str().unwrap(), "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1998);
    assert!(text.starts_with("f1,f2,label\n"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = tmp.path().join("c.csv");
    rbal(&["generate", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "2"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn run_with_infinite_cost_and_seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config_json("synthetic.json");
    cfg["decision"]["c_ins"] = "inf".into();
    cfg["run"]["repetitions"] = 1.into();
    let path = write_config(tmp.path(), "inf.json", &cfg);
    let out_dir = tmp.path().join("out");
    let out = rbal(&["run", "--config", &path, "--out", out_dir.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let curve = std::fs::read_to_string(out_dir.join("learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 2);
    assert!(curve.lines().nth(1).unwrap().starts_with("0,"));

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["base_seed"], 99);
    assert_eq!(manifest["config"]["decision"]["c_ins"], "inf");
    assert_eq!(manifest["config"]["outputs"]["directory"], out_dir.to_str().unwrap());
}

#[test]
fn subcommands_write_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config_json("synthetic.json");
    cfg["run"]["repetitions"] = 2.into();
    cfg["outputs"]["directory"] = tmp.path().join("configured").to_str().unwrap().into();
    let path = write_config(tmp.path(), "small.json", &cfg);

    let out = rbal(&["run", "--config", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let dir = tmp.path().join("configured");
    for f in [
        "learning_curve.csv",
        "traces.csv",
        "query_log.csv",
        "evpi_grid_initial.csv",
        "evpi_grid_final.csv",
        "map_summary.json",
        "manifest.json",
    ] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");

    let curve = std::fs::read(dir.join("learning_curve.csv")).unwrap();
    std::fs::remove_file(dir.join("learning_curve.csv")).unwrap();
    let out = rbal(&["curves", "--config", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read(dir.join("learning_curve.csv")).unwrap(), curve);
    assert_eq!(rbal(&["curves"]).status.code(), Some(1));

    let map_dir = tmp.path().join("map");
    let out = rbal(&["evpi-map", "--config", &path, "--out", map_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let grid = std::fs::read_to_string(map_dir.join("evpi_grid_initial.csv")).unwrap();
    assert_eq!(grid.lines().count(), 100 * 100 + 2);
    assert_eq!(
        std::fs::read(map_dir.join("evpi_grid_initial.csv")).unwrap(),
        std::fs::read(dir.join("evpi_grid_initial.csv")).unwrap()
    );

    let base_dir = tmp.path().join("baseline");
    let out = rbal(&["baseline", "--config", &path, "--out", base_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let curve = std::fs::read_to_string(base_dir.join("learning_curve.csv")).unwrap();
    let first = curve.lines().nth(1).unwrap();
    assert!(first.starts_with("0,,,"), "{first}");
}
