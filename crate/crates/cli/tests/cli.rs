use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;

const EXPERIMENTS: [&str; 8] =
    ["coarea-check", "essential-bound", "gen-cover-bound", "degree-bound", "sharp-scaling", "division-demo", "linalg-constant", "optimize"];

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn pblab(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pblab"));
    c.args(args).env_remove("PBLAB_OUT");
    c
}

fn run(name: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![name, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    pblab(&args).output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn coarea_default_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("coarea-check", &config("coarea-check"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    assert_eq!(r["pass"], true);
    assert!(r["results"]["coarea"]["rel_err"].as_f64().unwrap() <= 0.02);
    assert!(tmp.path().join("tables/coarea.csv").exists());
    assert!(tmp.path().join("plots/bracket.svg").exists());
    assert!(r["provenance"]["git_hash"].is_string());
}

#[test]
fn every_default_config_passes_within_a_minute() {
    for name in EXPERIMENTS {
        let tmp = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let out = run(name, &config(name), tmp.path(), &[]);
        let elapsed = start.elapsed();
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(elapsed < Duration::from_secs(60), "{name} took {elapsed:?}");
        let r = report(tmp.path());
        assert_eq!(r["experiment"], name);
        assert!(!r["checks"].as_array().unwrap().is_empty());
        assert!(std::fs::read_dir(tmp.path().join("tables")).unwrap().count() > 0);
    }
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for json in [
        r#"{"experiment": "coarea-check", "resolutoin": 64}"#,
        r#"{"experiment": "coarea-check", "params": {"pairs": "trig"}}"#,
        r#"{"experiment": "essential-bound", "cover": {"kind": "sharp_lattice", "k": 4, "radius": 0.2}}"#,
    ] {
        let cfg = write_config(tmp.path(), json);
        let name = if json.contains("coarea") { "coarea-check" } else { "essential-bound" };
        let out = run(name, &cfg, &tmp.path().join("out"), &[]);
        assert_eq!(out.status.code(), Some(2), "{json}");
    }
}

#[test]
fn invalid_values_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, json) in [
        ("coarea-check", r#"{"experiment": "essential-bound"}"#),
        ("coarea-check", r#"{"experiment": "coarea-check", "resolution": 4}"#),
        ("coarea-check", r#"{"experiment": "coarea-check", "tolerance": 2.0}"#),
        ("coarea-check", r#"{"experiment": "coarea-check", "surface": {"kind": "sphere", "radius": 1.0}}"#),
        (
            "essential-bound",
            r#"{"experiment": "essential-bound", "cover": {"kind": "height_bands", "bands": 3, "overlap": 0.2}, "partition": {"kind": "sharp"}}"#,
        ),
        ("coarea-check", "{ not json"),
    ] {
        let cfg = write_config(tmp.path(), json);
        let out = run(name, &cfg, &tmp.path().join("out"), &[]);
        assert_eq!(out.status.code(), Some(2), "{json}");
    }
    let out = run("coarea-check", &tmp.path().join("missing.json"), &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn randomized_experiments_need_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"experiment": "linalg-constant", "params": {"instances": 200, "cube_instances": 20, "shear_vectors": 1000, "chain_instances": 10}}"#,
    );
    let out = run("linalg-constant", &cfg, &tmp.path().join("a"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = run("linalg-constant", &cfg, &tmp.path().join("b"), &["--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(report(&tmp.path().join("b"))["provenance"]["seed"], 4);
}

#[test]
fn reports_do_not_depend_on_threads_or_destination() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"experiment": "division-demo", "seed": 5, "resolution": 128,
            "cover": {"kind": "disc_lattice", "k": 4, "radius": 0.19, "jitter": 0.01},
            "params": {"pairs": 4, "multiplicities": [4], "permutations": 40}}"#,
    );
    let mut bytes = Vec::new();
    for (threads, dir) in [("1", "one"), ("3", "three"), ("3", "again")] {
        let out = run("division-demo", &cfg, &tmp.path().join(dir), &["--threads", threads]);
        assert!(out.status.code().unwrap() < 2, "{}", String::from_utf8_lossy(&out.stderr));
        bytes.push(std::fs::read(tmp.path().join(dir).join("report.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[1], bytes[2]);
}

#[test]
fn pblab_out_overrides_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"experiment": "coarea-check", "resolution": 64}"#);
    let env_dir = tmp.path().join("from_env");
    let flag_dir = tmp.path().join("from_flag");
    let out = pblab(&["coarea-check", "--config", cfg.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()])
        .env("PBLAB_OUT", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.code().unwrap() < 2);
    assert!(env_dir.join("report.json").exists());
    assert!(!flag_dir.exists());
}

#[test]
fn resolution_flag_overrides_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"experiment": "sharp-scaling", "resolution": 256, "params": {"lattice_sizes": [4]}}"#);
    let out = run("sharp-scaling", &cfg, tmp.path(), &["--resolution", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(tmp.path());
    assert_eq!(r["provenance"]["resolution"], 64);
    assert_eq!(r["inputs"]["resolution"], 64);
}

#[test]
fn failed_checks_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    // a closed-form check at a resolution this coarse misses the 0.1% tolerance
    let cfg = write_config(tmp.path(), r#"{"experiment": "coarea-check", "resolution": 8, "tolerance": 0.001}"#);
    let out = run("coarea-check", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(report(tmp.path())["pass"], false);
}

#[test]
fn default_configs_use_only_schema_keys() {
    let schema: Value = serde_json::from_str(include_str!("../config.schema.json")).unwrap();
    let top = schema["properties"].as_object().unwrap();
    let params = schema["properties"]["params"]["properties"].as_object().unwrap();
    assert_eq!(schema["properties"]["experiment"]["enum"].as_array().unwrap().len(), EXPERIMENTS.len());
    for name in EXPERIMENTS {
        let cfg: Value = serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap();
        assert_eq!(cfg["experiment"], name);
        for key in cfg.as_object().unwrap().keys() {
            assert!(top.contains_key(key), "{name}: {key}");
        }
        if let Some(p) = cfg.get("params") {
            for key in p.as_object().unwrap().keys() {
                assert!(params.contains_key(key), "{name}: params.{key}");
            }
        }
    }
}
