use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_levyflat");

fn levyflat(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("LEVYFLAT_SEED").output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

#[test]
fn sine_flatness_and_jump_closure_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyflat(&[
        "run",
        "--model",
        "sine-counterexample",
        "--tests",
        "flatness,jump-closure",
        "--output",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["flatness"]["flatness_global"], 0);
    assert_eq!(r["flatness"]["classification"], "General");
    let names: Vec<&str> = r["tests"].as_array().unwrap().iter().map(|t| t["test_name"].as_str().unwrap()).collect();
    assert_eq!(names, ["jump_closure", "flatness_bound"]);
    assert_eq!(r["tests"][0]["verdict"], "pass");
    assert_eq!(r["tests"][1]["verdict"], "skip");
    assert!(!dir.path().join("path_0.csv").exists());
    let csv = std::fs::read_to_string(dir.path().join("flatness.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("point_index,d,sv_gap"));
    assert_eq!(lines.count(), 60);
}

#[test]
fn noninvariant_jump_closure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyflat(&[
        "run",
        "--model",
        "fixture:sine-noninvariant",
        "--tests",
        "jump-closure",
        "--output",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(dir.path())["exit_code"], 1);
}

#[test]
fn misspelled_config_key_exits_two_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"fixture:affine\"\n[numerics]\nn_path = 10\n").unwrap();
    let out = levyflat(&["run", "--config", cfg.to_str().unwrap(), "--output", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_path"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn bad_values_and_names_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    for args in [
        vec!["run", "--model", "no-such-model", "--output", &o],
        vec!["run", "--model", "fixture:affine", "--tests", "tangent", "--output", &o],
        vec!["run", "--model", "fixture:affine", "--dt", "-1", "--output", &o],
        vec!["run", "--output", &o],
        vec!["run", "--config", "/nonexistent/run.toml"],
    ] {
        let out = levyflat(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn invalid_model_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"hjmm-vasicek\"\n[params.vasicek]\nn_grid = 1\n").unwrap();
    let out = levyflat(&["run", "--config", cfg.to_str().unwrap(), "--output", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_config_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": "fixture:cylinder", "tests": ["flatness"], "seed": 5, "numerics": {"n_samples": 8, "radius": 0.2}}"#,
    )
    .unwrap();
    let out = levyflat(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--radius",
        "0.05",
        "--output",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["config"]["numerics"]["n_samples"], 8);
    assert_eq!(r["config"]["numerics"]["radius"], 0.05);
    assert_eq!(r["flatness"]["options"]["radius"], 0.05);
    assert_eq!(r["seed"]["value"], 5);
    assert_eq!(r["seed"]["source"], "config-file");
    assert_eq!(r["flatness"]["flatness_global"], 1);
    assert_eq!(r["flatness"]["classification"], "Foliation");
}

#[test]
fn environment_seed_is_used_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["run", "--model", "fixture:affine", "--tests", "flatness", "--output", &out_arg(dir.path())])
        .env("LEVYFLAT_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["seed"]["value"], 77);
    assert_eq!(r["seed"]["source"], "environment");
    assert_eq!(r["seed"]["env_value"], "77");
    assert_eq!(r["config"]["seed"], 77);

    // A flag wins over the environment, which is still echoed.
    let out = Command::new(BIN)
        .args(["run", "--model", "fixture:affine", "--tests", "flatness", "--seed", "3"])
        .args(["--output", &out_arg(dir.path())])
        .env("LEVYFLAT_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["seed"]["value"], 3);
    assert_eq!(r["seed"]["source"], "flag");
    assert_eq!(r["seed"]["env_value"], "77");

    let out = Command::new(BIN)
        .args(["run", "--model", "fixture:affine", "--output", &out_arg(dir.path())])
        .env("LEVYFLAT_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn path_csv_schema_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyflat(&[
        "run",
        "--model",
        "fixture:affine",
        "--tests",
        "path-invariance,flatness",
        "--n-paths",
        "4",
        "--dt",
        "0.01",
        "--output",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("path_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,flag,v_0,v_1,v_2,v_3,v_4"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 7 && ["step", "pre", "post"].contains(&r[1])));
    assert_eq!(rows.iter().filter(|r| r[1] == "step").count(), 101);
    assert_eq!(rows.iter().filter(|r| r[1] == "pre").count(), rows.iter().filter(|r| r[1] == "post").count());

    let plots = dir.path().join("plots");
    let out = levyflat(&[
        "emit-plots",
        dir.path().join("report.json").to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let distance = std::fs::read_to_string(plots.join("distance.dat")).unwrap();
    let values: Vec<f64> = distance
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            assert_eq!(cols.len(), 2);
            cols[1].parse().unwrap()
        })
        .collect();
    assert_eq!(values.len(), rows.len());
    assert!(values.iter().all(|&d| d < 1e-2));
    assert!(plots.join("spectra.dat").exists());
    assert!(plots.join("angles.dat").exists());
}

#[test]
fn negative_fixture_distance_plateau() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyflat(&[
        "run",
        "--model",
        "fixture:sine-noninvariant",
        "--tests",
        "path-invariance",
        "--n-paths",
        "2",
        "--horizon",
        "4",
        "--dt",
        "0.01",
        "--output",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = levyflat(&["emit-plots", dir.path().join("report.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let distance = std::fs::read_to_string(dir.path().join("distance.dat")).unwrap();
    let max = distance
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max > 0.1, "{max}");
}

#[test]
fn empty_selection_writes_no_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyflat(&["run", "--model", "fixture:affine", "--tests", "", "--output", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(dir.path())["tests"].as_array().unwrap().is_empty());
    let plots = dir.path().join("plots");
    let out = levyflat(&[
        "emit-plots",
        dir.path().join("report.json").to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&plots).unwrap().count(), 0);
}

#[test]
fn emit_plots_without_report_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyflat(&["emit-plots", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_models_names_every_model() {
    let out = levyflat(&["list-models"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in levyflat::models::MODEL_NAMES {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn report_echoes_thresholds_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = levyflat(&[
        "run",
        "--model",
        "fixture:cylinder",
        "--tests",
        "tangency,decompose",
        "--tangency-threshold",
        "1e-9",
        "--output",
        &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["config"]["thresholds"]["tangency"], 1e-9);
    assert_eq!(r["tests"][0]["threshold"], 1e-9);
    assert_eq!(r["config"]["thresholds"]["decompose"], 1e-8);
    assert_eq!(r["decompose"]["options"]["extent"], 2.0);
    assert_eq!(r["model"]["k_set"], "K = {1}");
    assert_eq!(r["config"]["numerics"]["eps_min"], 1e-6);
}
