use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn maplab(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maplab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn maplab")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn map_scalar_example_recovers_half_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = maplab(&["map"], &config("scalar_1d.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("map_result.json"));
    assert!((v["minimizer"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((v["value"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(v["converged"], true);
    for key in ["minimizer", "value", "iterations", "grad_norm", "converged"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn map_without_data_stays_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = maplab(&["map"], &config("zero_potential.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&dir.path().join("map_result.json"));
    assert!(v["minimizer"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
}

#[test]
fn increasing_sigmas_exit_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = maplab(&["map"], &config("malformed_sigmas.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prior.sigmas"));
    assert!(!dir.path().join("map_result.json").exists());
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"prior": {"p": 2, "sigmas": [1.0]}, "run": {"seeed": 1}}"#);
    let out = maplab(&["map"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.seeed"));
    let out = maplab(&["map"], &dir.path().join("absent.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overflowing_misfit_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"prior": {"p": 2, "sigmas": [1.0]},
            "forward": {"kind": "linear", "matrix": [[1e300]], "data": [1e300]}}"#,
    );
    assert_eq!(maplab(&["map"], &cfg, dir.path()).status.code(), Some(3));
}

#[test]
fn non_convergence_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"prior": {"p": 2, "sigmas": [1.0, 0.5]},
            "forward": {"kind": "user", "name": "cubic", "data": [3.0, -2.0]},
            "run": {"x0": [5.0, 5.0], "tolerances": {"om_grad": 1e-14, "max_iter": 1}}}"#,
    );
    let out = maplab(&["map"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("map_result.json"))["converged"], false);
}

#[test]
fn figure_tables_cover_the_grid_and_are_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let out = maplab(&["figure"], &config("fig1.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    for name in ["fig1_left.csv", "fig1_right.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(!text.contains('\r'));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,value"));
        let rows: Vec<[f64; 3]> = lines
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        assert_eq!(rows.len(), 201 * 201);
        let at = |i: usize, j: usize| rows[i * 201 + j][2];
        for (i, j) in [(0, 0), (13, 170), (100, 37), (200, 5)] {
            assert_eq!(at(i, j), at(200 - i, 200 - j));
            assert_eq!(at(i, j), at(j, i));
        }
    }
}

#[test]
fn figure_requires_two_dimensional_spec() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"prior": {"p": 1, "sigmas": [1.0]},
            "convexify": {"p": 1, "rho": [1.0], "gamma": 1.0, "beta": 0.5}}"#,
    );
    let out = maplab(&["figure"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("convexify.rho"));
}

#[test]
fn amf_single_radius_gives_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"prior": {"p": 2, "sigmas": [1.0]},
            "forward": {"kind": "linear", "matrix": [[1.0]], "data": [2.0]},
            "run": {"n_samples": 20000, "deltas": [0.25], "lipschitz_trials": 200}}"#,
    );
    let out = maplab(&["amf"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("amf_trace.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1);
    let rec: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert!((rec["center"][0].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert_eq!(rec["indeterminate"], false);
}

#[test]
fn amf_without_data_keeps_centers_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = maplab(&["amf"], &config("zero_potential.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    for line in std::fs::read_to_string(dir.path().join("amf_trace.jsonl")).unwrap().lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        let center: Vec<f64> = serde_json::from_value(rec["center"].clone()).unwrap();
        let norm = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        let resolution = rec["positional_uncertainty"].as_f64().unwrap();
        assert!(norm <= 3.0 * resolution, "{center:?}");
        assert!(rec["achieved_ratio"]["value"].as_f64().unwrap() > 0.999);
    }
}

#[test]
fn verify_report_is_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let out = maplab(
        &["verify", "--suite", "convexity", "--suite", "om-limit"],
        &config("scalar_1d.json"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&dir.path().join("verify_report.json"));
    assert_eq!(v["suites"], serde_json::json!(["convexity", "om-limit"]));
    let checks = v["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert!(!c["anchor"].as_str().unwrap().is_empty());
        assert!(matches!(c["status"].as_str(), Some("pass" | "indeterminate")));
    }
    let final_rel = checks.iter().find(|c| c["check_id"] == "om_limit.final_relative_error").unwrap();
    assert!(final_rel["observed"].as_f64().unwrap() <= 0.02);
}

#[test]
fn unknown_suite_is_rejected_by_the_parser() {
    let dir = tempfile::tempdir().unwrap();
    let out = maplab(&["verify", "--suite", "nope"], &config("scalar_1d.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_sampled_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    maplab(&["sample"], &config("zero_potential.json"), a.path());
    maplab(&["sample", "--seed", "99"], &config("zero_potential.json"), b.path());
    let read = |d: &Path| std::fs::read(d.join("samples.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
    let text = String::from_utf8(read(a.path())).unwrap();
    assert_eq!(text.lines().next(), Some("x1,x2,x3,x4"));
    assert_eq!(text.lines().count(), 1001);
}
