use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasediff"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn results(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap()
}

fn all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

const SMALL_GRID: &str = r#""grid": {"nx": 32, "np": 32, "x_min": -6, "x_max": 6, "p_min": -6, "p_max": 6}"#;

#[test]
fn missing_experiment_is_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"params": {"a": 1}}"#);
    for out in [
        bin().arg("validate").arg("--config").arg(&cfg).output().unwrap(),
        run(&cfg, &dir.path().join("out"), &[]),
    ] {
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("experiment"), "{err}");
    }
}

#[test]
fn schema_errors_carry_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"experiment": {"name": "relax"}, "time": {"t": 1, "dt": "fast"}}"#,
    );
    let out = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time.dt"));
}

#[test]
fn validate_accepts_shipped_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(root).unwrap() {
        let out = bin().arg("validate").arg("--config").arg(e.unwrap().path()).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        n += 1;
    }
    assert_eq!(n, 8);
}

#[test]
fn params_reports_relaxation_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", r#"{"experiment": {"name": "params", "physical": {"temperature": 1}}}"#);
    let out = dir.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let r = results(&out);
    let tau = r["relaxation_time"].as_f64().unwrap();
    assert!((tau / 7.638e-12 - 1.0).abs() < 1e-3, "{tau}");
    assert!((r["a_over_b"].as_f64().unwrap() / 3.41e4 - 1.0).abs() < 1e-12);
}

#[test]
fn module_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"experiment": {{"name": "relax", "initial": {{"kind": "gaussian_packet", "center": 0, "sigma": 1}}}},
            {SMALL_GRID}, "time": {{"t": 1, "dt": 0.5}}}}"#
    );
    let cfg = write_config(dir.path(), "r.json", &text);
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment failed"));
}

#[test]
fn relax_is_deterministic_and_fits_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"experiment": {{"name": "relax",
              "initial": {{"kind": "phase_gaussian", "x": 0.5, "p": -0.3, "std_x": 1.0, "std_p": 1.0, "kx": 0.4}}}},
            {SMALL_GRID}, "time": {{"t": 5, "dt": 0.02, "sample_every": 5}}}}"#
    );
    let cfg = write_config(dir.path(), "r.json", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&cfg, &a, &["--threads", "1"]).status.success());
    assert!(run(&cfg, &b, &["--threads", "4"]).status.success());
    assert_eq!(all_files(&a), all_files(&b));
    let r = results(&a);
    let (fit, gap) = (r["fitted_decay_rate"].as_f64().unwrap(), r["spectral_gap"].as_f64().unwrap());
    assert!((fit / gap - 1.0).abs() < 0.05, "{fit} vs {gap}");
    assert!(a.join("relax.svg").exists());
}

#[test]
fn montecarlo_seed_override_and_thread_independence() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"experiment": {{"name": "montecarlo-compare",
              "initial": {{"kind": "phase_gaussian", "x": 0.5, "p": -0.3, "std_x": 1.0, "std_p": 1.0, "kx": 0.4, "kp": -0.3}}}},
            {SMALL_GRID}, "params": {{"a": 0.5, "b": 0.5}}, "hamiltonian": {{"kind": "zero"}},
            "time": {{"t": 0.4, "dt": 0.01}}, "stochastic": {{"paths": 20000, "dt": 0.01, "seed": 1}},
            "output": {{"plots": false}}}}"#
    );
    let cfg = write_config(dir.path(), "m.json", &text);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run(&cfg, &a, &["--seed", "42", "--threads", "1"]).status.success());
    assert!(run(&cfg, &b, &["--seed", "42", "--threads", "3"]).status.success());
    assert!(run(&cfg, &c, &["--seed", "43"]).status.success());
    assert_eq!(all_files(&a), all_files(&b));
    assert_ne!(fs::read(a.join("bins.csv")).unwrap(), fs::read(c.join("bins.csv")).unwrap());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert!(!a.join("zscore.svg").exists());
    let r = results(&a);
    assert!(r["fraction_within_3_stderr"].as_f64().unwrap() > 0.95);
}

#[test]
fn manifest_is_enough_to_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"experiment": {{"name": "densities", "initial": {{"kind": "gaussian_packet", "center": 0.5, "sigma": 0.8, "momentum": 1}}}},
            {SMALL_GRID}}}"#
    );
    let cfg = write_config(dir.path(), "d.json", &text);
    let first = dir.path().join("first");
    assert!(run(&cfg, &first, &[]).status.success());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    for f in ["config.json", "density.csv", "marginal.csv", "results.json"] {
        assert!(files.contains(&f), "{f}");
    }
    let second = dir.path().join("second");
    assert!(run(&first.join("config.json"), &second, &[]).status.success());
    assert_eq!(all_files(&first), all_files(&second));
    let r = results(&first);
    assert!((r["total"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn remaining_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let packet = r#""initial": {"kind": "gaussian_packet", "center": 1.0, "sigma": 0.7071067811865476}"#;
    let harmonic = r#""hamiltonian": {"kind": "harmonic", "mass": 1, "omega": 1}"#;
    let cases = [
        ("spectrum", r#"{"experiment": {"name": "spectrum", "levels": 3}}"#.to_string(), "spectrum.csv"),
        (
            "evolve",
            format!(r#"{{"experiment": {{"name": "evolve", {packet}}}, {SMALL_GRID}, {harmonic}, "time": {{"t": 0.5, "dt": 0.05}}, "output": {{"fields": true}}}}"#),
            "final.bin",
        ),
        (
            "fastslow",
            format!(r#"{{"experiment": {{"name": "fastslow", {packet}}}, {SMALL_GRID}, "params": {{"a": 2, "b": 4}}, {harmonic}, "time": {{"t": 2, "dt": 0.0125, "sample_every": 4}}}}"#),
            "trace.csv",
        ),
        (
            "schrodinger-compare",
            format!(r#"{{"experiment": {{"name": "schrodinger-compare", {packet}}}, {SMALL_GRID}, {harmonic}, "time": {{"t": 0.5, "dt": 0.005}}}}"#),
            "compare.csv",
        ),
    ];
    for (name, text, artifact) in cases {
        let cfg = write_config(dir.path(), &format!("{name}.json"), &text);
        let out = dir.path().join(name);
        let o = run(&cfg, &out, &[]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(artifact).exists(), "{name}");
        assert!(out.join("manifest.json").exists());
    }
    let r = results(&dir.path().join("spectrum"));
    assert!((r["modes"][0]["gap"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    let r = results(&dir.path().join("schrodinger-compare"));
    let gap = r["operator_gap"].as_f64().unwrap();
    assert!(gap < 2e-3, "{gap}");
    let csv = fs::read_to_string(dir.path().join("fastslow/trace.csv")).unwrap();
    assert!(csv.starts_with("t,norm,residual,slow_error\n"));
}
