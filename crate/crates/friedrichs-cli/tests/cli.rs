//! End-to-end runs of the compiled binary: artifact layout, the documented
//! exit codes, determinism of the exported bytes, and the environment
//! fallback for the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_friedrichs")
}

fn model_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

/// Fresh scratch directory under the target-adjacent temp root.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("friedrichs-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

#[test]
fn check_single_criterion_passes_and_reports() {
    let dir = scratch("check");
    let out = run(&[
        "check",
        "--only",
        "8",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("criterion 8"), "stdout: {stdout}");
    assert!(stdout.contains("PASS"), "stdout: {stdout}");

    let report: serde_json::Value = serde_json::from_str(&read(&dir, "check.json")).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 1);
    assert_eq!(report[0]["index"], 8);
    assert_eq!(report[0]["passed"], true);

    let meta: serde_json::Value = serde_json::from_str(&read(&dir, "metadata.json")).unwrap();
    assert_eq!(meta["model_sha256"], "builtin-scenarios");
    assert_eq!(meta["options"]["subcommand"], "check");
    assert_eq!(meta["options"]["verdict"], "pass");
}

#[test]
fn evolve_without_coupling_keeps_survival_at_one() {
    let dir = scratch("free");
    let model = model_path("zero_coupling.toml");
    let out = run(&[
        "evolve",
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--tmax",
        "5",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let survival = read(&dir, "survival.csv");
    let mut rows = 0;
    for line in survival.lines().skip(1) {
        let p: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((p - 1.0).abs() < 1e-12, "survival drifted to {p}");
        rows += 1;
    }
    assert!(rows >= 100);
    assert!(dir.join("volterra.csv").exists());
    assert!(dir.join("markovian.csv").exists());
}

#[test]
fn poles_on_white_noise_coupling_lists_one_clean_pole_per_level() {
    let dir = scratch("poles");
    let model = model_path("markovian_flat.toml");
    let out = run(&[
        "poles",
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = read(&dir, "poles.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "expected one pole per level:\n{csv}");
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let trace_re: f64 = cells[4].parse().unwrap();
        let trace_im: f64 = cells[5].parse().unwrap();
        assert!((trace_re - 1.0).abs() < 1e-8, "trace {trace_re}");
        assert!(trace_im.abs() < 1e-8, "trace im {trace_im}");
    }
    assert!(dir.join("poles.json").exists());
    assert!(dir.join("projectors.json").exists());
    assert!(dir.join("pole_trajectory.csv").exists());
}

#[test]
fn semigroup_deviation_vanishes_for_the_exact_semigroup() {
    let dir = scratch("semigroup");
    let model = model_path("markovian_flat.toml");
    let out = run(&[
        "semigroup",
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--step",
        "0.25",
        "--tmax",
        "8",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value = serde_json::from_str(&read(&dir, "semigroup.json")).unwrap();
    let max_dev = report["report"]["max_deviation"].as_f64().unwrap();
    assert!(max_dev < 1e-10, "semigroup deviation {max_dev}");
    assert_eq!(report["report"]["source"], "markovian");
    // White-noise coupling is the ideal the profile measures distance from.
    assert_eq!(report["profile"]["kernel_width"].as_f64().unwrap(), 0.0);
}

#[test]
fn kernel_exports_tables_and_hashed_metadata() {
    let dir = scratch("kernel");
    let model = model_path("one_level_lorentzian.toml");
    let out = run(&[
        "kernel",
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--tmax",
        "2",
        "--step",
        "0.1",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let kernel_t = read(&dir, "kernel_t.csv");
    assert!(kernel_t.starts_with("t,re_a_0_0,im_a_0_0\n"));
    assert_eq!(kernel_t.lines().count(), 22);
    assert!(dir.join("spectral_density.csv").exists());
    assert!(dir.join("kernel_z.csv").exists());

    let meta: serde_json::Value = serde_json::from_str(&read(&dir, "metadata.json")).unwrap();
    let hash = meta["model_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(meta["options"]["model_path"].as_str().is_some());
    assert!(meta.get("seed").is_none());
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let dir_a = scratch("det-a");
    let dir_b = scratch("det-b");
    let model = model_path("two_level_narrow.toml");
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "evolve",
            "--model",
            model.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--tmax",
            "3",
            "--step",
            "0.05",
            "--seed",
            "7",
        ]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["volterra.csv", "markovian.csv", "survival.csv", "metadata.json"] {
        let a = fs::read(dir_a.join(name)).unwrap();
        let b = fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let meta = read(&dir_a, "metadata.json");
    assert!(meta.contains("\"seed\": 7"), "{meta}");
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = scratch("env");
    let model = model_path("one_level_lorentzian.toml");
    let out = Command::new(bin())
        .args(["poles", "--model", model.to_str().unwrap()])
        .env("FRIEDRICHS_OUT", &dir)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("poles.csv").exists());
    assert!(dir.join("metadata.json").exists());
}

#[test]
fn oracle_exports_spectrum_and_decaying_survival() {
    let dir = scratch("oracle");
    let model = model_path("one_level_lorentzian.toml");
    let out = run(&[
        "oracle",
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--grid-m",
        "320",
        "--tmax",
        "5",
        "--step",
        "0.25",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    assert!(dir.join("oracle.csv").exists());
    assert!(dir.join("eigenvalues.csv").exists());
    assert!(dir.join("weights_level0.csv").exists());
    let survival = read(&dir, "survival.csv");
    let last: f64 = survival
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(last < 1.0 && last > 0.0, "survival at tmax: {last}");

    let meta: serde_json::Value = serde_json::from_str(&read(&dir, "metadata.json")).unwrap();
    let defect: f64 = meta["options"]["gram_defect"].as_str().unwrap().parse().unwrap();
    assert!(defect < 1e-10);
    assert!(meta["options"]["t_recurrence"].as_str().is_some());
}

#[test]
fn background_records_the_contour_offset() {
    let dir = scratch("background");
    let model = model_path("half_line_flat.toml");
    let out = run(&[
        "background",
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--step",
        "2",
        "--tmax",
        "4",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = read(&dir, "background.csv");
    assert!(csv.starts_with("t,re_b_0_0,im_b_0_0,truncation_estimate,quadrature_estimate\n"));
    assert_eq!(csv.lines().count(), 3);

    let meta: serde_json::Value = serde_json::from_str(&read(&dir, "metadata.json")).unwrap();
    assert!(meta["contour_eps"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_model_is_a_usage_error() {
    let dir = scratch("usage");
    let out = run(&["poles", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--model"), "stderr: {stderr}");
}
