use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const HALF_PLANE: &str = "kind = \"spectrum\"\n[spectrum]\ncone = \"cone:circle:theta=3.141592653589793\"\nmodes = 4\n";

#[test]
fn half_plane_spectrum_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", HALF_PLANE);
    let out = lab(&["spectrum", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("o/spectrum.spectrum.csv")).unwrap();
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    // columns: k, eigenvalue, exponent, degree, multiplicity; λ_k = (2πk/θ)² = 4k²
    let first = rows.iter().find(|r| r[0] == 1.0).unwrap();
    assert!((first[1] - 4.0).abs() < 1e-12 && (first[2] - 2.0).abs() < 1e-12);
    let report = json(&dir.path().join("o/spectrum.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["passed"], true);
}

#[test]
fn unknown_keys_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[spectrum]\nthetta = 3.0\n");
    let out = lab(&["spectrum", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["field"], "thetta");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", HALF_PLANE);
    let out = lab(&["cutoff", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn frozen_iteration_has_no_defect() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &[
            "campanato",
            "--coeff",
            "convex_graph:1,1,1",
            "--frozen",
            "convex_graph:1,1,1",
            "--levels",
            "3",
            "--h",
            "0.0625",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = json(&dir.path().join("o/campanato.json"));
    assert_eq!(report["config"]["campanato"]["cells"], 32);
}

#[test]
fn reports_are_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.toml",
        "kind = \"kernel-check\"\nseed = 7\n[kernel_check]\npairs = 300\n",
    );
    let mut reports = Vec::new();
    for (w, o) in [("1", "a"), ("4", "b"), ("4", "c")] {
        let out = lab(&["kernel-check", "--config", &cfg, "--workers", w, "--out", o], dir.path());
        assert_eq!(out.status.code(), Some(0));
        reports.push(fs::read(dir.path().join(o).join("kernel-check.json")).unwrap());
    }
    assert!(reports.windows(2).all(|p| p[0] == p[1]));
    // a different seed samples different pairs
    let out = lab(&["kernel-check", "--config", &cfg, "--seed", "8", "--out", "d"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(reports[0], fs::read(dir.path().join("d/kernel-check.json")).unwrap());

    // pairings reduce in parallel; the order of summation must not depend on the pool
    let weak: Vec<Vec<u8>> = [("1", "w1"), ("3", "w3")]
        .iter()
        .map(|(w, o)| {
            let out = lab(&["check-very-weak", "--workers", w, "--out", o], dir.path());
            assert_eq!(out.status.code(), Some(0));
            fs::read(dir.path().join(o).join("check-very-weak.json")).unwrap()
        })
        .collect();
    assert_eq!(weak[0], weak[1]);
}

#[test]
fn report_config_echo_reruns_to_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", HALF_PLANE);
    assert_eq!(lab(&["spectrum", "--config", &cfg, "--out", "a"], dir.path()).status.code(), Some(0));
    let out = lab(&["spectrum", "--config", "a/spectrum.json", "--out", "b"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("a/spectrum.json")).unwrap(),
        fs::read(dir.path().join("b/spectrum.json")).unwrap()
    );
}

#[test]
fn empty_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.toml", "");
    let out = lab(&["suite", "--config", &m, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("o/suite.json"))["members"], serde_json::json!([]));
}

#[test]
fn suite_failure_names_the_member() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.toml",
        "workers = 2\n\
         [[run]]\nname = \"wedge\"\n[run.config]\nkind = \"spectrum\"\nspectrum = { cone = \"cone:circle:theta=3.141592653589793\", modes = 4 }\n\
         [[run]]\nname = \"strict-kernel\"\n[run.config]\nkind = \"kernel-check\"\nkernel_check = { pairs = 50, mass_tol = 1e-300 }\n",
    );
    let out = lab(&["suite", "--config", &m, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["members"], serde_json::json!(["strict-kernel"]));
    let summary = json(&dir.path().join("o/suite.json"));
    assert_eq!(summary["members"][0]["name"], "wedge");
    assert_eq!(summary["members"][0]["passed"], true);
    assert!(dir.path().join("o/wedge/spectrum.json").exists());
    let csv = fs::read_to_string(dir.path().join("o/suite.csv")).unwrap();
    assert!(csv.contains("strict-kernel,kernel-check,fail"));
}

#[test]
fn invalid_suite_member_stops_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.toml",
        "[[run]]\nname = \"ok\"\nconfig = { kind = \"spectrum\" }\n\
         [[run]]\nname = \"broken\"\nconfig = { kind = \"cutoff\", cutoff = { tol = -1.0 } }\n",
    );
    let out = lab(&["suite", "--config", &m, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["field"].as_str().unwrap().starts_with("broken."));
    assert!(!dir.path().join("o").exists());
}
