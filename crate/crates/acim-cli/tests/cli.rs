//! End-to-end tests of the `acim` binary: exit codes, artifact formats,
//! determinism, and the documented config-handling rules.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn acim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acim"))
        .args(args)
        .current_dir(dir)
        .env_remove("ACIM_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(code), "stdout:\n{stdout}\nstderr:\n{stderr}");
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing artifact {name}: {e}"))
}

/// Data rows of a CSV artifact, after the hash comment and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    let hash_line = lines.next().expect("hash line");
    assert!(
        hash_line.starts_with("# config_sha256: ") && hash_line.len() == 17 + 64,
        "bad hash line: {hash_line}"
    );
    lines.next().expect("header line");
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const MARKOV3_SWEEP: &str = r#"{
    "map": {"name": "markov3"},
    "noise": {"profile": "biweight"},
    "n": 64,
    "p": 2.0,
    "delta_list": [0.1, 0.05],
    "seed": 11
}"#;

#[test]
fn doubling_density_is_exactly_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["density", "--map.name", "doubling", "--noise.profile", "biweight", "--noise.delta", "0.1", "--n", "256", "--p", "2"],
    );
    assert_exit(&out, 0);
    let rows = csv_rows(&read(dir.path(), "density.csv"));
    assert_eq!(rows.len(), 256);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], i.to_string());
        let h: f64 = row[1].parse().unwrap();
        assert!((h - 1.0).abs() <= 1e-10, "cell {i}: {h}");
    }
}

#[test]
fn markov3_two_cell_density_is_the_exact_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["density", "--map.name", "markov3", "--noise.profile", "biweight", "--n", "2", "--p", "2"],
    );
    assert_exit(&out, 0);
    let rows = csv_rows(&read(dir.path(), "density.csv"));
    let h: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((h[0] - 4.0 / 3.0).abs() < 1e-10 && (h[1] - 2.0 / 3.0).abs() < 1e-10, "{h:?}");
}

#[test]
fn identical_configs_give_byte_identical_artifacts() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let cfg = write_config(dir.path(), "c.json", MARKOV3_SWEEP);
        let out = acim(dir.path(), &["sweep", "--config", cfg.to_str().unwrap()]);
        assert_exit(&out, 0);
    }
    for name in ["sweep.csv", "sweep.json"] {
        assert_eq!(read(dir_a.path(), name), read(dir_b.path(), name), "{name} differs");
    }
}

#[test]
fn sweep_json_round_trips_and_carries_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MARKOV3_SWEEP);
    let out = acim(dir.path(), &["sweep", "--config", cfg.to_str().unwrap()]);
    assert_exit(&out, 0);
    let text = read(dir.path(), "sweep.json");
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let reserialized = serde_json::to_string(&value).unwrap();
    let reparsed: serde_json::Value = serde_json::from_str(&reserialized).unwrap();
    assert_eq!(value, reparsed);
    assert_eq!(value["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(value["n"], 64);
    assert_eq!(value["rows"].as_array().unwrap().len(), 2);
    assert!(value["rows"][0]["l1_error"].as_f64().unwrap() > 0.0);
    // The CSV sees the same numbers at full precision.
    let rows = csv_rows(&read(dir.path(), "sweep.csv"));
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.1);
    assert_eq!(
        rows[1][1].parse::<f64>().unwrap(),
        value["rows"][1]["l1_error"].as_f64().unwrap()
    );
}

#[test]
fn increasing_delta_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["sweep", "--map.name", "markov3", "--noise.profile", "biweight", "--n", "64", "--p", "2", "--delta_list", "[0.05,0.1]"],
    );
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly decreasing"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["frobulate"],
        vec!["density", "--config", "/no/such/file.json"],
        vec!["density", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "64"],
        vec!["density", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "64", "--p", "2", "--grid_size", "10"],
        vec!["density", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "1", "--p", "2"],
        vec!["density", "--map.name", "doubling", "--noise.profile", "biweight", "--noise.delta", "0.3", "--n", "64", "--p", "2"],
        vec!["density", "--map.name", "sine", "--noise.profile", "biweight", "--n", "64", "--p", "2"],
        vec!["osc", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "64", "--p", "2"],
        vec!["simulate", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "64", "--p", "2"],
    ];
    for args in cases {
        let out = acim(dir.path(), &args);
        assert_exit(&out, 2);
        assert!(!out.stderr.is_empty(), "no diagnostic for {args:?}");
    }
}

#[test]
fn help_prints_usage_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(dir.path(), &["help"]);
    assert_exit(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["density", "sweep", "osc", "ly", "spectrum", "simulate", "check"] {
        assert!(text.contains(sub), "usage misses {sub}");
    }
}

#[test]
fn convergence_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["density", "--map.name", "sine", "--map.eta", "0.05", "--noise.profile", "biweight", "--noise.delta", "0.1", "--n", "128", "--p", "2", "--solver.max_iter", "1", "--solver.tol", "1e-15"],
    );
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("converge"));
}

#[test]
fn check_on_sine_reports_unsatisfied_but_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["check", "--map.name", "sine", "--map.eta", "0.05", "--noise.profile", "biweight", "--n", "64", "--p", "2"],
    );
    assert_exit(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("passed true"), "{text}");
    assert!(text.contains("satisfied false"), "{text}");
}

#[test]
fn check_on_a_non_expanding_map_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["check", "--map.name", "piecewise_linear", "--map.breakpoints", "[0.0,0.5,1.0]", "--map.slopes", "[0.9,2.0]", "--map.intercepts", "[0.0,-1.0]", "--noise.profile", "biweight", "--n", "64", "--p", "2"],
    );
    assert_exit(&out, 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("passed false"));
}

#[test]
fn osc_reads_the_density_it_wrote() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["density", "--map.name", "markov3", "--noise.profile", "biweight", "--n", "64", "--p", "2"],
    );
    assert_exit(&out, 0);
    let out = acim(
        dir.path(),
        &["osc", "--map.name", "markov3", "--noise.profile", "biweight", "--n", "64", "--p", "2", "--density_file", "density.csv", "--r_grid", "[0.5,0.25,0.01]"],
    );
    assert_exit(&out, 0);
    let rows = csv_rows(&read(dir.path(), "osc.csv"));
    assert_eq!(rows.len(), 3);
    // The markov3 density is the 4/3 / 2/3 step: one jump of height 2/3,
    // so Osc₁ at radius r on the interval is (2/3)·2r.
    let r: f64 = rows[2][0].parse().unwrap();
    let osc: f64 = rows[2][1].parse().unwrap();
    assert!((osc - (2.0 / 3.0) * 2.0 * r).abs() < 1e-6, "r {r} osc {osc}");
}

#[test]
fn ly_and_spectrum_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["ly", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "32", "--p", "2", "--num_test_functions", "12", "--seed", "5"],
    );
    assert_exit(&out, 0);
    let ly: serde_json::Value = serde_json::from_str(&read(dir.path(), "ly.json")).unwrap();
    assert!(ly["alpha_hat"].as_f64().unwrap() < 1.0);
    assert_eq!(ly["sample_count"], 12);
    assert_eq!(ly["violated"], false);

    let out = acim(
        dir.path(),
        &["spectrum", "--map.name", "markov3", "--noise.profile", "biweight", "--n", "64", "--p", "2"],
    );
    assert_exit(&out, 0);
    let spec: serde_json::Value = serde_json::from_str(&read(dir.path(), "spectrum.json")).unwrap();
    assert_eq!(spec["eigenvalue_one_simple"], true);
    assert!((spec["lambda2_modulus"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn simulate_histogram_tracks_the_operator_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = acim(
        dir.path(),
        &["simulate", "--map.name", "doubling", "--noise.profile", "biweight", "--noise.delta", "0.1", "--n", "16", "--p", "2", "--num_samples", "200000", "--seed", "3"],
    );
    assert_exit(&out, 0);
    let rows = csv_rows(&read(dir.path(), "histogram.csv"));
    assert_eq!(rows.len(), 16);
    let h: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let mass: f64 = h.iter().sum::<f64>() / 16.0;
    assert!((mass - 1.0).abs() < 1e-12);
    // Doubling with noise keeps the uniform density.
    for v in &h {
        assert!((v - 1.0).abs() < 0.05, "{h:?}");
    }
}

#[test]
fn seed_changes_the_simulated_histogram_but_not_its_format() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for seed in ["3", "4"] {
        let out = acim(
            dir.path(),
            &["simulate", "--map.name", "doubling", "--noise.profile", "biweight", "--noise.delta", "0.1", "--n", "16", "--p", "2", "--num_samples", "20000", "--seed", seed],
        );
        assert_exit(&out, 0);
        outputs.push(read(dir.path(), "histogram.csv"));
    }
    assert_ne!(outputs[0], outputs[1]);
    assert_eq!(csv_rows(&outputs[0]).len(), csv_rows(&outputs[1]).len());
}

#[test]
fn output_dir_env_var_is_the_fallback_destination() {
    let work = tempfile::tempdir().unwrap();
    let sink = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_acim"))
        .args(["density", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "8", "--p", "2"])
        .current_dir(work.path())
        .env("ACIM_OUTPUT_DIR", sink.path())
        .output()
        .expect("binary runs");
    assert_exit(&out, 0);
    assert!(sink.path().join("density.csv").exists());
    assert!(!work.path().join("density.csv").exists());

    // An explicit config key still wins over the environment.
    let nested = sink.path().join("explicit");
    let out = Command::new(env!("CARGO_BIN_EXE_acim"))
        .args(["density", "--map.name", "doubling", "--noise.profile", "biweight", "--n", "8", "--p", "2", "--output_dir", nested.to_str().unwrap()])
        .current_dir(work.path())
        .env("ACIM_OUTPUT_DIR", sink.path())
        .output()
        .expect("binary runs");
    assert_exit(&out, 0);
    assert!(nested.join("density.csv").exists());
}

#[test]
fn dotted_overrides_change_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MARKOV3_SWEEP);
    let out = acim(
        dir.path(),
        &["sweep", "--config", cfg.to_str().unwrap(), "--delta_list", "[0.2,0.1,0.05]"],
    );
    assert_exit(&out, 0);
    assert_eq!(csv_rows(&read(dir.path(), "sweep.csv")).len(), 3);
}
