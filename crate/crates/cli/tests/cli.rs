//! End-to-end tests of the command-line surface: config validation,
//! determinism of persisted runs, presets, offline diagnostics and the
//! regime table.

use std::fs;
use std::process::{Command, Output};

fn kslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn minimal_config() -> String {
    serde_json::json!({
        "n_particles": 3,
        "chi": 3.0,
        "epsilon": 1e-2,
        "dt": 0.01,
        "horizon": 0.02,
        "seed": 5,
        "initial_law": {"standard_gaussian": null},
        "replicas": 2
    })
    .to_string()
}

#[test]
fn simulate_minimal_config_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("mini.json");
    fs::write(&config, minimal_config()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("mini");
    for file in ["manifest.json", "snapshots.csv", "diagnostics.csv"] {
        assert!(run.join(file).exists(), "{file} missing");
    }
    // Refuses to clobber without --overwrite.
    let again = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--overwrite"));
}

#[test]
fn invalid_alpha_named_in_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&minimal_config()).unwrap();
    // Admissible interval for N=3, chi=3 is ((N-1)chi/(2 pi N), 1) ≈ (0.318, 1).
    cfg["alpha"] = serde_json::json!(0.1);
    let config = dir.path().join("bad_alpha.json");
    fs::write(&config, cfg.to_string()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("alpha") && err.contains("(N-1)chi/(2 pi N)"),
        "{err}"
    );
}

#[test]
fn unknown_config_field_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&minimal_config()).unwrap();
    cfg["horizonn"] = serde_json::json!(1.0);
    let config = dir.path().join("typo.json");
    fs::write(&config, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("horizonn") && err.contains("line"), "{err}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("det.json");
    fs::write(&config, minimal_config()).unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec![
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let out = kslab(&args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(dir.path().join("det/snapshots.csv")).unwrap()
    };
    let first = run(&[]);
    let second = run(&["--overwrite", "--jobs", "1"]);
    assert_eq!(
        first, second,
        "snapshots.csv must be byte-identical across reruns"
    );
}

#[test]
fn diagnose_recomputes_suite() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("diag.json");
    fs::write(&config, minimal_config()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let run_dir = dir.path().join("diag");
    let out = kslab(&[
        "diagnose",
        "--run",
        run_dir.to_str().unwrap(),
        "--suite",
        "separations",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("triple_passage_fraction"), "{stdout}");
    let csv = fs::read_to_string(run_dir.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("name,estimate,half_width,confidence,n,bound"));

    let out = kslab(&[
        "diagnose",
        "--run",
        run_dir.to_str().unwrap(),
        "--suite",
        "nonsense",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("separations"));
}

#[test]
fn preset_output_parses_and_sweeps_run() {
    let out = kslab(&["preset", "--name", "regime_table"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let sweep: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert!(sweep.iter().any(|p| p["n_particles"] == 5
        && (p["chi"].as_f64().unwrap() - 6.5 * std::f64::consts::PI).abs() < 1e-9));

    let out = kslab(&["preset", "--name", "no_such_preset"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("variance_slope"));
}

#[test]
fn sweep_config_produces_arm_directories() {
    let dir = tempfile::tempdir().unwrap();
    let one: serde_json::Value = serde_json::from_str(&minimal_config()).unwrap();
    let mut two = one.clone();
    two["seed"] = serde_json::json!(6);
    let config = dir.path().join("sweep.json");
    fs::write(&config, serde_json::json!([one, two]).to_string()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("sweep/arm_00/manifest.json").exists());
    assert!(dir.path().join("sweep/arm_01/snapshots.csv").exists());
}

#[test]
fn blow_up_leaves_failure_marker() {
    let dir = tempfile::tempdir().unwrap();
    // An absurd drift step overflows to infinity on the first step.
    let cfg = serde_json::json!({
        "n_particles": 2,
        "chi": 1e308,
        "epsilon": 0.0,
        "dt": 1e6,
        "horizon": 1e7,
        "seed": 1,
        "initial_law": {"point_cloud": {"points": [[0.0, 0.0], [1.0, 0.0]]}},
        "replicas": 2
    });
    let config = dir.path().join("boom.json");
    fs::write(&config, cfg.to_string()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("blow-up"), "{err}");
    let run = dir.path().join("boom");
    assert!(run.join("FAILED").exists());
    assert!(
        run.join("snapshots.csv").exists(),
        "partial outputs retained"
    );
}

#[test]
fn regimes_prints_reference_table() {
    let out = kslab(&["regimes", "--n", "5", "--chi", "6.5pi"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    let regime_of = |k: usize| -> &str {
        lines
            .iter()
            .find(|l| l.trim_start().starts_with(&format!("{k} ")))
            .unwrap()
            .split_whitespace()
            .last()
            .unwrap()
    };
    assert_eq!(regime_of(2), "reflecting");
    assert_eq!(regime_of(3), "no_collision");
    assert_eq!(regime_of(4), "no_collision");
    assert_eq!(regime_of(5), "reflecting");
}

#[test]
fn pair_and_cluster_systems_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pair_cfg = serde_json::json!({
        "n_particles": 2,
        "chi": 2.0 * std::f64::consts::PI,
        "epsilon": 0.0,
        "dt": 0.01,
        "horizon": 0.1,
        "seed": 9,
        "initial_law": {"point_cloud": {"points": [[1.0, 0.0], [0.0, 0.0]]}},
        "replicas": 50
    });
    let config = dir.path().join("pairs.json");
    fs::write(&config, pair_cfg.to_string()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--system",
        "pair",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let diag = fs::read_to_string(dir.path().join("pairs/diagnostics.csv")).unwrap();
    assert!(diag.contains("radial_ks_p"), "{diag}");

    let cluster_cfg = serde_json::json!({
        "n_particles": 6,
        "chi": 48.0 * std::f64::consts::PI,
        "epsilon": 0.0,
        "dt": 1e-3,
        "horizon": 0.2,
        "seed": 10,
        "initial_law": {"standard_gaussian": null},
        "replicas": 20
    });
    let config = dir.path().join("clusters.json");
    fs::write(&config, cluster_cfg.to_string()).unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--system",
        "clusters",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let header = fs::read_to_string(dir.path().join("clusters/snapshots.csv")).unwrap();
    assert!(header.starts_with("replica,time,particle_index,x,y,mass"));
    let diag = fs::read_to_string(dir.path().join("clusters/diagnostics.csv")).unwrap();
    assert!(diag.contains("mass_lattice_violations"), "{diag}");

    // Offline recomputation agrees with the stored run.
    let out = kslab(&[
        "diagnose",
        "--run",
        dir.path().join("clusters").to_str().unwrap(),
        "--suite",
        "cluster_coalescence",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    let violations_row = text
        .lines()
        .find(|l| l.starts_with("mass_lattice_violations"))
        .unwrap()
        .to_string();
    let fields: Vec<&str> = violations_row.split(',').collect();
    assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0, "{violations_row}");
}
