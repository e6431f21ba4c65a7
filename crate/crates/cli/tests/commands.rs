use std::path::Path;
use std::process::Command as Process;

use crossflux_cli::config::ExperimentConfig;
use crossflux_cli::{run_with, CliError, Command};

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml(
        "[grid]\nn = 61\n[continuation]\nj_list = [1, 2]\nd2_floor = 0.004\nmax_points = 150\nstability = false\n[verify]\njacobian_samples = 10\n",
    )
    .unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn analyze_reports_the_reference_table_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small();
    run_with(Command::Analyze, &cfg, Some(a.path())).unwrap();
    run_with(Command::Analyze, &cfg, Some(b.path())).unwrap();
    let csv = read(&a.path().join("modes.csv"));
    assert_eq!(csv, read(&b.path().join("modes.csv")));
    let row1 = csv.lines().nth(1).unwrap();
    let d: f64 = row1.split(',').nth(3).unwrap().parse().unwrap();
    assert!((d - 0.035565).abs() < 1e-5, "{row1}");
    let json: serde_json::Value = serde_json::from_str(&read(&a.path().join("modes.json"))).unwrap();
    assert_eq!(json["bifurcations"][0]["j"], 1);
    let run: serde_json::Value = serde_json::from_str(&read(&a.path().join("run.json"))).unwrap();
    assert_eq!(run["version"], crossflux_cli::VERSION);
    assert!(read(&a.path().join("config.toml")).contains("x_left = -0.5"));
}

#[test]
fn analyze_without_cross_diffusion_has_no_bifurcations() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.model.alpha = 0.0;
    cfg.model.beta = 0.0;
    run_with(Command::Analyze, &cfg, Some(dir.path())).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(&dir.path().join("modes.json"))).unwrap();
    assert_eq!(json["bifurcations"].as_array().unwrap().len(), 0);
    assert_eq!(json["modes"].as_array().unwrap().len(), 0);
    assert_eq!(json["regime"], "none");
}

#[test]
fn branches_write_one_polyline_per_branch() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.continuation.stability = true;
    cfg.continuation.max_points = 40;
    run_with(Command::Branches, &cfg, Some(dir.path())).unwrap();
    let svg = read(&dir.path().join("branches.svg"));
    let csvs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with('G'))
        .collect();
    assert_eq!(csvs.len(), 4);
    assert_eq!(svg.matches("<polyline").count(), 4);
    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("branches.json"))).unwrap();
    let onsets: Vec<f64> = report["branches"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b["side"] == "upper")
        .map(|b| b["onset_estimate"].as_f64().unwrap())
        .collect();
    assert!(onsets[0] > onsets[1]);
    for b in report["branches"].as_array().unwrap() {
        assert_eq!(b["box_violations"], 0);
    }
}

#[test]
fn limit_refuses_the_logistic_regime() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.model.gamma = Some(0.5);
    let err = run_with(Command::Limit, &cfg, Some(dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn limit_onsets_at_gamma_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.continuation.j_list = vec![1, 2, 3];
    cfg.continuation.d2_floor = 0.003;
    run_with(Command::Limit, &cfg, Some(dir.path())).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(&dir.path().join("limit.json"))).unwrap();
    let onsets: Vec<f64> = json["onsets"].as_array().unwrap().iter().map(|o| o[1].as_f64().unwrap()).collect();
    for (got, want) in onsets.iter().zip([0.04866, 0.01067, 0.00363]) {
        assert!((got - want).abs() / want < 2e-3, "{got} vs {want}");
    }
}

#[test]
fn evolve_replays_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.evolve.d2 = 0.05;
    run_with(Command::Evolve, &cfg, Some(a.path())).unwrap();
    run_with(Command::Evolve, &cfg, Some(b.path())).unwrap();
    let snaps = |d: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(d.join("snapshots")).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v.iter().map(|p| read(p)).collect::<Vec<_>>()
    };
    assert_eq!(snaps(a.path()), snaps(b.path()));
    let s: serde_json::Value = serde_json::from_str(&read(&a.path().join("summary.json"))).unwrap();
    assert_eq!(s["termination"], "steady");
    assert!(s["final_distance"].as_f64().unwrap() < 1e-6);
}

#[test]
fn verify_passes_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    run_with(Command::Verify, &cfg, Some(dir.path())).unwrap();

    let branch = dir.path().join("branches").join("G1_upper.csv");
    let text = read(&branch);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[3].split(',').map(String::from).collect();
    cols[5] = "3.0".into();
    lines[3] = cols.join(",");
    std::fs::write(&branch, lines.join("\n") + "\n").unwrap();

    let mut tampered = cfg.clone();
    tampered.verify.branch_dir = Some(dir.path().join("branches"));
    let other = tempfile::tempdir().unwrap();
    let err = run_with(Command::Verify, &tampered, Some(other.path())).unwrap_err();
    assert!(matches!(&err, CliError::Verification(m) if m.contains("l2_box") && m.contains("FAIL")), "{err}");
}

#[test]
fn jacobian_check_at_roundoff_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.verify.jacobian_tol = 1e-12;
    let err = run_with(Command::Verify, &cfg, Some(dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_crossflux");
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "[grid]\nn = 41\n").unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\nn = 41\nsize = 3\n").unwrap();
    let out = dir.path().join("out");
    let ok = Process::new(bin).args(["analyze", "--config"]).arg(&good).arg("--out").arg(&out).args(["--threads", "2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("threshold"));
    let cfg_err = Process::new(bin).args(["analyze", "--config"]).arg(&bad).arg("--out").arg(&out).output().unwrap();
    assert_eq!(cfg_err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&cfg_err.stderr).contains("size"));
    let io_err = Process::new(bin).args(["analyze", "--config"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(io_err.status.code(), Some(1));
}
