use std::path::Path;
use std::process::{Command, Output};

use pulsebranch_cli::{sidecar_path, Metadata};

fn pulsebranch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulsebranch")).args(args).output().unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (Vec<String>, Vec<Vec<f64>>) {
    let out = dir.join(name);
    let mut all = vec!["run"];
    all.extend_from_slice(args);
    all.push("--out");
    all.push(out.to_str().unwrap());
    let o = pulsebranch(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# pulsebranch v"));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn bad_requests_exit_with_two() {
    for args in [
        &["run"][..],
        &["run", "--scenario", "fock"],
        &["run", "--scenario", "fock", "--n", "2", "--steps", "1"],
        &["run", "--scenario", "thermal", "--nbar", "-1"],
        &["run", "--scenario", "thermal", "--n", "3"],
        &["run", "--scenario", "fock", "--n", "1", "--gamma-ratio", "0"],
        &["run", "--scenario", "custom"],
        &["run", "--scenario", "nonsense"],
    ] {
        assert_eq!(pulsebranch(args).status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(&cfg, r#"{"scenario": "fock", "photons": 1, "colour": "blue"}"#).unwrap();
    assert_eq!(pulsebranch(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_pulsebranch"))
        .args(["run", "--scenario", "fock", "--n", "1"])
        .env("PULSEBRANCH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_photon_peak_near_two_over_e_squared() {
    let dir = tempfile::tempdir().unwrap();
    let (header, rows) = run_to(dir.path(), "f.csv", &["--scenario", "fock", "--n", "1"]);
    assert_eq!(header, ["kappa_t", "fock"]);
    assert_eq!(rows.len(), 600);
    let peak = rows.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert!((peak[0] - 2.0).abs() < 0.03, "{peak:?}");
    assert!((peak[1] - 0.2707).abs() < 1e-4, "{peak:?}");
}

#[test]
fn zero_amplitude_branch_stays_in_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let (header, rows) = run_to(dir.path(), "b.csv", &["--scenario", "branch", "--alpha2", "0", "--steps", "50"]);
    assert_eq!(header, ["kappa_t", "branch"]);
    assert!(rows.iter().all(|r| r[1] == 0.0));
}

#[test]
fn fock_comparison_has_both_columns_over_default_window() {
    let dir = tempfile::tempdir().unwrap();
    let (header, rows) = run_to(dir.path(), "c.csv", &["--scenario", "compare-fig2", "--n", "2", "--steps", "100"]);
    assert_eq!(header, ["kappa_t", "fock", "coherent"]);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows.last().unwrap()[0] - 12.0).abs() < 1e-12);
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| (0.0..=1.0).contains(v))));
}

#[test]
fn config_file_and_flags_give_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "compare-fig3", "gamma_tilde": 0.5, "photons": 2.0, "steps": 80, "tmax_kappa": 10.0}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = pulsebranch(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(o.status.success());
    let o = pulsebranch(&[
        "run", "--scenario", "compare-fig3", "--gamma-ratio", "0.5", "--nbar", "2", "--steps", "80", "--tmax", "10",
        "--out", b.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(&cfg, r#"{"scenario": "fock", "photons": 1, "steps": 80}"#).unwrap();
    let o = pulsebranch(&["run", "--config", cfg.to_str().unwrap(), "--steps", "30"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 32);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--scenario", "sqv", "--r", "0.8", "--steps", "120"];
    run_to(dir.path(), "1.csv", &args);
    run_to(dir.path(), "2.csv", &args);
    assert_eq!(std::fs::read(dir.path().join("1.csv")).unwrap(), std::fs::read(dir.path().join("2.csv")).unwrap());
}

#[test]
fn metadata_sidecar_records_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    run_to(dir.path(), "t.csv", &["--scenario", "thermal", "--nbar", "1", "--steps", "60"]);
    let meta: Metadata =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(&dir.path().join("t.csv"))).unwrap()).unwrap();
    assert_eq!(meta.spec.photons, Some(1.0));
    assert_eq!(meta.spec.steps, 60);
    assert_eq!(meta.diagnostics.method, "exact");
    assert_eq!(meta.diagnostics.truncation.len(), 1);
    assert!(meta.diagnostics.truncation[0].tail_mass <= 1e-10);
    assert!(meta.diagnostics.max_error_bound < 1e-8);
}

#[test]
fn series_and_exact_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--scenario", "thermal", "--nbar", "0.5", "--steps", "60"];
    let (_, exact) = run_to(dir.path(), "e.csv", &base);
    let mut series_args = base.to_vec();
    series_args.extend(["--kmax", "60"]);
    let (_, series) = run_to(dir.path(), "s.csv", &series_args);
    for (a, b) in exact.iter().zip(&series) {
        assert!((a[1] - b[1]).abs() < 1e-8, "{a:?} {b:?}");
    }
}

#[test]
fn custom_distribution_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let pn = dir.path().join("pn.txt");
    std::fs::write(&pn, "0 0.5\n1 0.5\n").unwrap();
    let (header, custom) =
        run_to(dir.path(), "c.csv", &["--scenario", "custom", "--pn-file", pn.to_str().unwrap(), "--steps", "40"]);
    assert_eq!(header, ["kappa_t", "custom"]);
    let (_, fock) = run_to(dir.path(), "f.csv", &["--scenario", "fock", "--n", "1", "--steps", "40"]);
    for (c, f) in custom.iter().zip(&fock) {
        assert!((c[1] - 0.5 * f[1]).abs() < 1e-12);
    }
}

#[test]
fn validate_reports_truncation_and_orders() {
    let o = pulsebranch(&["validate", "--scenario", "sqv", "--r", "1.87"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("sqv: truncated at N = "), "{text}");
    assert!(text.contains("estimated runtime"));

    let o = pulsebranch(&["validate", "--scenario", "fock", "--n", "100"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("fock sum: exact, kmax = 100"), "{text}");
    assert!(text.contains("method: exact"));

    let o = pulsebranch(&["validate", "--scenario", "thermal", "--nbar", "3", "--kmax", "40"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("method: series"), "{text}");
}
