use std::fs;
use std::process::{Command, Output};

fn spherelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spherelab"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_oracles_passes_and_lists_every_check() {
    let o = spherelab(&["verify-oracles"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text
        .lines()
        .all(|l| l.starts_with("PASS") && l.contains("max residual")));
}

#[test]
fn perturbed_factorization_fails_verification() {
    let o = spherelab(&["verify-oracles", "--perturb-factorization", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("FAIL") && l.contains("factorization")));
}

#[test]
fn bad_config_and_missing_files_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        "output_dir = \"x\"\nlr_grid = []\n[model]\nkind = \"toy_op\"\n",
    )
    .unwrap();
    let o = spherelab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lr_grid"));
    let o = spherelab(&[
        "run",
        "--config",
        tmp.path().join("absent.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = spherelab(&["analyze", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_then_analyze_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("up.toml");
    fs::write(
        &cfg,
        "output_dir = \"unused\"\nlr_grid = [1e-3, 2.4e-3, 5e-3, 1e-2, 2.2e-2, 4.6e-2]\n\n[model]\nkind = \"toy_up\"\n\n[sgd]\ntotal_iters = 20000\nseed = 3\n",
    )
    .unwrap();
    let out = tmp.path().join("exp");
    let o = spherelab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
        "--jobs",
        "2",
        "--lr-range",
        "2e-3:5e-2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let stored = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(stored.contains("seed = 5"));
    assert!(
        stored.contains("lr_grid = [0.0024, 0.005, 0.01, 0.022, 0.046]"),
        "{stored}"
    );
    let o = spherelab(&["analyze", "--out", out.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{text}");
    assert!(text.contains("monotone:"), "{text}");
    assert!(out.join("analysis/temperature.csv").exists());
}

#[test]
fn baseline_subcommand_writes_baseline_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("op.toml");
    fs::write(&cfg, "output_dir = \"b\"\n[model]\nkind = \"toy_op\"\n").unwrap();
    let out = tmp.path().join("b");
    let o = spherelab(&[
        "baseline",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("baseline.csv")).unwrap();
    assert!(csv.starts_with("U,U_std,S,S_std,windows\n"));
}
