use std::fs;
use std::path::Path;

use spherelab::analyze::{analyze, AnalysisOverrides};
use spherelab::config::{parse_lr_range, ExperimentConfig, ModelSpec, DEFAULT_LR_GRID};
use spherelab::format::{self, SeriesRow};
use spherelab::runner::run_grid;
use spherelab::LabError;
use spherelab_core::analysis::StationaryEstimate;

fn small(model: ModelSpec, dir: &Path, lrs: &[f64], iters: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(model, dir);
    cfg.lr_grid = lrs.to_vec();
    cfg.sgd.total_iters = iters;
    cfg
}

#[test]
fn default_grid_has_28_increasing_values() {
    assert_eq!(DEFAULT_LR_GRID.len(), 28);
    assert!(DEFAULT_LR_GRID.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(DEFAULT_LR_GRID[0], 1e-5);
    assert_eq!(DEFAULT_LR_GRID[27], 1.0);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert_eq!(n, 4);
}

#[test]
fn config_validation_names_the_field() {
    let text = "output_dir = \"x\"\nlr_grid = []\n[model]\nkind = \"toy_op\"\n";
    match ExperimentConfig::from_toml(text) {
        Err(LabError::InvalidConfig(msg)) => assert!(msg.contains("lr_grid"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let text = "output_dir = \"x\"\nlr_grid = [0.1, 0.01]\n[model]\nkind = \"toy_op\"\n";
    assert!(matches!(
        ExperimentConfig::from_toml(text),
        Err(LabError::InvalidConfig(_))
    ));
    let text =
        "output_dir = \"x\"\n[model]\nkind = \"hyperplane\"\ndim = 10\ncount = 0\nseed = 1\n";
    match ExperimentConfig::from_toml(text) {
        Err(LabError::InvalidConfig(msg)) => assert!(msg.contains("model.count"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let text = "output_dir = \"x\"\n[model]\nkind = \"toy_op\"\n[sgd]\nbatch_size = 3\n";
    assert!(matches!(
        ExperimentConfig::from_toml(text),
        Err(LabError::InvalidConfig(_))
    ));
    let text = "output_dir = \"x\"\n[model]\nkind = \"toy_op\"\n[sgd]\nbogus = 1\n";
    assert!(matches!(
        ExperimentConfig::from_toml(text),
        Err(LabError::InvalidConfig(_))
    ));
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = ExperimentConfig::new(
        ModelSpec::Hyperplane {
            dim: 10,
            count: 30,
            seed: 4,
        },
        "out",
    );
    cfg.analysis.lr_range = Some([1e-3, 0.1]);
    cfg.sgd.loss_stop_threshold = 1e-16;
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    let minimal =
        ExperimentConfig::from_toml("output_dir = \"o\"\n[model]\nkind = \"toy_up\"\n").unwrap();
    assert_eq!(minimal.lr_grid, DEFAULT_LR_GRID.to_vec());
}

#[test]
fn lr_range_parsing() {
    assert_eq!(parse_lr_range("1e-3:0.5").unwrap(), (1e-3, 0.5));
    assert!(parse_lr_range("0.5:1e-3").is_err());
    assert!(parse_lr_range("0.5").is_err());
    assert!(parse_lr_range("-1:2").is_err());
}

#[test]
fn toy_op_default_grid_writes_28_series_and_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ModelSpec::ToyOp, tmp.path());
    cfg.sgd.total_iters = 300;
    let out = run_grid(&cfg, 2).unwrap();
    assert_eq!(out.runs.len(), 28);
    let series = fs::read_dir(tmp.path().join(format::SERIES_DIR))
        .unwrap()
        .count();
    assert_eq!(series, 28);
    let summary = format::read_summary(&tmp.path().join(format::SUMMARY_FILE)).unwrap();
    assert_eq!(summary.len(), 28);
    assert_eq!(summary[5].lr, DEFAULT_LR_GRID[5]);
}

#[test]
fn csv_headers_and_float_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(ModelSpec::ToyUp, tmp.path(), &[1e-2], 3000);
    run_grid(&cfg, 1).unwrap();
    let series = fs::read_to_string(format::series_path(tmp.path(), 0)).unwrap();
    let mut lines = series.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,loss,full_grad_norm,mean_stoch_grad_norm,snr,entropy"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    // 17 significant digits: d.dddddddddddddddde[-]x
    let mantissa = first[1].split('e').next().unwrap();
    assert_eq!(mantissa.replace(['.', '-'], "").len(), 17);
    assert_eq!(first[5], "", "no entropy before the first full window");
    assert!(series
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(5)
        .is_some_and(|s| !s.is_empty()));
    let summary = fs::read_to_string(tmp.path().join(format::SUMMARY_FILE)).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "lr,U,U_std,S,S_std,stabilized"
    );
    let rows = format::read_series(&format::series_path(tmp.path(), 0)).unwrap();
    let again = tempfile::tempdir().unwrap();
    let p = again.path().join("s.csv");
    format::write_series(&p, &rows).unwrap();
    assert_eq!(fs::read_to_string(p).unwrap(), series);
}

#[test]
fn stored_config_replays_byte_identically() {
    let a = tempfile::tempdir().unwrap();
    let cfg = small(ModelSpec::ToyUp, a.path(), &[2.4e-3, 2e-2], 5000);
    run_grid(&cfg, 1).unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut replay = ExperimentConfig::load(&a.path().join(format::CONFIG_FILE)).unwrap();
    replay.output_dir = b.path().to_path_buf();
    run_grid(&replay, 3).unwrap();
    for f in [
        format::SUMMARY_FILE,
        format::BASELINE_FILE,
        "series/lr_000.csv",
        "series/lr_001.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn quadratic_model_runs_without_entropy() {
    let tmp = tempfile::tempdir().unwrap();
    let model = ModelSpec::Quadratic {
        dim: 4,
        count: 3,
        rank: 2,
        seed: 1,
    };
    let out = run_grid(&small(model, tmp.path(), &[1e-3, 1e-2], 2000), 1).unwrap();
    assert!(out.baseline.is_none());
    for r in &out.runs {
        assert!(r.rows.iter().all(|row| row.entropy.is_none()));
        assert!(r.estimate.entropy.is_nan());
        assert!(!r.estimate.stabilized);
    }
    let summary = fs::read_to_string(tmp.path().join(format::SUMMARY_FILE)).unwrap();
    assert!(summary.lines().nth(1).unwrap().ends_with(",,,false"));
    assert!(matches!(
        analyze(tmp.path(), &AnalysisOverrides::default()),
        Err(LabError::MissingData(_))
    ));
}

/// Experiment directory holding hand-written estimates.
fn fixture(dir: &Path, points: &[(f64, f64, bool)]) {
    let lrs: Vec<f64> = (0..points.len())
        .map(|i| 1e-3 * 2f64.powi(i as i32))
        .collect();
    let cfg = small(ModelSpec::ToyUp, dir, &lrs, 100);
    fs::create_dir_all(dir.join(format::SERIES_DIR)).unwrap();
    format::write_text(&dir.join(format::CONFIG_FILE), &cfg.to_toml()).unwrap();
    let est: Vec<StationaryEstimate> = points
        .iter()
        .zip(&lrs)
        .map(|((u, s, stable), lr)| StationaryEstimate {
            stabilized: *stable,
            entropy_std: 0.1,
            loss_std: 0.0,
            ..StationaryEstimate::point(*lr, *u, *s)
        })
        .collect();
    format::write_summary(&dir.join(format::SUMMARY_FILE), &est).unwrap();
    for (i, e) in est.iter().enumerate() {
        // Loss and entropy both falling: a converging trajectory.
        let rows: Vec<SeriesRow> = (1..=12u64)
            .map(|k| SeriesRow {
                iter: 10 * k,
                loss: e.loss + 1.0 / (k * k) as f64,
                full_grad_norm: 1.0 / k as f64,
                mean_stoch_grad_norm: 2.0 / k as f64,
                snr: Some(0.5),
                entropy: Some(e.entropy - k as f64),
            })
            .collect();
        format::write_series(&format::series_path(dir, i), &rows).unwrap();
    }
}

#[test]
fn convex_fixture_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let pts: Vec<(f64, f64, bool)> = (0..6)
        .map(|i| (0.01 * (i * i) as f64, i as f64, true))
        .collect();
    fixture(tmp.path(), &pts);
    let report = analyze(
        tmp.path(),
        &AnalysisOverrides {
            epsilon: Some(0.0),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        report.verdicts.iter().any(|v| v == "monotone: true"),
        "{:?}",
        report.verdicts
    );
    assert!(report.hypothesis_holds());
    let out = tmp.path().join("analysis");
    for f in [
        "temperature.csv",
        "smoothed.csv",
        "free_energy.csv",
        "selection.csv",
        "report.txt",
        "phase_fit.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let temp = fs::read_to_string(out.join("temperature.csv")).unwrap();
    assert_eq!(
        temp.lines().next().unwrap(),
        "lr,t_lo,t_hi,bound_only,empty"
    );
    let fe = fs::read_to_string(out.join("free_energy.csv")).unwrap();
    let temps: std::collections::BTreeSet<&str> = fe
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(temps.len(), 3);
}

#[test]
fn too_few_stabilized_is_missing_data() {
    let tmp = tempfile::tempdir().unwrap();
    let pts = [
        (0.1, 1.0, true),
        (0.2, 2.0, false),
        (0.3, 3.0, true),
        (0.4, 4.0, false),
    ];
    fixture(tmp.path(), &pts);
    match analyze(tmp.path(), &AnalysisOverrides::default()) {
        Err(LabError::MissingData(msg)) => assert!(msg.contains("2 stabilized"), "{msg}"),
        other => panic!("{other:?}"),
    }
    // An explicit range bypasses the stationarity filter.
    let report = analyze(
        tmp.path(),
        &AnalysisOverrides {
            lr_range: Some((1e-3, 1.0)),
            epsilon: None,
        },
    )
    .unwrap();
    assert_eq!(report.pipeline.unwrap().selection.retained.len(), 4);
}

#[test]
fn op_small_lrs_give_finite_difference_section_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(ModelSpec::ToyOp, tmp.path(), &[1e-3, 2e-3], 20_000);
    run_grid(&cfg, 1).unwrap();
    let err = analyze(tmp.path(), &AnalysisOverrides::default()).unwrap_err();
    assert!(matches!(err, LabError::MissingData(_)));
    let out = tmp.path().join("analysis");
    let fd = fs::read_to_string(out.join("fd_temperature.csv")).unwrap();
    assert!(fd.lines().count() > 2);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("finite-difference temperature"), "{report}");
    assert!(report.contains("temperature: not estimated"), "{report}");
    assert!(!out.join("temperature.csv").exists());
}
