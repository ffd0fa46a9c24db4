//! Learning-rate sweeps and the uniform-sphere baseline.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use spherelab_core::analysis::{
    extract_stationary, full_batch_descent, uniform_sphere_baseline, BaselineConfig,
    StationaryEstimate, UniformBaseline,
};
use spherelab_core::entropy::{checkpoint_entropy, EntropyConfig};
use spherelab_core::loss::{make_toy_op, make_toy_up, HyperplaneEnsemble, QuadraticEnsemble};
use spherelab_core::rng::{gaussian_vec, seeded, stream};
use spherelab_core::sphere::{run_trajectory, Checkpoint, SnapshotPolicy, UnitWeights};
use spherelab_core::LossEnsemble;

use crate::config::{ExperimentConfig, ModelSpec};
use crate::error::{LabError, Result};
use crate::format::{self, SeriesRow};

/// A built loss ensemble.
pub enum Model {
    /// Trained by projected SGD on the unit sphere.
    Sphere(Box<dyn LossEnsemble + Sync>),
    /// Trained by full-batch descent in the ambient space.
    Quadratic(QuadraticEnsemble),
}

impl Model {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        Ok(match *spec {
            ModelSpec::ToyOp => Model::Sphere(Box::new(make_toy_op())),
            ModelSpec::ToyUp => Model::Sphere(Box::new(make_toy_up())),
            ModelSpec::Hyperplane { dim, count, seed } => Model::Sphere(Box::new(
                HyperplaneEnsemble::random(dim, count, &mut seeded(seed, stream::ENSEMBLE))?,
            )),
            ModelSpec::Quadratic {
                dim,
                count,
                rank,
                seed,
            } => Model::Quadratic(QuadraticEnsemble::random_psd(
                dim,
                count,
                rank,
                &mut seeded(seed, stream::ENSEMBLE),
            )?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Sphere(e) => e.dim(),
            Model::Quadratic(q) => q.dim(),
        }
    }
}

/// Series and stationary estimate of one learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LrRun {
    pub rows: Vec<SeriesRow>,
    pub estimate: StationaryEstimate,
    pub stopped_early: bool,
}

/// Everything a sweep produced.
#[derive(Debug, Clone)]
pub struct GridOutput {
    pub dir: PathBuf,
    pub runs: Vec<LrRun>,
    pub baseline: Option<UniformBaseline>,
}

fn estimate(
    lr: f64,
    checkpoints: &[Checkpoint],
    entropy: &[(u64, f64)],
    tail_fraction: f64,
) -> Result<StationaryEstimate> {
    if entropy.is_empty() {
        // Loss-only tail: no window ever completed.
        let last = checkpoints.last().map_or(0, |c| c.iter);
        let mut e = extract_stationary(lr, checkpoints, &[(last, f64::NAN)], tail_fraction)?;
        e.entropy_std = f64::NAN;
        return Ok(e);
    }
    Ok(extract_stationary(lr, checkpoints, entropy, tail_fraction)?)
}

/// Runs one learning rate of `cfg` on an already built `model`.
pub fn run_lr(cfg: &ExperimentConfig, model: &Model, lr: f64) -> Result<LrRun> {
    let sgd = cfg.sgd.at(lr);
    let tail = cfg.analysis.tail_fraction;
    match model {
        Model::Sphere(ens) => {
            let init = UnitWeights::random(ens.dim(), &mut seeded(sgd.seed, stream::INIT))?;
            let policy = SnapshotPolicy::CheckpointWindows {
                window: cfg.entropy.window,
            };
            let log = run_trajectory(ens.as_ref(), &init, &sgd, policy)?;
            let iters: Vec<u64> = log.checkpoints.iter().map(|c| c.iter).collect();
            let ecfg = EntropyConfig::from(&cfg.entropy);
            let entropy = checkpoint_entropy(&log.snapshots, &iters, &ecfg)?;
            let by_iter: HashMap<u64, f64> = entropy.iter().copied().collect();
            let rows = log
                .checkpoints
                .iter()
                .map(|c| SeriesRow::new(c, by_iter.get(&c.iter).copied()))
                .collect();
            Ok(LrRun {
                rows,
                estimate: estimate(lr, &log.checkpoints, &entropy, tail)?,
                stopped_early: log.stopped_early,
            })
        }
        Model::Quadratic(q) => {
            let dir = gaussian_vec(&mut seeded(sgd.seed, stream::INIT), q.dim());
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let start: Vec<f64> = q
                .optimum()
                .iter()
                .zip(&dir)
                .map(|(o, d)| o + d / n)
                .collect();
            let cps =
                full_batch_descent(q, &start, lr, sgd.total_iters, sgd.checkpoints_per_decade)
                    .map_err(|e| {
                        LabError::InvalidConfig(format!("lr_grid: descent at lr {lr} failed: {e}"))
                    })?;
            Ok(LrRun {
                rows: cps.iter().map(|c| SeriesRow::new(c, None)).collect(),
                estimate: estimate(lr, &cps, &[], tail)?,
                stopped_early: false,
            })
        }
    }
}

/// Uniform-sphere baseline for a sphere model, `None` otherwise.
pub fn baseline(cfg: &ExperimentConfig, model: &Model) -> Result<Option<UniformBaseline>> {
    let Model::Sphere(ens) = model else {
        return Ok(None);
    };
    let bcfg = BaselineConfig {
        k: cfg.entropy.k,
        window: cfg.entropy.window,
        seed: cfg.sgd.seed,
        ..BaselineConfig::default()
    };
    Ok(Some(uniform_sphere_baseline(ens.as_ref(), &bcfg)?))
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LabError::InvalidConfig(format!("--jobs: {e}")))
}

/// Runs every learning rate of the grid and writes the experiment directory.
///
/// `jobs = 0` uses one worker per core. Workers only compute; all files are
/// written afterwards by the calling thread, so output does not depend on
/// scheduling.
pub fn run_grid(cfg: &ExperimentConfig, jobs: usize) -> Result<GridOutput> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(dir.join(format::SERIES_DIR)).map_err(|e| LabError::io(&dir, e))?;
    format::write_text(&dir.join(format::CONFIG_FILE), &cfg.to_toml())?;

    let model = Model::build(&cfg.model)?;
    let pool = thread_pool(jobs)?;
    let (runs, baseline) = pool.install(|| {
        rayon::join(
            || {
                cfg.lr_grid
                    .par_iter()
                    .map(|&lr| run_lr(cfg, &model, lr))
                    .collect::<Result<Vec<_>>>()
            },
            || baseline(cfg, &model),
        )
    });
    let runs = runs?;
    let baseline = baseline?;

    for (i, run) in runs.iter().enumerate() {
        format::write_series(&format::series_path(&dir, i), &run.rows)?;
    }
    let estimates: Vec<StationaryEstimate> = runs.iter().map(|r| r.estimate).collect();
    format::write_summary(&dir.join(format::SUMMARY_FILE), &estimates)?;
    if let Some(b) = &baseline {
        format::write_baseline(&dir.join(format::BASELINE_FILE), b)?;
    }
    Ok(GridOutput {
        dir,
        runs,
        baseline,
    })
}

/// Computes the baseline alone and writes it into `dir`.
pub fn run_baseline(cfg: &ExperimentConfig, dir: &Path) -> Result<UniformBaseline> {
    cfg.validate()?;
    let model = Model::build(&cfg.model)?;
    let b = baseline(cfg, &model)?.ok_or_else(|| {
        LabError::InvalidConfig("model: the uniform-sphere baseline needs a sphere model".into())
    })?;
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    format::write_baseline(&dir.join(format::BASELINE_FILE), &b)?;
    Ok(b)
}
