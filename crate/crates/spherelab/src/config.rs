//! Experiment configuration, stored as TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spherelab_core::analysis::{DEFAULT_DT, DEFAULT_EPSILON, DEFAULT_TRIANGULAR_H};
use spherelab_core::entropy::EntropyConfig;
use spherelab_core::sphere::SgdConfig;

use crate::error::{LabError, Result};

/// The 28 learning rates swept by default.
pub const DEFAULT_LR_GRID: [f64; 28] = [
    1.0e-5, 2.2e-5, 4.6e-5, //
    1.0e-4, 1.8e-4, 3.2e-4, 5.6e-4, //
    1.0e-3, 1.2e-3, 1.4e-3, 1.6e-3, 1.9e-3, 2.3e-3, 2.7e-3, 3.2e-3, 3.7e-3, 4.4e-3, 5.2e-3, 6.1e-3,
    7.2e-3, 8.5e-3, //
    1.0e-2, 2.2e-2, 4.6e-2, 1.0e-1, 2.2e-1, 4.6e-1, 1.0,
];

/// Loss ensemble to train on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Two great circles meeting at the poles.
    ToyOp,
    /// Three tilted great circles with no common zero.
    ToyUp,
    /// Random unit normals in `dim` dimensions.
    Hyperplane {
        /// Dimension `D`.
        dim: usize,
        /// Number of components `M`.
        count: usize,
        /// Seed for the normals.
        seed: u64,
    },
    /// Random PSD quadratics sharing one optimum, trained by full-batch
    /// descent without projection.
    Quadratic {
        /// Dimension `D`.
        dim: usize,
        /// Number of components `M`.
        count: usize,
        /// Rank of each Hessian.
        rank: usize,
        /// Seed for the Hessians and the optimum.
        seed: u64,
    },
}

impl ModelSpec {
    /// Whether iterates live on the unit sphere.
    pub fn on_sphere(&self) -> bool {
        !matches!(self, ModelSpec::Quadratic { .. })
    }
}

/// Optimizer settings shared by every learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdSection {
    pub batch_size: usize,
    pub total_iters: u64,
    pub seed: u64,
    pub checkpoints_per_decade: u32,
    pub loss_stop_threshold: f64,
}

impl Default for SgdSection {
    fn default() -> Self {
        let d = SgdConfig::default();
        SgdSection {
            batch_size: d.batch_size,
            total_iters: d.total_iters,
            seed: d.seed,
            checkpoints_per_decade: d.checkpoints_per_decade,
            loss_stop_threshold: d.loss_stop_threshold,
        }
    }
}

impl SgdSection {
    /// Core optimizer settings at one learning rate.
    pub fn at(&self, learning_rate: f64) -> SgdConfig {
        SgdConfig {
            learning_rate,
            batch_size: self.batch_size,
            total_iters: self.total_iters,
            seed: self.seed,
            checkpoints_per_decade: self.checkpoints_per_decade,
            loss_stop_threshold: self.loss_stop_threshold,
        }
    }
}

/// k-NN entropy settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropySection {
    pub k: usize,
    pub window: usize,
    pub stride: usize,
}

impl Default for EntropySection {
    fn default() -> Self {
        let d = EntropyConfig::default();
        EntropySection {
            k: d.k,
            window: d.window,
            stride: d.stride,
        }
    }
}

impl From<&EntropySection> for EntropyConfig {
    fn from(s: &EntropySection) -> Self {
        EntropyConfig {
            k: s.k,
            window: s.window,
            stride: s.stride,
        }
    }
}

/// Post-processing settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub epsilon: f64,
    /// Fraction of checkpoints forming the stationary tail.
    pub tail_fraction: f64,
    /// Triangular bandwidth in log learning rate.
    pub smoothing_h: f64,
    /// Gaussian bandwidth in log iteration.
    pub smoothing_sigma: f64,
    pub dt: usize,
    /// Explicit `[lo, hi]` learning-rate range for temperature estimation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_range: Option<[f64; 2]>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            epsilon: DEFAULT_EPSILON,
            tail_fraction: 0.2,
            smoothing_h: DEFAULT_TRIANGULAR_H,
            smoothing_sigma: 0.3,
            dt: DEFAULT_DT,
            lr_range: None,
        }
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_grid")]
    pub lr_grid: Vec<f64>,
    pub model: ModelSpec,
    #[serde(default)]
    pub sgd: SgdSection,
    #[serde(default)]
    pub entropy: EntropySection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_grid() -> Vec<f64> {
    DEFAULT_LR_GRID.to_vec()
}

impl ExperimentConfig {
    /// Default settings for `model`.
    pub fn new(model: ModelSpec, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            output_dir: output_dir.into(),
            lr_grid: default_grid(),
            model,
            sgd: SgdSection::default(),
            entropy: EntropySection::default(),
            analysis: AnalysisSection::default(),
        }
    }

    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::InvalidConfig(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Checks every field, reporting the first offender.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidConfig(msg));
        if self.lr_grid.is_empty() {
            return bad("lr_grid: must not be empty".into());
        }
        for (i, lr) in self.lr_grid.iter().enumerate() {
            if !(lr.is_finite() && *lr > 0.0) {
                return bad(format!(
                    "lr_grid[{i}]: {lr} is not a positive finite number"
                ));
            }
        }
        if let Some(i) = self.lr_grid.windows(2).position(|p| p[1] <= p[0]) {
            return bad(format!(
                "lr_grid[{}]: values must be strictly increasing",
                i + 1
            ));
        }
        match self.model {
            ModelSpec::Hyperplane { dim, count, .. } => {
                if dim < 2 {
                    return bad(format!("model.dim: {dim} < 2"));
                }
                if count == 0 {
                    return bad("model.count: must be at least 1".into());
                }
            }
            ModelSpec::Quadratic {
                dim, count, rank, ..
            } => {
                if dim == 0 || count == 0 {
                    return bad("model.dim, model.count: must be at least 1".into());
                }
                if rank == 0 || rank > dim {
                    return bad(format!("model.rank: {rank} not in 1..={dim}"));
                }
            }
            ModelSpec::ToyOp | ModelSpec::ToyUp => {}
        }
        let s = &self.sgd;
        if s.batch_size == 0 || s.batch_size > self.ensemble_size() {
            return bad(format!(
                "sgd.batch_size: {} not in 1..={}",
                s.batch_size,
                self.ensemble_size()
            ));
        }
        if s.total_iters == 0 {
            return bad("sgd.total_iters: must be positive".into());
        }
        if s.checkpoints_per_decade == 0 {
            return bad("sgd.checkpoints_per_decade: must be positive".into());
        }
        if !(s.loss_stop_threshold >= 0.0) {
            return bad("sgd.loss_stop_threshold: must be non-negative".into());
        }
        let e = &self.entropy;
        if e.k == 0 || e.k >= e.window {
            return bad(format!("entropy.k: {} not in 1..{}", e.k, e.window));
        }
        if e.stride == 0 {
            return bad("entropy.stride: must be positive".into());
        }
        let a = &self.analysis;
        if !(a.epsilon >= 0.0 && a.epsilon.is_finite()) {
            return bad("analysis.epsilon: must be finite and non-negative".into());
        }
        if !(a.tail_fraction > 0.0 && a.tail_fraction <= 0.5) {
            return bad("analysis.tail_fraction: must lie in (0, 0.5]".into());
        }
        if !(a.smoothing_h > 0.0) {
            return bad("analysis.smoothing_h: must be positive".into());
        }
        if !(a.smoothing_sigma > 0.0) {
            return bad("analysis.smoothing_sigma: must be positive".into());
        }
        if a.dt == 0 {
            return bad("analysis.dt: must be positive".into());
        }
        if let Some([lo, hi]) = a.lr_range {
            if !(lo > 0.0 && lo <= hi) {
                return bad(format!("analysis.lr_range: [{lo}, {hi}] is not a range"));
            }
        }
        Ok(())
    }

    /// Number of loss components of the configured model.
    pub fn ensemble_size(&self) -> usize {
        match self.model {
            ModelSpec::ToyOp => 2,
            ModelSpec::ToyUp => 3,
            ModelSpec::Hyperplane { count, .. } | ModelSpec::Quadratic { count, .. } => count,
        }
    }
}

/// Parses `lo:hi`.
pub fn parse_lr_range(text: &str) -> Result<(f64, f64)> {
    let bad = || LabError::InvalidConfig(format!("--lr-range: expected lo:hi, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(bad());
    }
    Ok((lo, hi))
}
