//! The thermodynamic pipeline over per-learning-rate stationary values.
//!
//! For each learning rate `lr` a trajectory yields a stationary loss `U(lr)`
//! and entropy `S(lr)`. A temperature `T` is consistent with `lr*` when the
//! free energy `F(lr) = U(lr) - T S(lr)` is minimised at `lr*` up to a slack
//! `eps`:
//!
//! ```text
//! U* - T S* <= U(lr) - T S(lr) + eps   for every lr
//! ```
//!
//! Each constraint is a half-line in `T`, so the admissible set is an
//! interval computed in closed form by [`estimate_temperature_interval`].

use alloc::vec;
use alloc::vec::Vec;

use crate::entropy::knn_entropy;
use crate::linalg;
use crate::loss::{LossEnsemble, QuadraticEnsemble};
use crate::metrics::gradient_stats;
use crate::rng::{self, seeded};
use crate::sphere::{checkpoint_schedule, Checkpoint, UnitWeights};
use crate::{Error, Result};

/// Default triangular bandwidth in natural-log learning-rate units.
pub const DEFAULT_TRIANGULAR_H: f64 = 0.3;
/// Default temperature slack in loss units.
pub const DEFAULT_EPSILON: f64 = 1e-2;
/// Default half-width of the finite-difference temperature.
pub const DEFAULT_DT: usize = 2;
/// Relative half-mean loss difference below which a tail counts as stable.
pub const STABLE_LOSS_REL_DIFF: f64 = 0.05;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    libm::sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

fn check_increasing(xs: &[f64]) -> Result<()> {
    if xs.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidParameter(
            "abscissae must be strictly increasing",
        ));
    }
    Ok(())
}

fn kernel_average(xs: &[f64], ys: &[f64], i: usize, kernel: impl Fn(f64) -> f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let k = kernel((xs[i] - x).abs());
        num += k * y;
        den += k;
    }
    num / den
}

/// Triangular-kernel smoothing `K = max(h - |x_i - x_j|, 0)` over log
/// learning rates. The first and last values are kept as they are.
pub fn kernel_smooth_triangular(log_xs: &[f64], ys: &[f64], h: f64) -> Result<Vec<f64>> {
    if ys.is_empty() {
        return Err(Error::EmptyInput);
    }
    if log_xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: log_xs.len(),
            got: ys.len(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("bandwidth must be positive"));
    }
    check_increasing(log_xs)?;
    let last = ys.len() - 1;
    Ok((0..ys.len())
        .map(|i| {
            if i == 0 || i == last {
                ys[i]
            } else {
                kernel_average(log_xs, ys, i, |d| (h - d).max(0.0))
            }
        })
        .collect())
}

/// Gaussian smoothing in log-time,
/// `K = exp(-(log t_i - log t_j)^2 / (2 sigma^2))`. No boundary pinning.
pub fn kernel_smooth_gaussian_logtime(ts: &[u64], ys: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if ys.is_empty() {
        return Err(Error::EmptyInput);
    }
    if ts.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ts.len(),
            got: ys.len(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter("sigma must be positive"));
    }
    if ts.first() == Some(&0) {
        return Err(Error::InvalidParameter(
            "log-time smoothing needs positive times",
        ));
    }
    let logs: Vec<f64> = ts.iter().map(|t| libm::log(*t as f64)).collect();
    check_increasing(&logs)?;
    let two_var = 2.0 * sigma * sigma;
    Ok((0..ys.len())
        .map(|i| kernel_average(&logs, ys, i, |d| libm::exp(-d * d / two_var)))
        .collect())
}

/// Stationary loss and entropy at one learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryEstimate {
    /// Learning rate.
    pub lr: f64,
    /// Mean full loss over the tail.
    pub loss: f64,
    /// Dispersion of the loss over the tail.
    pub loss_std: f64,
    /// Mean entropy over the tail windows.
    pub entropy: f64,
    /// Dispersion of the entropy over the tail windows.
    pub entropy_std: f64,
    /// Whether the tail passed the stationarity test.
    pub stabilized: bool,
}

impl StationaryEstimate {
    /// A bare `(lr, U, S)` point with zero dispersion, marked stable.
    pub fn point(lr: f64, loss: f64, entropy: f64) -> Self {
        Self {
            lr,
            loss,
            loss_std: 0.0,
            entropy,
            entropy_std: 0.0,
            stabilized: true,
        }
    }
}

/// Tail statistics of one trajectory.
///
/// The tail is the last `ceil(tail_fraction * n)` checkpoints (at least two),
/// i.e. a fixed fraction of log-time. `U` is the mean tail loss and `S` the
/// mean of the entropy estimates anchored inside the tail (the final one if
/// none is). The tail is stable when its two halves differ in mean loss by
/// less than 5% relative and in mean entropy by less than one tail standard
/// deviation.
pub fn extract_stationary(
    lr: f64,
    checkpoints: &[Checkpoint],
    entropy_series: &[(u64, f64)],
    tail_fraction: f64,
) -> Result<StationaryEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::InvalidParameter(
            "tail_fraction must lie in (0, 0.5]",
        ));
    }
    let n = checkpoints.len();
    let tail_len = (libm::ceil(tail_fraction * n as f64) as usize).max(2);
    if n < tail_len {
        return Err(Error::TooFewSamples {
            needed: tail_len - 1,
            got: n,
        });
    }
    let last_entropy = entropy_series
        .last()
        .ok_or(Error::TooFewSamples { needed: 0, got: 0 })?;
    let tail = &checkpoints[n - tail_len..];
    let losses: Vec<f64> = tail.iter().map(|c| c.loss).collect();
    let start = tail[0].iter;
    let mut entropies: Vec<f64> = entropy_series
        .iter()
        .filter(|(it, _)| *it >= start)
        .map(|(_, s)| *s)
        .collect();
    if entropies.is_empty() {
        entropies.push(last_entropy.1);
    }

    let loss = mean(&losses);
    let loss_std = std_dev(&losses);
    let entropy = mean(&entropies);
    let entropy_std = std_dev(&entropies);

    let half = losses.len() / 2;
    let loss_shift = (mean(&losses[half..]) - mean(&losses[..half])).abs();
    let loss_stable = loss_shift <= STABLE_LOSS_REL_DIFF * loss.abs() && loss.is_finite();
    let entropy_stable = if entropies.len() < 2 {
        entropy.is_finite()
    } else {
        let half = entropies.len() / 2;
        let shift = (mean(&entropies[half..]) - mean(&entropies[..half])).abs();
        shift.is_finite() && shift <= entropy_std
    };

    Ok(StationaryEstimate {
        lr,
        loss,
        loss_std,
        entropy,
        entropy_std,
        stabilized: loss_stable && entropy_stable,
    })
}

/// Admissible temperatures for one learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureInterval {
    /// Learning rate.
    pub lr: f64,
    /// Lower end, at least 0.
    pub t_lo: f64,
    /// Upper end; `f64::INFINITY` when unbounded.
    pub t_hi: f64,
    /// Slack used.
    pub epsilon: f64,
    /// No temperature satisfies every constraint.
    pub empty: bool,
    /// The learning rate is the first or last of its list, so one side is
    /// unconstrained by neighbours.
    pub bound_only: bool,
}

impl TemperatureInterval {
    /// Midpoint of a nonempty bounded interval.
    pub fn midpoint(&self) -> Option<f64> {
        (!self.empty && self.t_hi.is_finite()).then_some(0.5 * (self.t_lo + self.t_hi))
    }

    /// Whether `t` lies in the interval.
    pub fn contains(&self, t: f64) -> bool {
        !self.empty && t >= self.t_lo && t <= self.t_hi
    }
}

/// Closed-form set of `T >= 0` with `F(target) <= F(j) + eps` for all `j`,
/// where `F = U - T S`.
pub fn estimate_temperature_interval(
    estimates: &[StationaryEstimate],
    target: usize,
    epsilon: f64,
) -> Result<TemperatureInterval> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let star = estimates.get(target).ok_or(Error::IndexOutOfRange {
        index: target,
        len: estimates.len(),
    })?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter("epsilon must be non-negative"));
    }
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut infeasible = false;
    for (j, e) in estimates.iter().enumerate() {
        if j == target {
            continue;
        }
        // U* - U_j - eps <= T (S* - S_j)
        let gap = star.loss - e.loss - epsilon;
        let ds = star.entropy - e.entropy;
        if ds > 0.0 {
            lo = lo.max(gap / ds);
        } else if ds < 0.0 {
            hi = hi.min(gap / ds);
        } else if gap > 0.0 {
            infeasible = true;
        }
    }
    let last = estimates.len() - 1;
    Ok(TemperatureInterval {
        lr: star.lr,
        t_lo: lo,
        t_hi: hi,
        epsilon,
        empty: infeasible || lo > hi,
        bound_only: estimates.len() > 1 && (target == 0 || target == last),
    })
}

/// Intervals for every learning rate plus the monotonicity verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureCurve {
    /// One interval per estimate, in learning-rate order.
    pub intervals: Vec<TemperatureInterval>,
    /// Midpoints of nonempty bounded interior intervals are nondecreasing
    /// and their lower ends are ordered.
    pub monotone: bool,
    /// No interior interval is empty.
    pub well_defined: bool,
}

impl TemperatureCurve {
    /// Interior intervals that are nonempty and bounded.
    pub fn usable(&self) -> impl Iterator<Item = &TemperatureInterval> {
        self.intervals
            .iter()
            .filter(|t| !t.bound_only && t.midpoint().is_some())
    }
}

/// Applies [`estimate_temperature_interval`] to every learning rate.
pub fn temperature_curve(
    estimates: &[StationaryEstimate],
    epsilon: f64,
) -> Result<TemperatureCurve> {
    if estimates.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: estimates.len(),
        });
    }
    check_increasing(&estimates.iter().map(|e| e.lr).collect::<Vec<_>>())?;
    let intervals = (0..estimates.len())
        .map(|i| estimate_temperature_interval(estimates, i, epsilon))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = TemperatureCurve {
        intervals,
        monotone: true,
        well_defined: true,
    };
    curve.well_defined = curve.intervals.iter().all(|t| t.bound_only || !t.empty);
    let usable: Vec<&TemperatureInterval> = curve.usable().collect();
    curve.monotone = usable
        .windows(2)
        .all(|p| p[1].midpoint() >= p[0].midpoint() && p[1].t_lo >= p[0].t_lo);
    Ok(curve)
}

/// Centred differences `(U[i+dt] - U[i-dt]) / (S[i+dt] - S[i-dt])` for each
/// interior index; `None` where the entropy difference is below `1e-12`.
pub fn finite_difference_temperature(
    losses: &[f64],
    entropies: &[f64],
    dt: usize,
) -> Result<Vec<(usize, Option<f64>)>> {
    if losses.len() != entropies.len() {
        return Err(Error::DimensionMismatch {
            expected: losses.len(),
            got: entropies.len(),
        });
    }
    if dt == 0 {
        return Err(Error::InvalidParameter("dt must be positive"));
    }
    let n = losses.len();
    if n <= 2 * dt {
        return Err(Error::SeriesTooShort { len: n, dt });
    }
    Ok((dt..n - dt)
        .map(|i| {
            let du = losses[i + dt] - losses[i - dt];
            let ds = entropies[i + dt] - entropies[i - dt];
            (i, (ds.abs() >= 1e-12).then(|| du / ds))
        })
        .collect())
}

/// `F = U - T S` per estimate and the index of the minimum (earliest on ties).
pub fn free_energy_curve(
    estimates: &[StationaryEstimate],
    temperature: f64,
) -> Result<(Vec<f64>, usize)> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let f: Vec<f64> = estimates
        .iter()
        .map(|e| e.loss - temperature * e.entropy)
        .collect();
    let mut best = 0;
    for (i, v) in f.iter().enumerate() {
        if *v < f[best] {
            best = i;
        }
    }
    Ok((f, best))
}

/// `y = coefficient * x^exponent` fitted by least squares in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// `exp(intercept)`.
    pub coefficient: f64,
    /// Log-log slope.
    pub exponent: f64,
    /// Coefficient of determination in log space (1 for a constant response).
    pub r_squared: f64,
}

/// Ordinary least squares on `(log x, log y)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveInput);
    }
    let lx: Vec<f64> = xs.iter().map(|x| libm::log(*x)).collect();
    let ly: Vec<f64> = ys.iter().map(|y| libm::log(*y)).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateX);
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        coefficient: libm::exp(intercept),
        exponent: slope,
        r_squared,
    })
}

/// Settings for [`uniform_sphere_baseline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    /// Uniform points used for the loss average.
    pub n_samples: usize,
    /// Neighbours for the entropy estimate.
    pub k: usize,
    /// Points per entropy window (match the trajectory window).
    pub window: usize,
    /// Upper limit on the number of entropy windows.
    pub max_windows: usize,
    /// Seed of the sampling stream.
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            k: 50,
            window: 1000,
            max_windows: 20,
            seed: 0,
        }
    }
}

/// Loss and entropy of the uniform distribution on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBaseline {
    /// Mean full loss over all samples.
    pub loss: f64,
    /// Per-sample standard deviation of the full loss.
    pub loss_std: f64,
    /// Mean entropy over disjoint windows.
    pub entropy: f64,
    /// Standard deviation of the window entropies (0 with one window).
    pub entropy_std: f64,
    /// Number of entropy windows.
    pub windows: usize,
}

/// Uniform points on the sphere (Gaussian, normalised): mean full loss over
/// all of them and the k-NN entropy of disjoint windows of `window` points.
pub fn uniform_sphere_baseline<E: LossEnsemble + ?Sized>(
    ensemble: &E,
    cfg: &BaselineConfig,
) -> Result<UniformBaseline> {
    if cfg.n_samples <= cfg.k || cfg.window <= cfg.k || cfg.n_samples < cfg.window {
        return Err(Error::TooFewSamples {
            needed: cfg.k.max(cfg.window - 1),
            got: cfg.n_samples,
        });
    }
    let dim = ensemble.dim();
    let mut rng = seeded(cfg.seed, rng::stream::BASELINE);
    let windows = (cfg.n_samples / cfg.window).clamp(1, cfg.max_windows.max(1));
    let mut kept: Vec<UnitWeights> = Vec::with_capacity(windows * cfg.window);
    let mut losses = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let w = UnitWeights::random(dim, &mut rng)?;
        losses.push(ensemble.full_loss(w.as_slice())?);
        if i < windows * cfg.window {
            kept.push(w);
        }
    }
    let entropies = kept
        .chunks(cfg.window)
        .map(|chunk| knn_entropy(chunk, cfg.k, dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(UniformBaseline {
        loss: mean(&losses),
        loss_std: std_dev(&losses),
        entropy: mean(&entropies),
        entropy_std: std_dev(&entropies),
        windows,
    })
}

/// Why a learning rate was left out of temperature estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    /// Outside an explicit learning-rate range.
    OutsideRange,
    /// Tail failed the stationarity test.
    NotStabilized,
    /// Entropy within one standard deviation of the uniform baseline, or
    /// above a learning rate that already was.
    Saturated,
}

/// Result of [`select_lr_range`].
#[derive(Debug, Clone, PartialEq)]
pub struct LrSelection {
    /// Indices kept, increasing.
    pub retained: Vec<usize>,
    /// Indices dropped with the reason.
    pub excluded: Vec<(usize, Exclusion)>,
}

/// Chooses the learning rates used for temperature estimation.
///
/// With `range = Some((lo, hi))` exactly the learning rates in `[lo, hi]` are
/// kept. Otherwise non-stabilized learning rates are dropped, and so is every
/// learning rate from the first one whose entropy lies within one combined
/// standard deviation of the uniform baseline.
pub fn select_lr_range(
    estimates: &[StationaryEstimate],
    baseline: Option<&UniformBaseline>,
    range: Option<(f64, f64)>,
) -> LrSelection {
    let mut sel = LrSelection {
        retained: Vec::new(),
        excluded: Vec::new(),
    };
    if let Some((lo, hi)) = range {
        for (i, e) in estimates.iter().enumerate() {
            if e.lr >= lo && e.lr <= hi {
                sel.retained.push(i);
            } else {
                sel.excluded.push((i, Exclusion::OutsideRange));
            }
        }
        return sel;
    }
    let mut saturated = false;
    for (i, e) in estimates.iter().enumerate() {
        if let Some(b) = baseline {
            let sigma = libm::sqrt(e.entropy_std * e.entropy_std + b.entropy_std * b.entropy_std);
            saturated |= (e.entropy - b.entropy).abs() <= sigma || e.entropy >= b.entropy;
        }
        if saturated {
            sel.excluded.push((i, Exclusion::Saturated));
        } else if !e.stabilized {
            sel.excluded.push((i, Exclusion::NotStabilized));
        } else {
            sel.retained.push(i);
        }
    }
    sel
}

/// Settings for [`temperature_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Free-energy slack.
    pub epsilon: f64,
    /// Triangular bandwidth in natural-log learning-rate units.
    pub smoothing_h: f64,
    /// Explicit learning-rate range, overriding the automatic exclusions.
    pub lr_range: Option<(f64, f64)>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            smoothing_h: DEFAULT_TRIANGULAR_H,
            lr_range: None,
        }
    }
}

/// Output of [`temperature_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    /// Learning-rate selection.
    pub selection: LrSelection,
    /// Retained estimates with smoothed `U` and `S`.
    pub smoothed: Vec<StationaryEstimate>,
    /// Temperature intervals over the smoothed estimates.
    pub curve: TemperatureCurve,
}

/// Selection, smoothing of `U` and `S` over log learning rate, and the
/// temperature curve.
pub fn temperature_pipeline(
    estimates: &[StationaryEstimate],
    baseline: Option<&UniformBaseline>,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    let selection = select_lr_range(estimates, baseline, cfg.lr_range);
    let kept: Vec<StationaryEstimate> = selection.retained.iter().map(|i| estimates[*i]).collect();
    if kept.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: kept.len(),
        });
    }
    let log_lr: Vec<f64> = kept.iter().map(|e| libm::log(e.lr)).collect();
    let u: Vec<f64> = kept.iter().map(|e| e.loss).collect();
    let s: Vec<f64> = kept.iter().map(|e| e.entropy).collect();
    let u_s = kernel_smooth_triangular(&log_lr, &u, cfg.smoothing_h)?;
    let s_s = kernel_smooth_triangular(&log_lr, &s, cfg.smoothing_h)?;
    let smoothed: Vec<StationaryEstimate> = kept
        .iter()
        .zip(u_s.iter().zip(&s_s))
        .map(|(e, (u, s))| StationaryEstimate {
            loss: *u,
            entropy: *s,
            ..*e
        })
        .collect();
    let curve = temperature_curve(&smoothed, cfg.epsilon)?;
    Ok(PipelineReport {
        selection,
        smoothed,
        curve,
    })
}

/// Full-batch gradient descent `w <- w - lr grad L(w)` (no projection) with
/// gradient statistics logged at log-spaced checkpoints.
pub fn full_batch_descent(
    ensemble: &QuadraticEnsemble,
    start: &[f64],
    lr: f64,
    iters: u64,
    per_decade: u32,
) -> Result<Vec<Checkpoint>> {
    if start.len() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dim(),
            got: start.len(),
        });
    }
    if !(lr > 0.0) || per_decade == 0 || iters == 0 {
        return Err(Error::InvalidParameter(
            "descent needs lr > 0, iters > 0, per_decade > 0",
        ));
    }
    let all: Vec<usize> = (0..ensemble.len()).collect();
    let mut w = start.to_vec();
    let mut grad = vec![0.0; w.len()];
    let mut out = Vec::new();
    let mut schedule = checkpoint_schedule(iters, per_decade)
        .into_iter()
        .peekable();
    for iter in 1..=iters {
        ensemble.batch_grad(&all, &w, &mut grad)?;
        linalg::axpy(-lr, &grad, &mut w);
        if schedule.peek() == Some(&iter) {
            schedule.next();
            let stats = gradient_stats(ensemble, &w)?;
            let loss = ensemble.full_loss(&w)?;
            if !loss.is_finite() || !stats.full_grad_norm.is_finite() {
                return Err(Error::NonFinite { iter });
            }
            out.push(Checkpoint {
                iter,
                loss,
                full_grad_norm: stats.full_grad_norm,
                mean_stoch_grad_norm: stats.mean_stoch_norm,
                snr: stats.snr,
            });
        }
    }
    Ok(out)
}

/// Power law of mean stochastic-gradient norm against full-gradient norm
/// over checkpoints with both norms above `floor`.
pub fn gradient_phase_fit(checkpoints: &[Checkpoint], floor: f64) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = checkpoints
        .iter()
        .filter(|c| c.full_grad_norm > floor && c.mean_stoch_grad_norm > floor)
        .map(|c| (c.full_grad_norm, c.mean_stoch_grad_norm))
        .unzip();
    fit_power_law(&xs, &ys)
}
