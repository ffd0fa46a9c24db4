//! Projected SGD on the unit sphere.
//!
//! Each step moves against a minibatch gradient and renormalises:
//! `w <- (w - lr * g) / |w - lr * g|`. Batches are drawn uniformly without
//! replacement inside a batch and independently across steps (no epochs).
//! Metrics are logged at checkpoints spaced uniformly in log-iteration.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::loss::LossEnsemble;
use crate::metrics::{gradient_stats, Snr};
use crate::rng::{self, SeededRng};
use crate::{linalg, Error, Result};

/// Below this norm a vector is treated as collapsed.
pub const MIN_NORM: f64 = 1e-300;

/// A point on the unit sphere in `R^D`, `D >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitWeights(Vec<f64>);

impl UnitWeights {
    /// Coordinates.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Consumes the point, returning its coordinates.
    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Uniform draw on the sphere: a Gaussian vector, normalised.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(
                "sphere dimension must be at least 2",
            ));
        }
        loop {
            let v = rng::gaussian_vec(rng, dim);
            if linalg::norm(&v) > 1e-12 {
                return project_to_sphere(&v);
            }
        }
    }
}

impl AsRef<[f64]> for UnitWeights {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `v / |v|`.
pub fn project_to_sphere(v: &[f64]) -> Result<UnitWeights> {
    let mut out = v.to_vec();
    normalize_in_place(&mut out)?;
    Ok(UnitWeights(out))
}

fn normalize_in_place(v: &mut [f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::InvalidParameter(
            "sphere dimension must be at least 2",
        ));
    }
    let n = linalg::norm(v);
    if !n.is_finite() {
        return Err(Error::NonFinite { iter: 0 });
    }
    if n < MIN_NORM {
        return Err(Error::ZeroVector { norm: n });
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

/// One projected step `project(w - lr * grad)`. A zero gradient returns `w`
/// unchanged.
pub fn sgd_step(w: &UnitWeights, grad: &[f64], lr: f64) -> Result<UnitWeights> {
    if grad.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: grad.len(),
        });
    }
    let mut next = w.0.clone();
    step_in_place(&mut next, grad, lr)?;
    Ok(UnitWeights(next))
}

fn step_in_place(w: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if grad.iter().all(|g| *g == 0.0) {
        return Ok(());
    }
    linalg::axpy(-lr, grad, w);
    normalize_in_place(w)
}

/// `batch_size` distinct indices in `0..ensemble_size`, uniformly at random.
pub fn sample_batch<R: Rng + ?Sized>(
    ensemble_size: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(batch_size);
    sample_batch_into(ensemble_size, batch_size, rng, &mut out)?;
    Ok(out)
}

fn sample_batch_into<R: Rng + ?Sized>(
    ensemble_size: usize,
    batch_size: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) -> Result<()> {
    if batch_size > ensemble_size {
        return Err(Error::BatchTooLarge {
            batch_size,
            ensemble_size,
        });
    }
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive"));
    }
    out.clear();
    if batch_size == 1 {
        out.push(rng.random_range(0..ensemble_size));
    } else {
        out.extend(rand::seq::index::sample(rng, ensemble_size, batch_size).iter());
    }
    Ok(())
}

/// Optimiser settings for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    /// Fixed learning rate.
    pub learning_rate: f64,
    /// Components per minibatch.
    pub batch_size: usize,
    /// Number of steps.
    pub total_iters: u64,
    /// Seed of the batch-sampling stream.
    pub seed: u64,
    /// Log-spaced checkpoint density.
    pub checkpoints_per_decade: u32,
    /// Stop once the full loss falls below this value; 0 disables.
    pub loss_stop_threshold: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 1,
            total_iters: 50_000,
            seed: 0,
            checkpoints_per_decade: 20,
            loss_stop_threshold: 1e-16,
        }
    }
}

impl SgdConfig {
    /// Checks parameter ranges against an ensemble of `ensemble_size` components.
    pub fn validate(&self, ensemble_size: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(
                "learning rate must be positive and finite",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be positive"));
        }
        if self.batch_size > ensemble_size {
            return Err(Error::BatchTooLarge {
                batch_size: self.batch_size,
                ensemble_size,
            });
        }
        if self.total_iters == 0 {
            return Err(Error::InvalidParameter("total_iters must be positive"));
        }
        if self.checkpoints_per_decade == 0 {
            return Err(Error::InvalidParameter(
                "checkpoints_per_decade must be positive",
            ));
        }
        if !(self.loss_stop_threshold >= 0.0) {
            return Err(Error::InvalidParameter(
                "loss_stop_threshold must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Iterations `1 = t_0 < t_1 < ... <= total` at `round(10^(j / per_decade))`,
/// always including `total`.
pub fn checkpoint_schedule(total: u64, per_decade: u32) -> Vec<u64> {
    let mut out = Vec::new();
    if total == 0 {
        return out;
    }
    let mut j = 0u32;
    loop {
        let t = libm::round(libm::pow(10.0, f64::from(j) / f64::from(per_decade))) as u64;
        if t > total {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        j += 1;
    }
    if out.last() != Some(&total) {
        out.push(total);
    }
    out
}

/// Which iterates are kept for entropy estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    /// Keep nothing.
    None,
    /// Every iterate of the last `window` iterations.
    FinalWindow {
        /// Window length.
        window: usize,
    },
    /// Every iterate of the last `iters` iterations.
    Tail {
        /// Tail length.
        iters: usize,
    },
    /// For every checkpoint, the `window` iterates ending at it, so an
    /// entropy estimate can be attached to each checkpoint.
    CheckpointWindows {
        /// Window length.
        window: usize,
    },
}

/// Metrics logged at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    /// Iteration (number of steps taken).
    pub iter: u64,
    /// Full-ensemble loss.
    pub loss: f64,
    /// Norm of the full gradient.
    pub full_grad_norm: f64,
    /// Mean norm of the per-component gradients.
    pub mean_stoch_grad_norm: f64,
    /// Gradient signal-to-noise ratio.
    pub snr: Snr,
}

/// A retained iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Iteration.
    pub iter: u64,
    /// Weights after `iter` steps.
    pub weights: UnitWeights,
}

/// Output of [`run_trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    /// Logged metrics, strictly increasing in iteration.
    pub checkpoints: Vec<Checkpoint>,
    /// Retained iterates, strictly increasing in iteration.
    pub snapshots: Vec<Snapshot>,
    /// Whether the loss threshold ended the run.
    pub stopped_early: bool,
}

impl TrajectoryLog {
    /// Iteration of the last step taken.
    pub fn final_iter(&self) -> u64 {
        self.checkpoints.last().map_or(0, |c| c.iter)
    }
}

struct SnapshotBuffer {
    ring: VecDeque<Snapshot>,
    capacity: usize,
    flushed_up_to: u64,
}

impl SnapshotBuffer {
    fn new(capacity: usize) -> Self {
        Self {
            ring: VecDeque::with_capacity(capacity),
            capacity,
            flushed_up_to: 0,
        }
    }

    fn push(&mut self, iter: u64, w: &[f64]) {
        if self.capacity == 0 {
            return;
        }
        if self.ring.len() == self.capacity {
            let mut old = self.ring.pop_front().expect("ring is full");
            old.iter = iter;
            old.weights.0.copy_from_slice(w);
            self.ring.push_back(old);
        } else {
            self.ring.push_back(Snapshot {
                iter,
                weights: UnitWeights(w.to_vec()),
            });
        }
    }

    fn flush(&mut self, out: &mut Vec<Snapshot>) {
        for s in &self.ring {
            if s.iter > self.flushed_up_to {
                out.push(s.clone());
            }
        }
        if let Some(last) = self.ring.back() {
            self.flushed_up_to = last.iter;
        }
    }
}

fn log_checkpoint<E: LossEnsemble + ?Sized>(
    ensemble: &E,
    w: &[f64],
    iter: u64,
) -> Result<Checkpoint> {
    let loss = ensemble.full_loss(w)?;
    let stats = gradient_stats(ensemble, w)?;
    let finite = loss.is_finite()
        && stats.full_grad_norm.is_finite()
        && stats.mean_stoch_norm.is_finite()
        && stats.mean_sq_deviation.is_finite();
    if !finite {
        return Err(Error::NonFinite { iter });
    }
    Ok(Checkpoint {
        iter,
        loss,
        full_grad_norm: stats.full_grad_norm,
        mean_stoch_grad_norm: stats.mean_stoch_norm,
        snr: stats.snr,
    })
}

/// Runs projected SGD from `init` and logs metrics at log-spaced checkpoints.
///
/// Batches come from the stream `rng::seeded(cfg.seed, rng::stream::BATCH_BASE)`,
/// so the result is a pure function of the arguments.
pub fn run_trajectory<E: LossEnsemble + ?Sized>(
    ensemble: &E,
    init: &UnitWeights,
    cfg: &SgdConfig,
    snapshots: SnapshotPolicy,
) -> Result<TrajectoryLog> {
    let mut rng = rng::seeded(cfg.seed, rng::stream::BATCH_BASE);
    run_trajectory_with_rng(ensemble, init, cfg, snapshots, &mut rng)
}

/// [`run_trajectory`] with an explicit batch-sampling generator.
pub fn run_trajectory_with_rng<E: LossEnsemble + ?Sized>(
    ensemble: &E,
    init: &UnitWeights,
    cfg: &SgdConfig,
    snapshots: SnapshotPolicy,
    rng: &mut SeededRng,
) -> Result<TrajectoryLog> {
    cfg.validate(ensemble.len())?;
    let dim = ensemble.dim();
    if init.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: init.dim(),
        });
    }

    let schedule = checkpoint_schedule(cfg.total_iters, cfg.checkpoints_per_decade);
    let window = match snapshots {
        SnapshotPolicy::None => 0,
        SnapshotPolicy::FinalWindow { window } | SnapshotPolicy::CheckpointWindows { window } => {
            window
        }
        SnapshotPolicy::Tail { iters } => iters,
    };
    let flush_at_checkpoints = matches!(snapshots, SnapshotPolicy::CheckpointWindows { .. });
    let mut buffer = SnapshotBuffer::new(window);

    let mut log = TrajectoryLog {
        checkpoints: Vec::with_capacity(schedule.len()),
        snapshots: Vec::new(),
        stopped_early: false,
    };
    let mut w = init.as_slice().to_vec();
    let mut grad = vec![0.0; dim];
    let mut component = vec![0.0; dim];
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut next_checkpoint = schedule.iter().copied().peekable();

    for iter in 1..=cfg.total_iters {
        sample_batch_into(ensemble.len(), cfg.batch_size, rng, &mut batch)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &i in &batch {
            ensemble.loss_and_grad(i, &w, &mut component)?;
            linalg::axpy(1.0, &component, &mut grad);
        }
        let scale = 1.0 / cfg.batch_size as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iter });
        }
        step_in_place(&mut w, &grad, cfg.learning_rate)?;
        buffer.push(iter, &w);

        let stop = cfg.loss_stop_threshold > 0.0 && {
            let loss = ensemble.full_loss(&w)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { iter });
            }
            loss < cfg.loss_stop_threshold
        };

        if next_checkpoint.peek() == Some(&iter) || stop {
            next_checkpoint.next();
            log.checkpoints.push(log_checkpoint(ensemble, &w, iter)?);
            if flush_at_checkpoints {
                buffer.flush(&mut log.snapshots);
            }
        }
        if stop {
            log.stopped_early = iter < cfg.total_iters;
            break;
        }
    }
    buffer.flush(&mut log.snapshots);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{make_toy_op, make_toy_up, HyperplaneEnsemble};
    use crate::rng::seeded;

    #[test]
    fn projection_examples() {
        let w = project_to_sphere(&[3.0, 4.0, 0.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.6, 0.8, 0.0]);
        let w = project_to_sphere(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.0, 1.0]);
        assert!(matches!(
            project_to_sphere(&[0.0, 0.0, 0.0]),
            Err(Error::ZeroVector { .. })
        ));
        assert!(project_to_sphere(&[1.0]).is_err());
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = seeded(1, 0);
        for _ in 0..100 {
            let w = UnitWeights::random(7, &mut rng).unwrap();
            let again = project_to_sphere(w.as_slice()).unwrap();
            for (a, b) in w.as_slice().iter().zip(again.as_slice()) {
                assert!((a - b).abs() < 1e-15);
            }
            assert!((linalg::norm(w.as_slice()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_examples() {
        let pole = project_to_sphere(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(sgd_step(&pole, &[0.0; 3], 10.0).unwrap(), pole);

        let w = project_to_sphere(&[1.0, 0.0]).unwrap();
        let next = sgd_step(&w, &[0.0, 1.0], 1.0).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((next.as_slice()[0] - h).abs() < 1e-15);
        assert!((next.as_slice()[1] + h).abs() < 1e-15);

        // The OP toy gradient vanishes at the pole.
        let op = make_toy_op();
        let mut g = [0.0; 3];
        op.batch_grad(&[0, 1], pole.as_slice(), &mut g).unwrap();
        assert_eq!(sgd_step(&pole, &g, 4.8e-3).unwrap(), pole);

        assert!(matches!(
            sgd_step(&w, &[1.0, 0.0], 1.0),
            Err(Error::ZeroVector { .. })
        ));
        assert!(matches!(
            sgd_step(&w, &[1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn batch_sampling() {
        let mut rng = seeded(5, 0);
        for _ in 0..20 {
            let mut b = sample_batch(2, 2, &mut rng).unwrap();
            b.sort_unstable();
            assert_eq!(b, vec![0, 1]);
        }
        for _ in 0..50 {
            let mut b = sample_batch(10, 4, &mut rng).unwrap();
            b.sort_unstable();
            b.dedup();
            assert_eq!(b.len(), 4);
            assert!(b.iter().all(|i| *i < 10));
        }
        assert!(matches!(
            sample_batch(3, 4, &mut rng),
            Err(Error::BatchTooLarge {
                batch_size: 4,
                ensemble_size: 3
            })
        ));

        let draw = |seed| {
            let mut rng = seeded(seed, 0);
            (0..32)
                .map(|_| sample_batch(3, 1, &mut rng).unwrap()[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn batch_frequencies_are_uniform() {
        // Binomial(n, 1/3): sigma = sqrt(n * 1/3 * 2/3).
        let n = 100_000;
        let mut counts = [0usize; 3];
        let mut rng = seeded(2024, 0);
        for _ in 0..n {
            counts[sample_batch(3, 1, &mut rng).unwrap()[0]] += 1;
        }
        let expected = n as f64 / 3.0;
        let sigma = libm::sqrt(n as f64 * (1.0 / 3.0) * (2.0 / 3.0));
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn schedule_is_log_spaced() {
        assert_eq!(checkpoint_schedule(1, 20), vec![1]);
        let s = checkpoint_schedule(1000, 1);
        assert_eq!(s, vec![1, 10, 100, 1000]);
        let s = checkpoint_schedule(50_000, 20);
        assert!(s.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(*s.first().unwrap(), 1);
        assert_eq!(*s.last().unwrap(), 50_000);
        // One point per 1/20 decade once rounding stops merging them.
        let beyond_100 = s.iter().filter(|t| **t >= 100).count();
        assert!((beyond_100 as i64 - 55).abs() <= 2, "{beyond_100}");
    }

    #[test]
    fn single_iteration_run() {
        let ens = make_toy_up();
        let init = project_to_sphere(&[0.3, 0.4, 0.8]).unwrap();
        let cfg = SgdConfig {
            total_iters: 1,
            ..SgdConfig::default()
        };
        let log = run_trajectory(
            &ens,
            &init,
            &cfg,
            SnapshotPolicy::FinalWindow { window: 1000 },
        )
        .unwrap();
        assert_eq!(log.checkpoints.len(), 1);
        assert_eq!(log.checkpoints[0].iter, 1);
        assert_eq!(log.snapshots.len(), 1);
        assert_eq!(log.snapshots[0].iter, 1);
    }

    #[test]
    fn runs_are_deterministic_and_stay_on_the_sphere() {
        let mut rng = seeded(8, 1);
        let ens = HyperplaneEnsemble::random(6, 12, &mut rng).unwrap();
        let init = UnitWeights::random(6, &mut rng).unwrap();
        let cfg = SgdConfig {
            learning_rate: 0.05,
            batch_size: 3,
            total_iters: 5_000,
            seed: 42,
            ..SgdConfig::default()
        };
        let policy = SnapshotPolicy::CheckpointWindows { window: 100 };
        let a = run_trajectory(&ens, &init, &cfg, policy).unwrap();
        let b = run_trajectory(&ens, &init, &cfg, policy).unwrap();
        assert_eq!(a, b);
        assert!(a.checkpoints.windows(2).all(|p| p[0].iter < p[1].iter));
        assert!(a.snapshots.windows(2).all(|p| p[0].iter < p[1].iter));
        assert_eq!(a.final_iter(), 5_000);
        for s in &a.snapshots {
            assert!((linalg::norm(s.weights.as_slice()) - 1.0).abs() < 1e-12);
        }
        // Each checkpoint from iteration 100 on has its full window retained.
        for c in a.checkpoints.iter().filter(|c| c.iter >= 100) {
            let end = a.snapshots.iter().position(|s| s.iter == c.iter).unwrap();
            assert!(end >= 99);
            assert_eq!(a.snapshots[end - 99].iter, c.iter - 99);
        }

        let other = SgdConfig { seed: 43, ..cfg };
        assert_ne!(run_trajectory(&ens, &init, &other, policy).unwrap(), a);
    }

    #[test]
    fn zero_gradient_trajectory_is_constant() {
        let ens = make_toy_op();
        let pole = project_to_sphere(&[0.0, 0.0, -1.0]).unwrap();
        let cfg = SgdConfig {
            total_iters: 200,
            loss_stop_threshold: 0.0,
            ..SgdConfig::default()
        };
        let log = run_trajectory(&ens, &pole, &cfg, SnapshotPolicy::Tail { iters: 200 }).unwrap();
        assert_eq!(log.snapshots.len(), 200);
        assert!(log.snapshots.iter().all(|s| s.weights == pole));
        assert!(log.checkpoints.iter().all(|c| c.snr == Snr::Undefined));
    }

    #[test]
    fn early_stop_is_logged_as_final_checkpoint() {
        let ens = make_toy_op();
        let init = project_to_sphere(&[0.2, 0.5, 0.8]).unwrap();
        let cfg = SgdConfig {
            learning_rate: 2.3e-2,
            total_iters: 50_000,
            ..SgdConfig::default()
        };
        let log = run_trajectory(
            &ens,
            &init,
            &cfg,
            SnapshotPolicy::FinalWindow { window: 10 },
        )
        .unwrap();
        assert!(log.stopped_early);
        let last = log.checkpoints.last().unwrap();
        assert!(last.loss < 1e-16);
        assert_eq!(log.snapshots.last().unwrap().iter, last.iter);
        assert_eq!(log.snapshots.len(), 10);
    }

    #[test]
    fn rejects_bad_configs() {
        let ens = make_toy_op();
        let init = project_to_sphere(&[0.0, 0.6, 0.8]).unwrap();
        let bad = [
            SgdConfig {
                batch_size: 3,
                ..SgdConfig::default()
            },
            SgdConfig {
                learning_rate: 0.0,
                ..SgdConfig::default()
            },
            SgdConfig {
                total_iters: 0,
                ..SgdConfig::default()
            },
            SgdConfig {
                loss_stop_threshold: -1.0,
                ..SgdConfig::default()
            },
        ];
        for cfg in bad {
            assert!(run_trajectory(&ens, &init, &cfg, SnapshotPolicy::None).is_err());
        }
        let wrong_dim = project_to_sphere(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            run_trajectory(
                &ens,
                &wrong_dim,
                &SgdConfig::default(),
                SnapshotPolicy::None
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
