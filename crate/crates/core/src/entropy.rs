//! k-nearest-neighbour graph entropy estimator.
//!
//! For `N` samples in `R^D` with `L_k` the total length of the directed k-NN
//! graph (each point linked to its `k` nearest other points, `N k` edges),
//!
//! ```text
//! S = D (log L_k - (D - 1) / D * log N)
//! ```
//!
//! estimates differential entropy up to an additive constant that does not
//! depend on the distribution. Distances are ambient Euclidean; neighbours
//! are found by exact brute force and ties are broken by sample index.

use alloc::vec::Vec;

use crate::sphere::Snapshot;
use crate::{Error, Result};

/// Window and neighbourhood sizes for trajectory entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntropyConfig {
    /// Neighbours per point.
    pub k: usize,
    /// Samples per estimate.
    pub window: usize,
    /// Iterates between successive window ends.
    pub stride: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            k: 50,
            window: 1000,
            stride: 1000,
        }
    }
}

impl EntropyConfig {
    /// Requires `0 < k < window` and a positive stride.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.window {
            return Err(Error::InvalidParameter("entropy needs 0 < k < window"));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("entropy stride must be positive"));
        }
        Ok(())
    }
}

/// Total k-NN graph length and the number of zero-length edges in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLength {
    /// Sum of the distances from each point to its `k` nearest neighbours.
    pub total: f64,
    /// Edges of length exactly zero (coincident samples).
    pub zero_edges: usize,
}

/// Sum over all points of the distances to their `k` nearest neighbours.
pub fn knn_total_edge_length<S: AsRef<[f64]>>(samples: &[S], k: usize) -> Result<EdgeLength> {
    let n = samples.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive"));
    }
    if n <= k {
        return Err(Error::TooFewSamples { needed: k, got: n });
    }
    let dim = samples[0].as_ref().len();
    for s in samples {
        if s.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.as_ref().len(),
            });
        }
    }

    let mut row: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    let mut nearest: Vec<f64> = Vec::with_capacity(k);
    let mut total = 0.0;
    let mut zero_edges = 0;
    for (i, a) in samples.iter().enumerate() {
        let a = a.as_ref();
        row.clear();
        row.extend(
            samples
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, b)| (crate::linalg::dist_sq(a, b.as_ref()), j)),
        );
        let by_dist_then_index =
            |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
        if k < row.len() {
            row.select_nth_unstable_by(k - 1, by_dist_then_index);
        }
        nearest.clear();
        nearest.extend(row[..k].iter().map(|(d, _)| libm::sqrt(*d)));
        nearest.sort_unstable_by(f64::total_cmp);
        zero_edges += nearest.iter().filter(|d| **d == 0.0).count();
        total += nearest.iter().sum::<f64>();
    }
    Ok(EdgeLength { total, zero_edges })
}

/// `D (log L_k - (D - 1) / D log N)` for samples of dimension `dim`.
pub fn knn_entropy<S: AsRef<[f64]>>(samples: &[S], k: usize, dim: usize) -> Result<f64> {
    if let Some(first) = samples.first() {
        if first.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: first.as_ref().len(),
            });
        }
    }
    let length = knn_total_edge_length(samples, k)?;
    if length.total <= 0.0 {
        return Err(Error::NonPositiveEdgeLength);
    }
    let d = dim as f64;
    let n = samples.len() as f64;
    Ok(d * (libm::log(length.total) - (d - 1.0) / d * libm::log(n)))
}

fn window_estimate(window: &[Snapshot], k: usize) -> Result<f64> {
    let dim = window[0].weights.dim();
    let points: Vec<&[f64]> = window.iter().map(|s| s.weights.as_slice()).collect();
    match knn_entropy(&points, k, dim) {
        Err(Error::NonPositiveEdgeLength) => Ok(f64::NEG_INFINITY),
        other => other,
    }
}

/// Entropy over sliding windows of consecutive snapshots.
///
/// Windows are laid out backwards from the last snapshot every `stride`
/// snapshots, so the final window is always included; each estimate is
/// tagged with the iteration of its last snapshot and the series is returned
/// in increasing iteration order. Collapsed windows yield `-inf`.
pub fn sliding_window_entropy(
    snapshots: &[Snapshot],
    cfg: &EntropyConfig,
) -> Result<Vec<(u64, f64)>> {
    cfg.validate()?;
    if snapshots.len() < cfg.window {
        return Err(Error::TooFewSamples {
            needed: cfg.window - 1,
            got: snapshots.len(),
        });
    }
    let mut out = Vec::new();
    let mut end = snapshots.len();
    loop {
        let window = &snapshots[end - cfg.window..end];
        out.push((window[cfg.window - 1].iter, window_estimate(window, cfg.k)?));
        if end < cfg.window + cfg.stride {
            break;
        }
        end -= cfg.stride;
    }
    out.reverse();
    Ok(out)
}

/// Entropy of the `cfg.window` consecutive iterates ending at each of `iters`.
///
/// Iterations without a complete contiguous window in `snapshots` are
/// skipped. `snapshots` must be sorted by iteration.
pub fn checkpoint_entropy(
    snapshots: &[Snapshot],
    iters: &[u64],
    cfg: &EntropyConfig,
) -> Result<Vec<(u64, f64)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &iter in iters {
        let Ok(end) = snapshots.binary_search_by_key(&iter, |s| s.iter) else {
            continue;
        };
        if end + 1 < cfg.window {
            continue;
        }
        let window = &snapshots[end + 1 - cfg.window..=end];
        if window[0].iter + cfg.window as u64 - 1 != iter {
            continue;
        }
        out.push((iter, window_estimate(window, cfg.k)?));
    }
    Ok(out)
}
