//! Full-gradient, stochastic-gradient and SNR diagnostics.
//!
//! All statistics are population statistics over every ensemble component:
//! with `g_i` the component gradients and `g = mean(g_i)`,
//!
//! ```text
//! SNR = |g| / sqrt(E |g_i - g|^2)
//! ```
//!
//! At an optimum of an overparameterized ensemble all `g_i` vanish and the
//! ratio is 0/0; such points report [`Snr::Undefined`].

use alloc::vec;
use alloc::vec::Vec;

use crate::loss::LossEnsemble;
use crate::{linalg, Result};

/// Deviation below this fraction of `E |g_i|^2` counts as zero (rounding noise).
const REL_ZERO_VARIANCE: f64 = 1e-28;

/// Signal-to-noise ratio of stochastic gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    /// A finite ratio.
    Value(f64),
    /// Stochastic gradients have zero spread.
    Undefined,
}

impl Snr {
    /// The ratio, if defined.
    pub fn value(self) -> Option<f64> {
        match self {
            Snr::Value(v) => Some(v),
            Snr::Undefined => None,
        }
    }

    fn from_parts(signal_sq: f64, noise_sq: f64, scale_sq: f64) -> Self {
        if noise_sq <= REL_ZERO_VARIANCE * scale_sq || noise_sq == 0.0 {
            Snr::Undefined
        } else {
            Snr::Value(libm::sqrt(signal_sq / noise_sq))
        }
    }
}

/// Gradient statistics at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientStats {
    /// `|g|`, norm of the full gradient.
    pub full_grad_norm: f64,
    /// `E |g_i - g|^2`.
    pub mean_sq_deviation: f64,
    /// `E |g_i|`.
    pub mean_stoch_norm: f64,
    /// `|g| / sqrt(E |g_i - g|^2)`.
    pub snr: Snr,
}

/// All component gradients at `w`, row by row.
pub fn component_gradients<E: LossEnsemble + ?Sized>(
    ensemble: &E,
    w: &[f64],
) -> Result<Vec<Vec<f64>>> {
    (0..ensemble.len())
        .map(|i| {
            let mut g = vec![0.0; ensemble.dim()];
            ensemble.loss_and_grad(i, w, &mut g)?;
            Ok(g)
        })
        .collect()
}

/// Population gradient statistics of a set of component gradients.
pub fn stats_of(grads: &[Vec<f64>]) -> GradientStats {
    let m = grads.len() as f64;
    let dim = grads.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for g in grads {
        linalg::axpy(1.0, g, &mut mean);
    }
    mean.iter_mut().for_each(|x| *x /= m);

    let mut deviation = 0.0;
    let mut stoch_norm = 0.0;
    let mut stoch_sq = 0.0;
    for g in grads {
        deviation += linalg::dist_sq(g, &mean);
        let sq = linalg::norm_sq(g);
        stoch_sq += sq;
        stoch_norm += libm::sqrt(sq);
    }
    let deviation = deviation / m;
    let full_sq = linalg::norm_sq(&mean);
    GradientStats {
        full_grad_norm: libm::sqrt(full_sq),
        mean_sq_deviation: deviation,
        mean_stoch_norm: stoch_norm / m,
        snr: Snr::from_parts(full_sq, deviation, stoch_sq / m),
    }
}

/// Exact population statistics over every component of `ensemble` at `w`.
pub fn gradient_stats<E: LossEnsemble + ?Sized>(ensemble: &E, w: &[f64]) -> Result<GradientStats> {
    Ok(stats_of(&component_gradients(ensemble, w)?))
}

/// SNR of a two-component ensemble: `|g1 + g2| / |g1 - g2|`.
pub fn snr_two_component(g1: &[f64], g2: &[f64]) -> Snr {
    debug_assert_eq!(g1.len(), g2.len());
    let sum_sq: f64 = g1.iter().zip(g2).map(|(a, b)| (a + b) * (a + b)).sum();
    let diff_sq = linalg::dist_sq(g1, g2);
    let scale = 0.5 * (linalg::norm_sq(g1) + linalg::norm_sq(g2));
    // The ratio of the halves equals the population form; compare the
    // deviation E|g_i - g|^2 = |g1 - g2|^2 / 4 against the same threshold.
    Snr::from_parts(sum_sq, diff_sq, 4.0 * scale)
}
