//! Closed-form SNR expressions used as ground truth.
//!
//! Two-circle model: on the unit sphere take components
//! `f_{1,2} = (x cos a +- y sin a)^2 / 2` (normals at half-angle `a` from the
//! x-axis, `0 < a < pi/4`). Their gradient SNR has the exact form
//!
//! ```text
//! SNR^2 = (x^2 c^4 + y^2 s^4 - (x^2 c^2 + y^2 s^2)^2) / (s^2 c^2 (x^2 + y^2 - 4 x^2 y^2))
//! ```
//!
//! with `c = cos a`, `s = sin a`, independent of `z`. In polar coordinates
//! `x = r sin(phi)`, `y = r cos(phi)`, the minimum over `phi` sits on the
//! central meridian `phi = 0` where `SNR^2 = (1 - r^2) tan^2 a`, and for fixed
//! `phi` the value increases towards its `r -> 0` limit.
//!
//! Quadratic ensembles with a shared optimum: along `w = w* + delta r`,
//! `SNR = |H r| / sqrt(E |H_i r|^2 - |H r|^2)` for every `delta > 0`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;

use crate::linalg::{self, Matrix};
use crate::loss::{GreatCircleEnsemble, LossEnsemble, QuadraticEnsemble};
use crate::metrics::{gradient_stats, Snr};
use crate::rng::seeded;
use crate::sphere::UnitWeights;
use crate::{Error, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < FRAC_PI_4) {
        return Err(Error::DomainViolation("alpha must lie in (0, pi/4)"));
    }
    Ok(())
}

/// Polar position relative to the two-circle optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremParams {
    alpha: f64,
    r: f64,
    phi: f64,
}

impl TheoremParams {
    /// Requires `0 < alpha < pi/4`, `0 < r <= 1`, `|phi| <= alpha`.
    pub fn new(alpha: f64, r: f64, phi: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::DomainViolation("r must lie in (0, 1]"));
        }
        if !(phi.abs() <= alpha) {
            return Err(Error::DomainViolation("phi must lie in [-alpha, alpha]"));
        }
        Ok(Self { alpha, r, phi })
    }

    /// Half-angle between the normals.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Distance from the pole axis, `sqrt(x^2 + y^2)`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Angle from the central meridian.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `(x, y) = (r sin phi, r cos phi)`.
    pub fn xy(&self) -> (f64, f64) {
        (self.r * libm::sin(self.phi), self.r * libm::cos(self.phi))
    }

    /// Closed-form `SNR^2` at this point.
    pub fn snr_sq(&self) -> Result<f64> {
        let (x, y) = self.xy();
        theorem1_snr_sq(x, y, self.alpha)
    }
}

/// The two-circle ensemble with normals `(cos a, +-sin a, 0)`.
pub fn two_circle_ensemble(alpha: f64) -> Result<GreatCircleEnsemble> {
    check_alpha(alpha)?;
    let (s, c) = (libm::sin(alpha), libm::cos(alpha));
    GreatCircleEnsemble::new(vec![[c, s, 0.0], [c, -s, 0.0]])
}

/// Closed-form squared SNR of the two-circle model at `(x, y, .)` on the unit
/// sphere, i.e. with `z^2 = 1 - x^2 - y^2`.
pub fn theorem1_snr_sq(x: f64, y: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let rho_sq = x * x + y * y;
    if !(rho_sq > 0.0 && rho_sq <= 1.0 + 1e-12) {
        return Err(Error::DomainViolation("need 0 < x^2 + y^2 <= 1"));
    }
    let z = libm::sqrt((1.0 - rho_sq).max(0.0));
    toy_snr_sq_at(&[x, y, z], alpha)
}

/// [`theorem1_snr_sq`] at the ray through any nonzero `w`.
///
/// Uses the degree-0 homogeneous form
///
/// ```text
/// (x^2 y^2 cos^2(2a) + z^2 (x^2 c^4 + y^2 s^4)) / (s^2 c^2 ((x^2 - y^2)^2 + (x^2 + y^2) z^2))
/// ```
///
/// which equals the sphere expression when `|w| = 1` and has no cancellation,
/// so it stays accurate near the ring where the denominator vanishes.
pub fn toy_snr_sq_at(w: &[f64; 3], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let [x, y, z] = *w;
    let (x2, y2, z2) = (x * x, y * y, z * z);
    if !(x2 + y2 > 0.0) || !(x2 + y2 + z2).is_finite() {
        return Err(Error::DomainViolation("need (x, y) != 0"));
    }
    let (s, c) = (libm::sin(alpha), libm::cos(alpha));
    let (s2, c2) = (s * s, c * c);
    let cos2a = libm::cos(2.0 * alpha);
    let scale = (x2 + y2 + z2) * (x2 + y2 + z2);
    let numerator = (x2 * y2 * cos2a * cos2a + z2 * (x2 * c2 * c2 + y2 * s2 * s2)) / scale;
    let diff = x2 - y2;
    let denominator = s2 * c2 * (diff * diff + (x2 + y2) * z2) / scale;
    if denominator.abs() < 1e-14 {
        return Err(Error::DegeneratePoint);
    }
    Ok(numerator / denominator)
}

/// SNR on the central meridian at distance `r`: `sqrt(1 - r^2) tan(alpha)`.
/// `r = 0` gives the limit at the optimum.
pub fn theorem1_meridian_limit(r: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::DomainViolation("r must lie in [0, 1]"));
    }
    Ok(libm::sqrt(1.0 - r * r) * libm::tan(alpha))
}

/// `|H r| / sqrt(E |H_i r - H r|^2)` for `H = mean(H_i)`.
pub fn lemma1_snr(hessians: &[Matrix], r: &[f64]) -> Result<Snr> {
    let full = Matrix::mean(hessians)?;
    if full.dim() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: full.dim(),
            got: r.len(),
        });
    }
    let hr = full.mul_vec(r);
    let variance = hessians
        .iter()
        .map(|h| linalg::dist_sq(&h.mul_vec(r), &hr))
        .sum::<f64>()
        / hessians.len() as f64;
    if variance < 1e-14 {
        return Ok(Snr::Undefined);
    }
    Ok(Snr::Value(linalg::norm(&hr) / libm::sqrt(variance)))
}

const FACTOR_LEAD: f64 = 8.0;

/// `(M Q - P) - (S - R)(8 R S^2 - 8 R S + R - 4 S^2 + 3 S)` with
/// `M = S(1-R)^2 + (1-S)R^2`, `P = (S(1-R) + (1-S)R)^2`, `Q = 4 S (1-S)`.
///
/// Vanishes identically on `0 <= S <= R < 1/2`; returns the rounding residual.
pub fn factorization_residual(s: f64, r: f64) -> Result<f64> {
    factorization_residual_with_lead(s, r, FACTOR_LEAD)
}

#[doc(hidden)]
pub fn factorization_residual_with_lead(s: f64, r: f64, lead: f64) -> Result<f64> {
    if !(0.0 <= s && s <= r && r < 0.5) {
        return Err(Error::DomainViolation("need 0 <= S <= R < 1/2"));
    }
    let m = s * (1.0 - r) * (1.0 - r) + (1.0 - s) * r * r;
    let p = {
        let t = s * (1.0 - r) + (1.0 - s) * r;
        t * t
    };
    let q = 4.0 * s * (1.0 - s);
    let factored = (s - r) * (lead * r * s * s - lead * r * s + r - 4.0 * s * s + 3.0 * s);
    Ok((m * q - p) - factored)
}

/// Outcome of one identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    /// Short identifier.
    pub name: &'static str,
    /// What was checked.
    pub detail: String,
    /// Worst residual (or violation) observed.
    pub max_residual: f64,
    /// Acceptance threshold for `max_residual`.
    pub tolerance: f64,
}

impl OracleCheck {
    /// `max_residual <= tolerance`.
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

/// Knobs for [`run_oracle_checks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Seed for random sample points.
    pub seed: u64,
    /// Added to the leading constant of the factorization (negative control).
    pub factorization_perturbation: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            factorization_perturbation: 0.0,
        }
    }
}

fn random_sphere_point<R: Rng>(rng: &mut R) -> [f64; 3] {
    let w = UnitWeights::random(3, rng).expect("dim 3");
    let s = w.as_slice();
    [s[0], s[1], s[2]]
}

/// Measured SNR^2 on the two-circle model vs the closed form at `count`
/// random sphere points; returns the worst absolute difference.
pub fn toy_snr_equivalence(alpha: f64, count: usize, seed: u64) -> Result<f64> {
    let ens = two_circle_ensemble(alpha)?;
    let mut rng = seeded(seed, 0);
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let w = random_sphere_point(&mut rng);
        let measured = gradient_stats(&ens, &w)?
            .snr
            .value()
            .ok_or(Error::DegeneratePoint)?;
        let closed = toy_snr_sq_at(&w, alpha)?;
        worst = worst.max((measured * measured - closed).abs());
    }
    Ok(worst)
}

/// Largest excess of `SNR^2(phi = 0)` over `SNR^2(phi)` on a `phi` grid of
/// spacing `step` in `[-alpha, alpha]`; zero when `phi = 0` is the minimum.
pub fn meridian_minimum_violation(r: f64, alpha: f64, step: f64) -> Result<f64> {
    let at_zero = TheoremParams::new(alpha, r, 0.0)?.snr_sq()?;
    let n = libm::floor(alpha / step) as i64;
    let mut worst = 0.0_f64;
    for i in -n..=n {
        let phi = (i as f64 * step).clamp(-alpha, alpha);
        let v = TheoremParams::new(alpha, r, phi)?.snr_sq()?;
        worst = worst.max(at_zero - v);
    }
    Ok(worst)
}

/// Largest increase of `SNR^2` between consecutive points of an `r^2` grid
/// of `points` values in `(0, 1)` at fixed `phi`; zero when nonincreasing.
pub fn radial_monotonicity_violation(phi: f64, alpha: f64, points: usize) -> Result<f64> {
    let mut prev: Option<f64> = None;
    let mut worst = 0.0_f64;
    for i in 1..=points {
        let r_sq = i as f64 / (points + 1) as f64;
        let v = TheoremParams::new(alpha, libm::sqrt(r_sq), phi)?.snr_sq()?;
        if let Some(p) = prev {
            worst = worst.max(v - p);
        }
        prev = Some(v);
    }
    Ok(worst)
}

/// Worst spread of the measured SNR over `deltas` along random directions
/// from the optimum, and worst gap to [`lemma1_snr`].
pub fn quadratic_delta_spread(
    ens: &QuadraticEnsemble,
    directions: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = seeded(seed, 0);
    let dim = ens.dim();
    let mut worst = 0.0_f64;
    for _ in 0..directions {
        let r = UnitWeights::random(dim, &mut rng)?;
        let r = r.as_slice();
        let expected = match lemma1_snr(ens.hessians(), r)? {
            Snr::Value(v) => v,
            Snr::Undefined => continue,
        };
        for delta in [1e-1, 1e-3, 1e-6] {
            let w: Vec<f64> = ens
                .optimum()
                .iter()
                .zip(r)
                .map(|(o, x)| o + delta * x)
                .collect();
            let snr = gradient_stats(ens, &w)?
                .snr
                .value()
                .ok_or(Error::DegeneratePoint)?;
            worst = worst.max((snr - expected).abs());
        }
    }
    Ok(worst)
}

/// Runs the full identity suite.
pub fn run_oracle_checks(opts: &OracleOptions) -> Result<Vec<OracleCheck>> {
    let mut checks = Vec::new();
    let alpha = PI / 6.0;

    checks.push(OracleCheck {
        name: "toy-snr-closed-form",
        detail: String::from("measured SNR^2 vs closed form, 1000 random sphere points"),
        max_residual: toy_snr_equivalence(alpha, 1000, opts.seed)?,
        tolerance: 1e-10,
    });

    let mut worst = 0.0_f64;
    for r in [0.2, 0.5, 0.8] {
        for a in [PI / 12.0, PI / 6.0, PI / 5.0] {
            worst = worst.max(meridian_minimum_violation(r, a, 1e-3)?);
        }
    }
    checks.push(OracleCheck {
        name: "central-meridian-minimum",
        detail: String::from("SNR^2(phi=0) <= SNR^2(phi) on a 1e-3 rad grid"),
        max_residual: worst,
        tolerance: 0.0,
    });

    let mut worst = 0.0_f64;
    for a in [PI / 12.0, PI / 6.0, PI / 5.0] {
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
            worst = worst.max(radial_monotonicity_violation(frac * a, a, 1000)?);
        }
    }
    checks.push(OracleCheck {
        name: "radial-monotonicity",
        detail: String::from("SNR^2 nonincreasing in r^2 on a 1000-point grid"),
        max_residual: worst,
        // Constant in r on the example circles themselves (phi = +-alpha).
        tolerance: 1e-12,
    });

    let mut rng = seeded(opts.seed, 1);
    let lead = FACTOR_LEAD + opts.factorization_perturbation;
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let r: f64 = rng.random_range(0.0..0.5);
        let s: f64 = rng.random_range(0.0..=r);
        worst = worst.max(factorization_residual_with_lead(s, r, lead)?.abs());
    }
    checks.push(OracleCheck {
        name: "factorization",
        detail: format!("|MQ - P - (S-R)({lead} R S^2 - ...)| over 10^4 samples"),
        max_residual: worst,
        tolerance: 1e-12,
    });

    let mut worst = 0.0_f64;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let limit = theorem1_meridian_limit(r, alpha)?;
        if r > 0.0 {
            worst = worst.max((limit - libm::sqrt(theorem1_snr_sq(0.0, r, alpha)?)).abs());
        }
    }
    checks.push(OracleCheck {
        name: "meridian-limit",
        detail: String::from("sqrt(1-r^2) tan(a) vs closed form on the central meridian"),
        max_residual: worst,
        tolerance: 1e-12,
    });

    let mut worst = 0.0_f64;
    for (i, (dim, count)) in [(2, 2), (4, 3), (6, 8), (10, 5), (10, 8)]
        .into_iter()
        .enumerate()
    {
        let mut rng = seeded(opts.seed, 100 + i as u64);
        let rank = 1 + i % 3;
        let ens = QuadraticEnsemble::random_psd(dim, count, rank, &mut rng)?;
        // Optimum at the origin keeps w - w* exact down to delta = 1e-6.
        let ens = QuadraticEnsemble::new(
            vec![0.0; dim],
            ens.hessians().to_vec(),
            ens.offsets().to_vec(),
        )?;
        worst = worst.max(quadratic_delta_spread(&ens, 20, opts.seed + i as u64)?);
    }
    checks.push(OracleCheck {
        name: "quadratic-snr-delta-independence",
        detail: String::from("SNR at w*+delta r for delta in {1e-1,1e-3,1e-6} vs |Hr|/sqrt(var)"),
        max_residual: worst,
        tolerance: 1e-10,
    });

    let ens = two_circle_ensemble(alpha)?;
    let mut rng = seeded(opts.seed, 2);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let w = random_sphere_point(&mut rng);
        let mirrored = [w[0], w[1], -w[2]];
        let a = gradient_stats(&ens, &w)?.snr.value().unwrap_or(f64::NAN);
        let b = gradient_stats(&ens, &mirrored)?
            .snr
            .value()
            .unwrap_or(f64::NAN);
        worst = worst.max((a - b).abs());
    }
    checks.push(OracleCheck {
        name: "z-independence",
        detail: String::from("measured SNR at (x, y, z) vs (x, y, -z)"),
        max_residual: worst,
        tolerance: 1e-10,
    });

    Ok(checks)
}
