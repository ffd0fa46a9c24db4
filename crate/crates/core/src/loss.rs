//! Scale-invariant loss ensembles.
//!
//! A loss ensemble is the "dataset": an ordered list of per-example loss
//! components `L_i`, with full loss `L = mean(L_i)`. Every spherical component
//! here has the form
//!
//! ```text
//! L_i(w) = (a_i . w)^2 / (2 |w|^2)
//! ```
//!
//! whose zero set is the great circle (great hypersphere) orthogonal to the
//! unit normal `a_i`. On the unit sphere the gradient is
//! `A a_i - A^2 w` with `A = a_i . w`, which is tangent to the sphere.
//!
//! All losses use the factor 1/2 convention.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{self, Matrix};
use crate::rng::gaussian_vec;
use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

/// A finite collection of loss components sharing one parameter space.
///
/// Gradients of the spherical ensembles assume `|w| = 1`; the quadratic
/// ensemble is unconstrained.
pub trait LossEnsemble {
    /// Parameter dimension `D`.
    fn dim(&self) -> usize;

    /// Number of components.
    fn len(&self) -> usize;

    /// `true` when the ensemble has no components.
    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loss of component `index` at `w`; its gradient is written to `grad`.
    fn loss_and_grad(&self, index: usize, w: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Loss of component `index` at `w`.
    fn loss(&self, index: usize, w: &[f64]) -> Result<f64>;

    /// Full loss, the mean over all components.
    fn full_loss(&self, w: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.len() {
            total += self.loss(i, w)?;
        }
        Ok(total / self.len() as f64)
    }

    /// Mean of the component gradients over `indices`, written to `grad`.
    fn batch_grad(&self, indices: &[usize], w: &[f64], grad: &mut [f64]) -> Result<()> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut component = vec![0.0; self.dim()];
        for &i in indices {
            self.loss_and_grad(i, w, &mut component)?;
            linalg::axpy(1.0, &component, grad);
        }
        let n = indices.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_unit(v: &[f64]) -> Result<()> {
    if (linalg::norm(v) - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidParameter(
            "normal vectors must have unit norm",
        ));
    }
    Ok(())
}

fn plane_loss(normal: &[f64], w: &[f64]) -> Result<f64> {
    let norm_sq = linalg::norm_sq(w);
    if norm_sq < 1e-300 {
        return Err(Error::ZeroVector {
            norm: libm::sqrt(norm_sq),
        });
    }
    let a = linalg::dot(normal, w);
    Ok(a * a / (2.0 * norm_sq))
}

/// Exact gradient `(A n - A^2 w / |w|^2) / |w|^2` of the scale-invariant
/// loss, so that off-sphere rounding of `w` does not leak into it.
fn plane_grad(normal: &[f64], w: &[f64], grad: &mut [f64]) -> f64 {
    let inv = 1.0 / linalg::norm_sq(w);
    let a = linalg::dot(normal, w);
    let a_sq = a * a * inv;
    for ((g, n), x) in grad.iter_mut().zip(normal).zip(w) {
        *g = (a * n - a_sq * x) * inv;
    }
    a
}

/// `(n . w)^2 / (2 |w|^2)` for a unit normal `n`.
pub fn circle_loss(normal: &[f64; 3], w: &[f64; 3]) -> Result<f64> {
    plane_loss(normal, w)
}

/// Gradient of [`circle_loss`] at a nonzero `w`; `A n - A^2 w` on the unit
/// sphere.
pub fn circle_grad(normal: &[f64; 3], w: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    plane_grad(normal, w, &mut g);
    g
}

/// Whether every per-example loss can be zeroed simultaneously on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Some component loss stays positive everywhere.
    Underparameterized,
    /// A common zero of all components exists.
    Overparameterized,
}

/// Losses on the 3D sphere whose zero sets are great circles.
#[derive(Debug, Clone, PartialEq)]
pub struct GreatCircleEnsemble {
    normals: Vec<[f64; 3]>,
}

impl GreatCircleEnsemble {
    /// Builds an ensemble from unit normals; at least two are required.
    pub fn new(normals: Vec<[f64; 3]>) -> Result<Self> {
        if normals.len() < 2 {
            return Err(Error::InvalidParameter(
                "a great-circle ensemble needs at least 2 normals",
            ));
        }
        for n in &normals {
            check_unit(n)?;
        }
        Ok(Self { normals })
    }

    /// Normalises each vector before building the ensemble.
    pub fn from_unnormalized(vectors: &[[f64; 3]]) -> Result<Self> {
        let normals = vectors
            .iter()
            .map(|v| {
                let n = linalg::norm(v);
                if n < 1e-300 {
                    return Err(Error::ZeroVector { norm: n });
                }
                Ok([v[0] / n, v[1] / n, v[2] / n])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(normals)
    }

    /// Unit normals.
    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }
}

impl LossEnsemble for GreatCircleEnsemble {
    fn dim(&self) -> usize {
        3
    }

    fn len(&self) -> usize {
        self.normals.len()
    }

    fn loss_and_grad(&self, index: usize, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        let normal = self.normals.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.normals.len(),
        })?;
        check_dim(3, w.len())?;
        check_dim(3, grad.len())?;
        let loss = plane_loss(normal, w)?;
        plane_grad(normal, w, grad);
        Ok(loss)
    }

    fn loss(&self, index: usize, w: &[f64]) -> Result<f64> {
        let normal = self.normals.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.normals.len(),
        })?;
        check_dim(3, w.len())?;
        plane_loss(normal, w)
    }
}

/// Two great circles through the poles `(0, 0, +-1)`, meeting at a common
/// zero of both components.
pub fn make_toy_op() -> GreatCircleEnsemble {
    let c = libm::sqrt(3.0) / 2.0;
    GreatCircleEnsemble {
        normals: vec![[c, 0.5, 0.0], [c, -0.5, 0.0]],
    }
}

/// Three great circles equidistant from `(0, 0, 1)` with equal pairwise
/// angles between normals; no common zero exists.
pub fn make_toy_up() -> GreatCircleEnsemble {
    let s = libm::sqrt(3.0) / 2.0;
    GreatCircleEnsemble::from_unnormalized(&[[1.0, 0.0, 0.2], [-0.5, s, 0.2], [-0.5, -s, 0.2]])
        .expect("toy normals are nonzero")
}

/// D-dimensional generalisation of [`GreatCircleEnsemble`]: `M` unit normals
/// in `R^D`, each component vanishing on the hyperplane orthogonal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneEnsemble {
    dim: usize,
    normals: Vec<Vec<f64>>,
}

impl HyperplaneEnsemble {
    /// Builds an ensemble from unit normals of equal dimension.
    pub fn new(normals: Vec<Vec<f64>>) -> Result<Self> {
        let dim = normals.first().ok_or(Error::EmptyInput)?.len();
        if dim < 2 {
            return Err(Error::InvalidParameter("hyperplane ensembles need D >= 2"));
        }
        for n in &normals {
            check_dim(dim, n.len())?;
            check_unit(n)?;
        }
        Ok(Self { dim, normals })
    }

    /// `count` normals drawn uniformly on the unit sphere in `R^dim`.
    ///
    /// With probability one the normals are in general position, so the
    /// ensemble is overparameterized iff `count < dim`.
    pub fn random<R: Rng + ?Sized>(dim: usize, count: usize, rng: &mut R) -> Result<Self> {
        if dim < 2 || count == 0 {
            return Err(Error::InvalidParameter(
                "hyperplane ensembles need D >= 2 and M >= 1",
            ));
        }
        let normals = (0..count)
            .map(|_| loop {
                let v = gaussian_vec(rng, dim);
                let n = linalg::norm(&v);
                if n > 1e-12 {
                    break v.into_iter().map(|x| x / n).collect();
                }
            })
            .collect();
        Ok(Self { dim, normals })
    }

    /// Unit normals.
    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    /// OP iff the normals span a proper subspace, leaving a common zero on
    /// the sphere.
    pub fn regime(&self) -> Regime {
        if linalg::rank(&self.normals, 1e-10) < self.dim {
            Regime::Overparameterized
        } else {
            Regime::Underparameterized
        }
    }
}

impl LossEnsemble for HyperplaneEnsemble {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.normals.len()
    }

    fn loss_and_grad(&self, index: usize, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        let normal = self.normals.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.normals.len(),
        })?;
        check_dim(self.dim, w.len())?;
        check_dim(self.dim, grad.len())?;
        let loss = plane_loss(normal, w)?;
        plane_grad(normal, w, grad);
        Ok(loss)
    }

    fn loss(&self, index: usize, w: &[f64]) -> Result<f64> {
        let normal = self.normals.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.normals.len(),
        })?;
        check_dim(self.dim, w.len())?;
        plane_loss(normal, w)
    }
}

/// Quadratic components around a shared optimum `w*`:
/// `L_i(w) = L_i(w*) + (w - w*)^T H_i (w - w*) / 2`.
///
/// Unconstrained; used to study gradient statistics near an optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticEnsemble {
    optimum: Vec<f64>,
    hessians: Vec<Matrix>,
    offsets: Vec<f64>,
}

impl QuadraticEnsemble {
    /// Builds an ensemble; Hessians must be symmetric and match the optimum.
    pub fn new(optimum: Vec<f64>, hessians: Vec<Matrix>, offsets: Vec<f64>) -> Result<Self> {
        if hessians.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_dim(hessians.len(), offsets.len())?;
        for h in &hessians {
            check_dim(optimum.len(), h.dim())?;
            if h.asymmetry() > UNIT_TOL {
                return Err(Error::InvalidParameter("Hessians must be symmetric"));
            }
        }
        Ok(Self {
            optimum,
            hessians,
            offsets,
        })
    }

    /// `count` random PSD Hessians `B B^T / rank` with `B` a `dim x rank`
    /// Gaussian factor, all offsets zero (every component vanishes at the
    /// optimum, i.e. the ensemble is overparameterized).
    pub fn random_psd<R: Rng + ?Sized>(
        dim: usize,
        count: usize,
        rank: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 || count == 0 || rank == 0 {
            return Err(Error::InvalidParameter(
                "quadratic ensembles need D, M, rank >= 1",
            ));
        }
        let optimum = gaussian_vec(rng, dim);
        let hessians = (0..count)
            .map(|_| Matrix::gram(dim, rank, &gaussian_vec(rng, dim * rank), rank as f64))
            .collect();
        Self::new(optimum, hessians, vec![0.0; count])
    }

    /// Shared optimum `w*`.
    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    /// Component Hessians.
    pub fn hessians(&self) -> &[Matrix] {
        &self.hessians
    }

    /// Component losses at the optimum.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Full Hessian, the mean of component Hessians.
    pub fn full_hessian(&self) -> Matrix {
        Matrix::mean(&self.hessians).expect("non-empty, equal dimensions")
    }
}

impl LossEnsemble for QuadraticEnsemble {
    fn dim(&self) -> usize {
        self.optimum.len()
    }

    fn len(&self) -> usize {
        self.hessians.len()
    }

    fn loss_and_grad(&self, index: usize, w: &[f64], grad: &mut [f64]) -> Result<f64> {
        let h = self.hessians.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.hessians.len(),
        })?;
        check_dim(self.dim(), w.len())?;
        check_dim(self.dim(), grad.len())?;
        let r: Vec<f64> = w.iter().zip(&self.optimum).map(|(x, o)| x - o).collect();
        h.mul_vec_into(&r, grad);
        Ok(self.offsets[index] + 0.5 * linalg::dot(&r, grad))
    }

    fn loss(&self, index: usize, w: &[f64]) -> Result<f64> {
        let mut grad = vec![0.0; self.dim()];
        self.loss_and_grad(index, w, &mut grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use core::f64::consts::PI;

    fn op_normal() -> [f64; 3] {
        [libm::sqrt(3.0) / 2.0, 0.5, 0.0]
    }

    #[test]
    fn circle_loss_examples() {
        let n = op_normal();
        assert_eq!(circle_loss(&n, &[0.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!((circle_loss(&n, &[1.0, 0.0, 0.0]).unwrap() - 0.375).abs() < 1e-15);
        let w = [0.3, -0.7, 0.2];
        let w2 = [0.6, -1.4, 0.4];
        assert_eq!(circle_loss(&n, &w).unwrap(), circle_loss(&n, &w2).unwrap());
        assert!(matches!(
            circle_loss(&n, &[0.0; 3]),
            Err(Error::ZeroVector { .. })
        ));
    }

    #[test]
    fn circle_grad_examples() {
        let ens = make_toy_op();
        for n in ens.normals() {
            assert_eq!(circle_grad(n, &[0.0, 0.0, 1.0]), [0.0; 3]);
        }
        let g = circle_grad(&op_normal(), &[1.0, 0.0, 0.0]);
        // A = sqrt(3)/2: A n - A^2 w = (3/4 - 3/4, sqrt(3)/4, 0).
        assert!(g[0].abs() < 1e-15);
        assert!((g[1] - libm::sqrt(3.0) / 4.0).abs() < 1e-15);
        assert!((g[1] - 0.433_012_70).abs() < 1e-8);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn toy_ensembles() {
        let op = make_toy_op();
        assert_eq!(op.len(), 2);
        for n in op.normals() {
            assert!((linalg::norm(n) - 1.0).abs() < 1e-12);
            assert_eq!(n[2], 0.0);
        }
        assert_eq!(op.full_loss(&[0.0, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(op.full_loss(&[0.0, 0.0, -1.0]).unwrap(), 0.0);

        let up = make_toy_up();
        assert_eq!(up.len(), 3);
        let n = up.normals();
        let angles = [
            linalg::dot(&n[0], &n[1]),
            linalg::dot(&n[1], &n[2]),
            linalg::dot(&n[0], &n[2]),
        ];
        for n in n {
            assert!((linalg::norm(n) - 1.0).abs() < 1e-12);
        }
        assert!((angles[0] - angles[1]).abs() < 1e-12);
        assert!((angles[0] - angles[2]).abs() < 1e-12);
    }

    #[test]
    fn up_toy_full_loss_is_positive_on_a_dense_grid() {
        let up = make_toy_up();
        let mut min = f64::INFINITY;
        let steps = 200;
        for i in 0..=steps {
            let theta = PI * i as f64 / steps as f64;
            for j in 0..(2 * steps) {
                let phi = PI * j as f64 / steps as f64;
                let w = [
                    libm::sin(theta) * libm::cos(phi),
                    libm::sin(theta) * libm::sin(phi),
                    libm::cos(theta),
                ];
                min = min.min(up.full_loss(&w).unwrap());
            }
        }
        // Minimum sits at the poles: 0.5 * 0.04 / 1.04.
        assert!(min > 0.0);
        assert!((min - 0.02 / 1.04).abs() < 1e-12);
    }

    #[test]
    fn hyperplane_examples() {
        let mut rng = seeded(7, 0);
        let ens = HyperplaneEnsemble::random(5, 3, &mut rng).unwrap();
        let a = ens.normals()[0].clone();
        let mut g = vec![0.0; 5];

        let loss = ens.loss_and_grad(0, &a, &mut g).unwrap();
        assert!((loss - 0.5).abs() < 1e-15);
        assert!(linalg::norm(&g) < 1e-15);

        // A vector orthogonal to a: Gram-Schmidt on e_1.
        let mut w = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let p = linalg::dot(&a, &w);
        linalg::axpy(-p, &a, &mut w);
        let n = linalg::norm(&w);
        w.iter_mut().for_each(|x| *x /= n);
        let loss = ens.loss_and_grad(0, &w, &mut g).unwrap();
        assert!(loss < 1e-30);
        assert!(linalg::norm(&g) < 1e-15);

        assert!(matches!(
            ens.loss_and_grad(3, &w, &mut g),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn hyperplane_reduces_to_circle_in_3d() {
        let circles = make_toy_up();
        let planes =
            HyperplaneEnsemble::new(circles.normals().iter().map(|n| n.to_vec()).collect())
                .unwrap();
        let w = [0.48, -0.6, 0.64];
        for i in 0..3 {
            let mut g1 = [0.0; 3];
            let mut g2 = [0.0; 3];
            let l1 = circles.loss_and_grad(i, &w, &mut g1).unwrap();
            let l2 = planes.loss_and_grad(i, &w, &mut g2).unwrap();
            assert_eq!(l1, l2);
            assert_eq!(g1, g2);
            assert_eq!(l1, circle_loss(&circles.normals()[i], &w).unwrap());
            assert_eq!(g1, circle_grad(&circles.normals()[i], &w));
        }
    }

    #[test]
    fn hyperplane_regime_matches_rank() {
        let mut rng = seeded(3, 1);
        for (d, m) in [(10, 30), (10, 10), (10, 9), (6, 2), (3, 3)] {
            let ens = HyperplaneEnsemble::random(d, m, &mut rng).unwrap();
            let expect = if m < d {
                Regime::Overparameterized
            } else {
                Regime::Underparameterized
            };
            assert_eq!(ens.regime(), expect, "D={d} M={m}");
        }
        let degenerate = HyperplaneEnsemble::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![libm::sqrt(0.5), libm::sqrt(0.5), 0.0],
        ])
        .unwrap();
        assert_eq!(degenerate.regime(), Regime::Overparameterized);
    }

    #[test]
    fn quadratic_examples() {
        let ens =
            QuadraticEnsemble::new(vec![1.0, -2.0, 0.5], vec![Matrix::identity(3)], vec![0.0])
                .unwrap();
        let mut g = vec![0.0; 3];
        assert_eq!(
            ens.loss_and_grad(0, &[1.0, -2.0, 0.5], &mut g).unwrap(),
            0.0
        );
        assert_eq!(g, vec![0.0; 3]);

        let r = [0.6, 0.0, -0.8];
        let w: Vec<f64> = ens.optimum().iter().zip(&r).map(|(o, x)| o + x).collect();
        let loss = ens.loss_and_grad(0, &w, &mut g).unwrap();
        assert!((loss - 0.5).abs() < 1e-15);
        for (gi, ri) in g.iter().zip(&r) {
            assert!((gi - ri).abs() < 1e-15);
        }

        let offset =
            QuadraticEnsemble::new(vec![0.0, 0.0], vec![Matrix::identity(2)], vec![0.25]).unwrap();
        assert_eq!(offset.loss(0, &[0.0, 0.0]).unwrap(), 0.25);
        assert!(matches!(
            offset.loss(1, &[0.0, 0.0]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn op_quadratic_has_vanishing_stochastic_gradients_at_optimum() {
        let mut rng = seeded(11, 1);
        let ens = QuadraticEnsemble::random_psd(6, 4, 2, &mut rng).unwrap();
        let w = ens.optimum().to_vec();
        let mut g = vec![1.0; 6];
        for i in 0..ens.len() {
            assert_eq!(ens.loss_and_grad(i, &w, &mut g).unwrap(), 0.0);
            assert!(g.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn rejects_asymmetric_hessian() {
        let h = Matrix::from_row_major(2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(QuadraticEnsemble::new(vec![0.0; 2], vec![h], vec![0.0]).is_err());
    }
}
