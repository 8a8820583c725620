use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::num::{exp, ln, powf, sqrt};
use crate::seed::SimRng;

pub const SYMMETRY_TOL: f64 = 1e-12;

/// `{w : w^T B^{-1} w <= 1}` for a symmetric positive definite `B`.
#[derive(Debug, Clone)]
pub struct CenteredEllipsoid {
    shape: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl CenteredEllipsoid {
    pub fn new(shape: DMatrix<f64>) -> Result<Self> {
        if !shape.is_square() || shape.nrows() == 0 {
            bail!(ShapeMismatch, "shape matrix is {}x{}", shape.nrows(), shape.ncols());
        }
        let d = shape.nrows();
        for i in 0..d {
            for j in 0..i {
                if (shape[(i, j)] - shape[(j, i)]).abs() > SYMMETRY_TOL {
                    bail!(InvalidArgument, "shape matrix is not symmetric at ({}, {})", i, j);
                }
            }
        }
        let chol = match Cholesky::new(shape.clone()) {
            Some(c) => c,
            None => bail!(InvalidArgument, "shape matrix is not positive definite"),
        };
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().take(d).map(|x| ln(*x)).sum::<f64>();
        Ok(CenteredEllipsoid { shape, chol, log_det })
    }

    /// Ball of radius `r`.
    pub fn ball(d: usize, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            bail!(InvalidArgument, "radius {} must be positive", r);
        }
        Self::new(DMatrix::identity(d, d) * (r * r))
    }

    pub fn dimension(&self) -> usize {
        self.shape.nrows()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `w^T B^{-1} w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let v = DVector::from_column_slice(w);
        v.dot(&self.chol.solve(&v))
    }

    pub fn contains(&self, w: &[f64], slack: f64) -> bool {
        self.quadratic_form(w) <= 1.0 + slack
    }

    /// Half-width `sqrt(p^T B p)` of the ellipsoid along `p`.
    pub fn support(&self, p: &[f64]) -> f64 {
        let v = DVector::from_column_slice(p);
        sqrt(v.dot(&(&self.shape * &v)).max(0.0))
    }

    /// Smallest ellipsoid containing `self ∩ {w : |p^T w| <= tau}`.
    /// Returns `None` when the slab does not cut deep enough to shrink it,
    /// i.e. when `tau / sqrt(p^T B p) >= 1/sqrt(d)`.
    pub fn cut(&self, p: &[f64], tau: f64) -> Result<Option<(CenteredEllipsoid, f64)>> {
        let d = self.dimension();
        if p.len() != d {
            bail!(ShapeMismatch, "direction has length {}, ellipsoid dimension {}", p.len(), d);
        }
        if !(tau >= 0.0) {
            bail!(InvalidArgument, "half-width {} must be nonnegative", tau);
        }
        let alpha = self.support(p);
        if alpha == 0.0 {
            return Ok(None);
        }
        let beta = tau / alpha;
        if beta >= 1.0 / sqrt(d as f64) {
            return Ok(None);
        }
        if beta == 0.0 {
            bail!(InvalidArgument, "zero-width slab collapses the ellipsoid");
        }
        let (rho, sigma) = todd_coefficients(beta, d);
        let v = DVector::from_column_slice(p);
        let bp = &self.shape * &v;
        let mut next = (&self.shape - (&bp * bp.transpose()) * (sigma / (alpha * alpha))) * rho;
        next = (&next + next.transpose()) * 0.5;
        Ok(Some((CenteredEllipsoid::new(next)?, beta)))
    }
}

fn check_beta(beta: f64, d: usize) -> Result<()> {
    if d == 0 {
        bail!(InvalidArgument, "dimension must be at least 1");
    }
    if !(beta > 0.0 && beta <= 1.0 / sqrt(d as f64) * (1.0 + 1e-15)) {
        bail!(InvalidArgument, "beta = {} outside (0, 1/sqrt({})]", beta, d);
    }
    Ok(())
}

/// `(rho, sigma)` for `d >= 2`; for `d = 1` the pair `(beta^2, 0)`.
fn todd_coefficients(beta: f64, d: usize) -> (f64, f64) {
    if d == 1 {
        return (beta * beta, 0.0);
    }
    let (df, b2) = (d as f64, beta * beta);
    let sigma = (1.0 - df * b2) / (1.0 - b2);
    let rho = df * (1.0 - b2) / (df - 1.0);
    (rho, sigma.max(0.0))
}

/// Minimum-volume ellipsoid around `{|w| <= 1, |w_1| <= beta}`:
/// `rho (I - sigma e_1 e_1^T)`.
pub fn mvee_slab_cut_unit(beta: f64, d: usize) -> Result<CenteredEllipsoid> {
    check_beta(beta, d)?;
    let (rho, sigma) = todd_coefficients(beta, d);
    let mut b = DMatrix::identity(d, d) * rho;
    b[(0, 0)] = rho * (1.0 - sigma);
    CenteredEllipsoid::new(b)
}

/// Logarithm of [`volume_ratio`].
pub fn log_volume_ratio(beta: f64, d: usize) -> Result<f64> {
    check_beta(beta, d)?;
    if d == 1 {
        return Ok(ln(beta));
    }
    let df = d as f64;
    let half = (df - 1.0) / 2.0;
    Ok(0.5 * ln(df) + ln(beta) + half * (ln(df) - ln(df - 1.0)) + half * ln(1.0 - beta * beta))
}

/// `sqrt(d) beta (d/(d-1))^{(d-1)/2} (1-beta^2)^{(d-1)/2}`; equals `beta`
/// when `d = 1`.
pub fn volume_ratio(beta: f64, d: usize) -> Result<f64> {
    let r = exp(log_volume_ratio(beta, d)?);
    Ok(if r > 1.0 && beta >= 1.0 / sqrt(d as f64) { 1.0 } else { r })
}

/// Volume bound for one cut with half-width `tau` and witness `kappa`.
pub fn slab_cut_ratio_bound(kappa: f64, tau: f64, d: usize) -> Result<f64> {
    if !(kappa > 0.0) {
        bail!(InvalidArgument, "kappa = {} must be positive", kappa);
    }
    if !(tau >= 0.0) {
        bail!(InvalidArgument, "tau = {} must be nonnegative", tau);
    }
    if tau == 0.0 {
        if d == 0 {
            bail!(InvalidArgument, "dimension must be at least 1");
        }
        return Ok(0.0);
    }
    volume_ratio(tau / kappa, d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabCut {
    pub direction: Vec<f64>,
    pub half_width: f64,
    pub witness: f64,
}

impl SlabCut {
    pub fn new(direction: Vec<f64>, half_width: f64, witness: f64) -> Result<Self> {
        if direction.iter().all(|&x| x == 0.0) {
            bail!(InvalidArgument, "slab direction must be nonzero");
        }
        if !(half_width >= 0.0) || !(witness > 0.0) {
            bail!(InvalidArgument, "need half_width >= 0 and witness > 0");
        }
        Ok(SlabCut { direction, half_width, witness })
    }

    pub fn dimension(&self) -> usize {
        self.direction.len()
    }

    pub fn beta(&self) -> f64 {
        self.half_width / self.witness
    }

    pub fn ratio_bound(&self) -> Result<f64> {
        slab_cut_ratio_bound(self.witness, self.half_width, self.dimension())
    }
}

/// A point of `{|w| <= 1, |w_1| <= beta}` by rejection. With `on_sphere`
/// the point has unit norm, which exercises the extreme points of the set.
/// In one dimension the extreme points are `+-min(beta, 1)`.
pub fn sample_slab_ball(beta: f64, d: usize, on_sphere: bool, rng: &mut SimRng) -> Vec<f64> {
    if d == 1 && on_sphere {
        let w = beta.min(1.0);
        return alloc::vec![if rng.random::<bool>() { w } else { -w }];
    }
    loop {
        let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = sqrt(w.iter().map(|x| x * x).sum());
        if n == 0.0 {
            continue;
        }
        let r = if on_sphere { 1.0 } else { powf(rng.random::<f64>(), 1.0 / d as f64) };
        for x in &mut w {
            *x *= r / n;
        }
        if w[0].abs() <= beta {
            return w;
        }
    }
}
