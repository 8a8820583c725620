use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::num::{ceil, ln, sqrt};

/// Elimination threshold and the three sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub phi: f64,
    pub n_est: u64,
    pub n_eval: u64,
    pub n: u64,
}

fn to_count(x: f64) -> u64 {
    let c = ceil(x);
    if c >= u64::MAX as f64 {
        u64::MAX
    } else {
        c as u64
    }
}

pub(crate) fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        bail!(InvalidArgument, "{} = {} must lie in (0, 1)", name, v);
    }
    Ok(())
}

/// Sample sizes and threshold that make the high-probability argument go
/// through. Logarithms are natural; sizes are rounded up.
///
/// `phi = eps / (12 H sqrt(M))`,
/// `n_est = 32/eps^2 ln(6N/delta)`,
/// `n_eval = 288 H^2/eps^2 ln(12 H^2 M L / delta)`,
/// `n = 4608 H^2 M K/eps^2 ln(12 N H M L / delta)`,
/// with `L = ln(6 H sqrt(M) zeta / eps)`.
pub fn compute_parameters(epsilon: f64, delta: f64, m: usize, zeta: f64, horizon: usize, actions: usize, size: usize) -> Result<Parameters> {
    check_unit_open("epsilon", epsilon)?;
    check_unit_open("delta", delta)?;
    if m == 0 || horizon == 0 || actions == 0 || size == 0 {
        bail!(InvalidArgument, "M, H, K and N must all be at least 1");
    }
    if !(zeta > 0.0) {
        bail!(InvalidArgument, "zeta = {} must be positive", zeta);
    }
    let (h, mf, k, n) = (horizon as f64, m as f64, actions as f64, size as f64);
    let eps2 = epsilon * epsilon;
    let inner = ln(6.0 * h * sqrt(mf) * zeta / epsilon);
    if !(inner > 0.0) {
        bail!(InvalidArgument, "ln(6 H sqrt(M) zeta / eps) = {} is not positive", inner);
    }
    Ok(Parameters {
        phi: epsilon / (12.0 * h * sqrt(mf)),
        n_est: to_count(32.0 / eps2 * ln(6.0 * n / delta)),
        n_eval: to_count(288.0 * h * h / eps2 * ln(12.0 * h * h * mf * inner / delta)),
        n: to_count(4608.0 * h * h * mf * k / eps2 * ln(12.0 * n * h * mf * inner / delta)),
    })
}

/// `eps' = eps + 2H(3 sqrt(M)(theta + theta_M) + theta_M)`.
pub fn effective_epsilon(epsilon: f64, horizon: usize, m: usize, theta: f64, theta_m: f64) -> f64 {
    epsilon + 2.0 * horizon as f64 * (3.0 * sqrt(m as f64) * (theta + theta_m) + theta_m)
}

/// Per-level cut bound `M ln(zeta / (2 phi)) / ln(5/3)`.
pub fn per_level_iteration_bound(m: usize, zeta: f64, phi: f64) -> f64 {
    m as f64 * ln(zeta / (2.0 * phi)) / ln(5.0 / 3.0)
}

/// Twice the total iteration bound, rounded up and at least 1.
pub fn default_max_iterations(horizon: usize, m: usize, zeta: f64, phi: f64) -> usize {
    let b = 2.0 * horizon as f64 * per_level_iteration_bound(m, zeta, phi);
    if b.is_nan() || b < 1.0 {
        1
    } else {
        ceil(b) as usize
    }
}
