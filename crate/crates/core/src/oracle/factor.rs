use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cdp::{Context, ExactDynamics};
use crate::class::{FunctionClass, Hypothesis};
use crate::envs::{LowRankMDP, ReactivePOMDP, TabularMDP};
use crate::error::{bail, Result};
use crate::num::sqrt;

use super::errors::{bellman_error_from, latent_residuals};
use super::occupancy::{latent_occupancy, reachable_latents, Greedy};

/// Vectors `nu_h(f')` (one per roll-in member) and `xi_h(f)` (one per
/// evaluated member) whose inner products give the level-`h` errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanFactorization {
    pub level: usize,
    pub dimension: usize,
    pub nu: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// Declared bound on `max ||nu|| * max ||xi||`.
    pub zeta: f64,
    /// Declared approximation slack; 0 for exact constructions.
    pub theta_m: f64,
}

impl BellmanFactorization {
    pub fn inner(&self, roll_in: usize, evaluated: usize) -> f64 {
        self.nu[roll_in].iter().zip(&self.xi[evaluated]).map(|(a, b)| a * b).sum()
    }

    pub fn max_nu_norm(&self) -> f64 {
        self.nu.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    pub fn max_xi_norm(&self) -> f64 {
        self.xi.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

fn check_shape<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>, level: usize) -> Result<()> {
    if class.shape() != dynamics.shape() {
        bail!(ShapeMismatch, "class and environment shapes differ");
    }
    if level == 0 || level > dynamics.shape().horizon() {
        bail!(InvalidArgument, "level {} outside 1..={}", level, dynamics.shape().horizon());
    }
    Ok(())
}

/// Factorization through the level-`h` latent state: `nu` is the latent
/// occupancy, `xi` the per-latent one-step residual. Latents no action
/// sequence can reach get `xi = 0`.
pub fn latent_factorization<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>, level: usize) -> Result<BellmanFactorization> {
    check_shape(dynamics, class, level)?;
    let reach = &reachable_latents(dynamics)[level - 1];
    let nu = class.iter().map(|g| latent_occupancy(dynamics, &Greedy(g), level)).collect::<Result<Vec<_>>>()?;
    let xi = class
        .iter()
        .map(|f| {
            let mut r = latent_residuals(dynamics, level, f);
            r.iter_mut().zip(reach).filter(|(_, &ok)| !ok).for_each(|(x, _)| *x = 0.0);
            r
        })
        .collect();
    let dimension = dynamics.latent_count(level);
    Ok(BellmanFactorization { level, dimension, nu, xi, zeta: 2.0 * sqrt(dimension as f64), theta_m: 0.0 })
}

/// State-occupancy factorization of a tabular MDP (dimension `S_h`).
pub fn mdp_factorization<F: Hypothesis>(mdp: &TabularMDP, class: &FunctionClass<F>, level: usize) -> Result<BellmanFactorization> {
    latent_factorization(mdp, class, level)
}

/// Hidden-state factorization of a reactive POMDP (dimension hidden `S_h`).
pub fn pomdp_factorization<F: Hypothesis>(pomdp: &ReactivePOMDP, class: &FunctionClass<F>, level: usize) -> Result<BellmanFactorization> {
    latent_factorization(pomdp, class, level)
}

/// Factorization of dimension `M` through the transition factors at level
/// `h - 1`. Level 1 has no preceding transition and uses `nu = e_1` against
/// the scalar error in the first coordinate.
pub fn lowrank_factorization<F: Hypothesis>(env: &LowRankMDP, class: &FunctionClass<F>, level: usize) -> Result<BellmanFactorization> {
    let dynamics: &dyn ExactDynamics = env;
    check_shape(dynamics, class, level)?;
    let m = env.rank();
    let zeta = 2.0 * sqrt(m as f64);
    if level == 1 {
        let mu = dynamics.initial_latent();
        let mut e1 = vec![0.0; m];
        e1[0] = 1.0;
        let nu = vec![e1; class.len()];
        let xi = class
            .iter()
            .map(|f| {
                let mut v = vec![0.0; m];
                v[0] = bellman_error_from(dynamics, mu, 1, f);
                v
            })
            .collect();
        return Ok(BellmanFactorization { level, dimension: m, nu, xi, zeta, theta_m: 0.0 });
    }
    let prev = level - 1;
    let factors = &env.factors()[prev - 1];
    let k = dynamics.shape().action_count();
    let nu = class
        .iter()
        .map(|g| {
            let mu = latent_occupancy(dynamics, &Greedy(g), prev)?;
            let mut v = vec![0.0; factors.rank()];
            for (s, &w) in mu.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let a = g.greedy_action(Context::new(s, prev));
                for (slot, &p) in v.iter_mut().zip(&factors.left[s * k + a]) {
                    *slot += w * p;
                }
            }
            v.resize(m, 0.0);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let xi = class
        .iter()
        .map(|f| {
            let per_state = latent_residuals(dynamics, level, f);
            let mut v: Vec<f64> = factors.right.iter().map(|row| row.iter().zip(&per_state).map(|(p, x)| p * x).sum()).collect();
            v.resize(m, 0.0);
            v
        })
        .collect();
    Ok(BellmanFactorization { level, dimension: m, nu, xi, zeta, theta_m: 0.0 })
}

/// A `(roll-in, evaluated)` pair whose inner product misses the exact error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub roll_in: usize,
    pub evaluated: usize,
    pub inner: f64,
    pub exact: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub level: usize,
    pub max_residual: f64,
    pub max_nu_norm: f64,
    pub max_xi_norm: f64,
    pub zeta: f64,
    pub norm_ok: bool,
    pub theta_m: f64,
    pub tol: f64,
    pub passed: bool,
    /// Offending pairs, at most [`MAX_WITNESSES`] of them, in row-major order.
    pub witnesses: Vec<Witness>,
}

pub const MAX_WITNESSES: usize = 32;

/// Compare every inner product with the exact error and check the norm
/// certificate. Passes iff the worst residual is at most `theta_m + tol`.
pub fn verify_factorization<F: Hypothesis>(
    dynamics: &dyn ExactDynamics,
    class: &FunctionClass<F>,
    fact: &BellmanFactorization,
    tol: f64,
) -> Result<FactorizationReport> {
    check_shape(dynamics, class, fact.level)?;
    let n = class.len();
    if fact.nu.len() != n || fact.xi.len() != n {
        bail!(ShapeMismatch, "factorization covers {} / {} members, class has {}", fact.nu.len(), fact.xi.len(), n);
    }
    if fact.nu.iter().chain(&fact.xi).any(|v| v.len() != fact.dimension) {
        bail!(ShapeMismatch, "factor vectors do not all have dimension {}", fact.dimension);
    }
    let bound = fact.theta_m + tol;
    let mut max_residual = 0.0f64;
    let mut witnesses = Vec::new();
    for i in 0..n {
        let mu = latent_occupancy(dynamics, &Greedy(&class[i]), fact.level)?;
        for j in 0..n {
            let exact = bellman_error_from(dynamics, &mu, fact.level, &class[j]);
            let inner = fact.inner(i, j);
            let residual = (inner - exact).abs();
            max_residual = max_residual.max(residual);
            if residual > bound && witnesses.len() < MAX_WITNESSES {
                witnesses.push(Witness { roll_in: i, evaluated: j, inner, exact, residual });
            }
        }
    }
    let (max_nu_norm, max_xi_norm) = (fact.max_nu_norm(), fact.max_xi_norm());
    let norm_ok = max_nu_norm * max_xi_norm <= fact.zeta * (1.0 + 1e-12);
    Ok(FactorizationReport {
        level: fact.level,
        max_residual,
        max_nu_norm,
        max_xi_norm,
        zeta: fact.zeta,
        norm_ok,
        theta_m: fact.theta_m,
        tol,
        passed: max_residual <= bound && norm_ok,
        witnesses,
    })
}
