use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cdp::{Context, ExactDynamics};
use crate::class::{FunctionClass, Hypothesis};
use crate::error::{bail, Result};

use super::occupancy::{latent_occupancy, ActionRule, Greedy};

/// `E[f(x_h, a_h) - r_h - f(x_{h+1}, a_{h+1})]` when level-`h` latents are
/// distributed as `mu` and `f`'s greedy policy picks `a_h` and `a_{h+1}`.
pub fn bellman_error_from<F: Hypothesis + ?Sized>(dynamics: &dyn ExactDynamics, mu: &[f64], level: usize, f: &F) -> f64 {
    let horizon = dynamics.shape().horizon();
    let last = level >= horizon;
    let mut next = if last { Vec::new() } else { vec![0.0; dynamics.latent_count(level + 1)] };
    let mut acc = 0.0;
    for (s, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (c, p) in dynamics.emission(level, s).iter() {
            let w = m * p;
            let x = Context::new(c, level);
            let a = f.greedy_action(x);
            acc += w * (f.greedy_value(x) - dynamics.reward_mean(level, s, c, a));
            if !last {
                for &(s2, q) in dynamics.transition(level, s, c, a) {
                    next[s2] += w * q;
                }
            }
        }
    }
    if !last {
        for (s2, &m) in next.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (c, p) in dynamics.emission(level + 1, s2).iter() {
                acc -= m * p * f.greedy_value(Context::new(c, level + 1));
            }
        }
    }
    acc
}

/// Exact average Bellman error `E(f, roll_in, h)`.
pub fn exact_bellman_error<F: Hypothesis + ?Sized>(dynamics: &dyn ExactDynamics, f: &F, roll_in: &dyn ActionRule, level: usize) -> Result<f64> {
    let mu = latent_occupancy(dynamics, roll_in, level)?;
    Ok(bellman_error_from(dynamics, &mu, level, f))
}

/// One-step residual of `f` from each level-`h` latent taken as a point mass.
pub fn latent_residuals<F: Hypothesis + ?Sized>(dynamics: &dyn ExactDynamics, level: usize, f: &F) -> Vec<f64> {
    let n = dynamics.latent_count(level);
    let mut e = vec![0.0; n];
    (0..n)
        .map(|s| {
            e[s] = 1.0;
            let r = bellman_error_from(dynamics, &e, level, f);
            e[s] = 0.0;
            r
        })
        .collect()
}

/// `N x N` matrix with entry `(i, j) = E(class[j], pi_{class[i]}, h)`:
/// rows index roll-in functions, columns evaluated functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanErrorMatrix {
    pub level: usize,
    pub size: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

impl BellmanErrorMatrix {
    pub fn get(&self, roll_in: usize, evaluated: usize) -> f64 {
        self.entries[roll_in * self.size + evaluated]
    }

    pub fn row(&self, roll_in: usize) -> &[f64] {
        &self.entries[roll_in * self.size..(roll_in + 1) * self.size]
    }

    pub fn column(&self, evaluated: usize) -> Vec<f64> {
        (0..self.size).map(|i| self.get(i, evaluated)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Exact error matrix at `level`. Each roll-in occupancy is computed once.
pub fn bellman_error_matrix<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>, level: usize) -> Result<BellmanErrorMatrix> {
    if class.shape() != dynamics.shape() {
        bail!(ShapeMismatch, "class and environment shapes differ");
    }
    let n = class.len();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        let mu = latent_occupancy(dynamics, &Greedy(&class[i]), level)?;
        for j in 0..n {
            entries.push(bellman_error_from(dynamics, &mu, level, &class[j]));
        }
    }
    Ok(BellmanErrorMatrix { level, size: n, entries })
}

/// Error matrices for every level `1..=H`.
pub fn all_error_matrices<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>) -> Result<Vec<BellmanErrorMatrix>> {
    (1..=dynamics.shape().horizon()).map(|h| bellman_error_matrix(dynamics, class, h)).collect()
}
