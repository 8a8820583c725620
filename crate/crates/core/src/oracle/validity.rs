use alloc::vec::Vec;

use crate::cdp::ExactDynamics;
use crate::class::{FunctionClass, Hypothesis, SurvivingSet};
use crate::error::{Error, Result};

use super::errors::{all_error_matrices, exact_bellman_error, BellmanErrorMatrix};
use super::occupancy::{exact_value_of_policy, expected_initial_value, Greedy};

/// `|V_f - V^{pi_f} - sum_h E(f, pi_f, h)|`, which is zero up to round-off.
pub fn policy_loss_residual<F: Hypothesis + ?Sized>(dynamics: &dyn ExactDynamics, f: &F) -> Result<f64> {
    let v_f = expected_initial_value(dynamics, f);
    let v_pi = exact_value_of_policy(dynamics, &Greedy(f));
    let mut total = 0.0;
    for h in 1..=dynamics.shape().horizon() {
        total += exact_bellman_error(dynamics, f, &Greedy(f), h)?;
    }
    Ok((v_f - v_pi - total).abs())
}

/// `max_{i, h} |E(class[j], pi_{class[i]}, h)|` for every column `j`.
pub fn validity_slacks(matrices: &[BellmanErrorMatrix]) -> Vec<f64> {
    let n = matrices.first().map_or(0, |m| m.size);
    (0..n)
        .map(|j| matrices.iter().flat_map(|m| m.column(j)).fold(0.0, |acc: f64, v| acc.max(v.abs())))
        .collect()
}

/// The smallest `theta` for which member `index` is `theta`-valid.
pub fn validity_slack<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>, index: usize) -> Result<f64> {
    let matrices = all_error_matrices(dynamics, class)?;
    validity_slacks(&matrices)
        .get(index)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("member {} out of range", index)))
}

/// Members whose error under every greedy roll-in and level is at most `theta`.
pub fn theta_valid_set<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>, theta: f64) -> Result<SurvivingSet> {
    let matrices = all_error_matrices(dynamics, class)?;
    Ok(SurvivingSet::from_mask(validity_slacks(&matrices).into_iter().map(|s| s <= theta).collect()))
}

/// `(f*_theta, v*_theta)`: the `theta`-valid member whose greedy policy has
/// the largest exact value (lowest index on ties).
pub fn optimal_valid_value<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>, theta: f64) -> Result<(usize, f64)> {
    let valid = theta_valid_set(dynamics, class, theta)?;
    let mut best: Option<(usize, f64)> = None;
    for i in valid.indices() {
        let v = exact_value_of_policy(dynamics, &Greedy(&class[i]));
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.ok_or(Error::EmptyValidSet { theta })
}
