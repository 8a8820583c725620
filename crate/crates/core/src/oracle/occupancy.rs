use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cdp::{Context, ExactDynamics, Policy};
use crate::class::Hypothesis;
use crate::error::{bail, Result};

/// Something that picks one action per context.
pub trait ActionRule {
    fn act(&self, x: Context) -> usize;
}

impl ActionRule for Policy {
    fn act(&self, x: Context) -> usize {
        self.action(x)
    }
}

/// The greedy policy of a hypothesis, without materializing it.
pub struct Greedy<'a, F: ?Sized>(pub &'a F);

impl<F: Hypothesis + ?Sized> ActionRule for Greedy<'_, F> {
    fn act(&self, x: Context) -> usize {
        self.0.greedy_action(x)
    }
}

/// Marginal distribution at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyDistribution {
    pub level: usize,
    pub probabilities: Vec<f64>,
}

fn check_level(dynamics: &dyn ExactDynamics, level: usize) -> Result<()> {
    let horizon = dynamics.shape().horizon();
    if level == 0 || level > horizon {
        bail!(InvalidArgument, "level {} outside 1..={}", level, horizon);
    }
    Ok(())
}

/// Advance a level-`level` latent distribution one step with actions from
/// `rule`. Returns an empty vector at level `H`.
pub fn push_forward(dynamics: &dyn ExactDynamics, mu: &[f64], level: usize, rule: &dyn ActionRule) -> Vec<f64> {
    if level >= dynamics.shape().horizon() {
        return Vec::new();
    }
    let mut next = vec![0.0; dynamics.latent_count(level + 1)];
    for (s, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (c, p) in dynamics.emission(level, s).iter() {
            let w = m * p;
            let a = rule.act(Context::new(c, level));
            for &(s2, q) in dynamics.transition(level, s, c, a) {
                next[s2] += w * q;
            }
        }
    }
    next
}

/// Latent-state marginal at `level` under `a_{1:level-1} ~ rule`.
pub fn latent_occupancy(dynamics: &dyn ExactDynamics, rule: &dyn ActionRule, level: usize) -> Result<Vec<f64>> {
    check_level(dynamics, level)?;
    let mut mu = dynamics.initial_latent().to_vec();
    for h in 1..level {
        mu = push_forward(dynamics, &mu, h, rule);
    }
    Ok(mu)
}

/// Context-core marginal obtained from a latent marginal.
pub fn context_occupancy(dynamics: &dyn ExactDynamics, mu: &[f64], level: usize) -> Vec<f64> {
    let mut out = vec![0.0; dynamics.shape().cores(level)];
    for (s, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (c, p) in dynamics.emission(level, s).iter() {
            out[c] += m * p;
        }
    }
    out
}

/// Exact marginal over level-`level` context cores under `policy`.
pub fn occupancy(dynamics: &dyn ExactDynamics, policy: &Policy, level: usize) -> Result<OccupancyDistribution> {
    policy.check_shape(dynamics.shape())?;
    let mu = latent_occupancy(dynamics, policy, level)?;
    Ok(OccupancyDistribution { level, probabilities: context_occupancy(dynamics, &mu, level) })
}

/// Exact `V^pi`, the expected reward sum.
pub fn exact_value_of_policy(dynamics: &dyn ExactDynamics, rule: &dyn ActionRule) -> f64 {
    let horizon = dynamics.shape().horizon();
    let mut mu = dynamics.initial_latent().to_vec();
    let mut value = 0.0;
    for h in 1..=horizon {
        for (s, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (c, p) in dynamics.emission(h, s).iter() {
                value += m * p * dynamics.reward_mean(h, s, c, rule.act(Context::new(c, h)));
            }
        }
        mu = push_forward(dynamics, &mu, h, rule);
    }
    value
}

/// `V_f = E[f(x_1, pi_f(x_1))]`.
pub fn expected_initial_value<F: Hypothesis + ?Sized>(dynamics: &dyn ExactDynamics, f: &F) -> f64 {
    let mu = dynamics.initial_latent();
    let mut v = 0.0;
    for (s, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (c, p) in dynamics.emission(1, s).iter() {
            v += m * p * f.greedy_value(Context::new(c, 1));
        }
    }
    v
}

/// Latents reachable with positive probability under some action sequence.
pub fn reachable_latents(dynamics: &dyn ExactDynamics) -> Vec<Vec<bool>> {
    let horizon = dynamics.shape().horizon();
    let k = dynamics.shape().action_count();
    let mut out = Vec::with_capacity(horizon);
    let mut cur: Vec<bool> = dynamics.initial_latent().iter().map(|&p| p > 0.0).collect();
    for h in 1..=horizon {
        if h < horizon {
            let mut next = vec![false; dynamics.latent_count(h + 1)];
            for s in (0..cur.len()).filter(|&s| cur[s]) {
                for (c, p) in dynamics.emission(h, s).iter() {
                    if p <= 0.0 {
                        continue;
                    }
                    for a in 0..k {
                        for &(s2, q) in dynamics.transition(h, s, c, a) {
                            next[s2] |= q > 0.0;
                        }
                    }
                }
            }
            out.push(core::mem::replace(&mut cur, next));
        } else {
            out.push(core::mem::take(&mut cur));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_random_mdp;

    #[test]
    fn level_one_is_the_initial_distribution() {
        let mdp = make_random_mdp(3, 2, 3, 2).unwrap();
        let p = Policy::constant(ExactDynamics::shape(&mdp), 1).unwrap();
        let occ = occupancy(&mdp, &p, 1).unwrap();
        assert_eq!(occ.probabilities, mdp.initial());
        assert!(occupancy(&mdp, &p, 4).is_err());
        for h in 1..=3 {
            let o = occupancy(&mdp, &p, h).unwrap();
            assert!((o.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
