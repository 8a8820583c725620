use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cdp::{ExactDynamics, Shape};
use crate::class::{FunctionClass, QFunction};
use crate::error::{bail, Result};
use crate::seed::{purpose, StreamSeed};

/// Rewards and transition rows of latents sharing an observation must agree
/// to this tolerance for the observation process to be Markovian.
const MARKOV_TOL: f64 = 1e-12;

fn dense(row: &[(usize, f64)], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for &(i, p) in row {
        out[i] += p;
    }
    out
}

/// Latents emitting each core at `level` with positive probability.
fn emitters(dynamics: &dyn ExactDynamics, level: usize) -> Vec<Vec<usize>> {
    let mut by_core = vec![Vec::new(); dynamics.shape().cores(level)];
    for s in 0..dynamics.latent_count(level) {
        for (c, p) in dynamics.emission(level, s).iter() {
            if p > 0.0 && !by_core[c].contains(&s) {
                by_core[c].push(s);
            }
        }
    }
    by_core
}

/// Optimal action-value function by backward induction over contexts.
///
/// Requires the context process to be Markovian: every latent that can emit
/// a given core must share its reward and next-latent distribution for every
/// action. MDPs satisfy this trivially.
pub fn qstar(dynamics: &dyn ExactDynamics) -> Result<QFunction> {
    let shape: &Shape = dynamics.shape();
    let horizon = shape.horizon();
    let k = shape.action_count();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    // Expected V* at level h + 1 for each latent there.
    let mut next_latent_value: Vec<f64> = Vec::new();
    for h in (1..=horizon).rev() {
        let cores = shape.cores(h);
        let next_width = if h < horizon { dynamics.latent_count(h + 1) } else { 0 };
        let owners = emitters(dynamics, h);
        let mut q = vec![0.0; cores * k];
        for c in 0..cores {
            let Some((&first, rest)) = owners[c].split_first() else { continue };
            for a in 0..k {
                let r0 = dynamics.reward_mean(h, first, c, a);
                let row0 = dynamics.transition(h, first, c, a);
                if !rest.is_empty() {
                    let d0 = dense(row0, next_width);
                    for &s in rest {
                        let d = dense(dynamics.transition(h, s, c, a), next_width);
                        let same_row = d0.iter().zip(&d).all(|(x, y)| (x - y).abs() <= MARKOV_TOL);
                        if (dynamics.reward_mean(h, s, c, a) - r0).abs() > MARKOV_TOL || !same_row {
                            bail!(Unsupported, "observations are not Markovian at level {}, core {}, action {}", h, c, a);
                        }
                    }
                }
                let tail: f64 = row0.iter().map(|&(s, p)| p * next_latent_value[s]).sum();
                q[c * k + a] = (r0 + tail).clamp(0.0, 1.0);
            }
        }
        next_latent_value = (0..dynamics.latent_count(h))
            .map(|s| {
                dynamics
                    .emission(h, s)
                    .iter()
                    .map(|(c, p)| p * q[c * k..(c + 1) * k].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                    .sum()
            })
            .collect();
        values[h - 1] = q;
    }
    QFunction::new(shape.clone(), values)
}

/// `V* = E[max_a Q*(x_1, a)]`.
pub fn optimal_value(dynamics: &dyn ExactDynamics) -> Result<f64> {
    let q = qstar(dynamics)?;
    let k = dynamics.shape().action_count();
    let v1 = &q.table()[0];
    Ok(dynamics
        .initial_latent()
        .iter()
        .enumerate()
        .map(|(s, &w)| {
            w * dynamics
                .emission(1, s)
                .iter()
                .map(|(c, p)| p * v1[c * k..(c + 1) * k].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .sum::<f64>()
        })
        .sum())
}

/// `Q*` followed by `N - 1` distractors. Odd members perturb `Q*` by
/// uniform noise of the given scale; even members are uniform random
/// tables. Everything is clipped to `[0, 1]`.
pub fn realizable_class(dynamics: &dyn ExactDynamics, size: usize, perturbation_scale: f64, seed: u64) -> Result<FunctionClass<QFunction>> {
    if size == 0 {
        bail!(InvalidArgument, "class size must be at least 1");
    }
    if !(perturbation_scale >= 0.0) {
        bail!(InvalidArgument, "perturbation scale must be nonnegative");
    }
    let q = qstar(dynamics)?;
    let shape = dynamics.shape().clone();
    let mut rng = StreamSeed::new(seed).child(purpose::CLASS).rng();
    let mut members = Vec::with_capacity(size);
    members.push(q.clone());
    for i in 1..size {
        let member = if i % 2 == 1 {
            QFunction::from_fn(shape.clone(), |x, a| (q.value(x, a) + perturbation_scale * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0))?
        } else {
            QFunction::from_fn(shape.clone(), |_, _| rng.random::<f64>())?
        };
        members.push(member);
    }
    FunctionClass::new(members)?.with_qstar_index(0)
}

/// `N` uniform random tables on `shape`. Needs no dynamics, so it serves
/// environments whose optimal values are not a function of the context.
pub fn random_class(shape: &Shape, size: usize, seed: u64) -> Result<FunctionClass<QFunction>> {
    if size == 0 {
        bail!(InvalidArgument, "class size must be at least 1");
    }
    let mut rng = StreamSeed::new(seed).child(purpose::CLASS).rng();
    let members = (0..size).map(|_| QFunction::from_fn(shape.clone(), |_, _| rng.random::<f64>())).collect::<Result<Vec<_>>>()?;
    FunctionClass::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdp::Context;
    use crate::envs::{make_random_mdp, make_reactive_pomdp, RewardNoise, TabularMDP};

    #[test]
    fn single_step_qstar_is_the_reward() {
        let mdp = make_random_mdp(3, 2, 1, 4).unwrap();
        let q = qstar(&mdp).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert_eq!(q.value(Context::new(s, 1), a), mdp.reward(1, s, a));
            }
        }
    }

    #[test]
    fn deterministic_chain_total_reward() {
        let shape = Shape::uniform(3, 1, 1).unwrap();
        let t = vec![vec![vec![(0, 1.0)]]; 2];
        let r = vec![vec![0.0], vec![0.0], vec![0.4]];
        let mdp = TabularMDP::new(shape, vec![1.0], t, r, RewardNoise::None).unwrap();
        let q = qstar(&mdp).unwrap();
        for h in 1..=3 {
            assert!((q.value(Context::new(0, h), 0) - 0.4).abs() < 1e-15);
        }
        assert!((optimal_value(&mdp).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn generic_pomdp_is_rejected() {
        let p = make_reactive_pomdp(2, 3, 2, 2, 0).unwrap();
        assert!(matches!(qstar(&p), Err(crate::Error::Unsupported(_))));
    }

    #[test]
    fn realizable_class_marks_qstar() {
        let mdp = make_random_mdp(3, 2, 3, 0).unwrap();
        let c = realizable_class(&mdp, 1, 0.3, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.qstar_index(), Some(0));
        let c = realizable_class(&mdp, 9, 0.3, 0).unwrap();
        assert_eq!(c.len(), 9);
        assert!(c.iter().all(|f| f.table().iter().flatten().all(|v| (0.0..=1.0).contains(v))));
    }
}
