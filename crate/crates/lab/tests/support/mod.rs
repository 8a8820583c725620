//! Independent reference computations on tabular MDPs, written against the
//! raw tables only.

#![allow(dead_code)]

use olive_core::cdp::{Context, ExactDynamics, Policy};
use olive_core::class::Hypothesis;
use olive_core::envs::TabularMDP;

/// Backward induction: `q[h - 1][s][a]`.
pub fn backward_q(mdp: &TabularMDP) -> Vec<Vec<Vec<f64>>> {
    let shape = ExactDynamics::shape(mdp);
    let (horizon, k) = (shape.horizon(), shape.action_count());
    let mut q = vec![Vec::new(); horizon];
    let mut next_v: Vec<f64> = vec![0.0; 1];
    for h in (1..=horizon).rev() {
        let rows: Vec<Vec<f64>> = (0..mdp.states(h))
            .map(|s| {
                (0..k)
                    .map(|a| {
                        let future: f64 = if h == horizon { 0.0 } else { mdp.row(h, s, a).iter().map(|&(t, p)| p * next_v[t]).sum() };
                        mdp.reward(h, s, a) + future
                    })
                    .collect()
            })
            .collect();
        next_v = rows.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        q[h - 1] = rows;
    }
    q
}

pub fn optimal_value(mdp: &TabularMDP) -> f64 {
    let q = backward_q(mdp);
    mdp.initial().iter().enumerate().map(|(s, &p)| p * q[0][s].iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum()
}

/// `E(f, roll_in, level)` by walking every state path.
pub fn enumerate_error<F: Hypothesis>(mdp: &TabularMDP, f: &F, roll_in: &Policy, level: usize) -> f64 {
    fn walk<F: Hypothesis>(mdp: &TabularMDP, f: &F, roll_in: &Policy, level: usize, h: usize, s: usize, p: f64) -> f64 {
        let x = Context::new(s, h);
        if h < level {
            let a = roll_in.action(x);
            return mdp.row(h, s, a).iter().map(|&(t, q)| walk(mdp, f, roll_in, level, h + 1, t, p * q)).sum();
        }
        let a = f.greedy_action(x);
        let horizon = ExactDynamics::shape(mdp).horizon();
        let mut e = f.greedy_value(x) - mdp.reward(h, s, a);
        if h < horizon {
            for &(t, q) in mdp.row(h, s, a) {
                e -= q * f.greedy_value(Context::new(t, h + 1));
            }
        }
        p * e
    }
    mdp.initial().iter().enumerate().map(|(s, &p)| walk(mdp, f, roll_in, level, 1, s, p)).sum()
}

pub fn enumerate_value(mdp: &TabularMDP, policy: &Policy) -> f64 {
    fn walk(mdp: &TabularMDP, policy: &Policy, h: usize, s: usize) -> f64 {
        if h > ExactDynamics::shape(mdp).horizon() {
            return 0.0;
        }
        let a = policy.action(Context::new(s, h));
        let future: f64 = if h == ExactDynamics::shape(mdp).horizon() {
            0.0
        } else {
            mdp.row(h, s, a).iter().map(|&(t, q)| q * walk(mdp, policy, h + 1, t)).sum()
        };
        mdp.reward(h, s, a) + future
    }
    mdp.initial().iter().enumerate().map(|(s, &p)| p * walk(mdp, policy, 1, s)).sum()
}

/// `E[f(x_1, pi_f(x_1))]`.
pub fn predicted_value<F: Hypothesis>(mdp: &TabularMDP, f: &F) -> f64 {
    mdp.initial().iter().enumerate().map(|(s, &p)| p * f.greedy_value(Context::new(s, 1))).sum()
}

/// Sizes cycling through `S <= 5, K <= 3, H <= 4`.
pub fn dims(seed: u64) -> (usize, usize, usize) {
    (1 + (seed % 5) as usize, 1 + (seed / 5 % 3) as usize, 1 + (seed / 15 % 4) as usize)
}
