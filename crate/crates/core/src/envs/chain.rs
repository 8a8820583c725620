use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdp::{Emission, EpisodicEnvironment, ExactDynamics, Shape, Step};
use crate::error::{bail, Result};
use crate::seed::{purpose, SimRng, StreamSeed};

use super::tabular::{RewardNoise, Row, TabularMDP};

/// Per-level state indices of the bandit chain.
pub const WAIT: usize = 0;
pub const GOOD: usize = 1;
pub const BAD: usize = 2;
/// Bandit state `i` (0-based) is stored at index `BANDIT_OFFSET + i`.
pub const BANDIT_OFFSET: usize = 3;

/// Chain of waiting, good, bad and `M - 3` bandit states per level.
///
/// The waiting state persists with probability `1 - 1/H` and otherwise
/// drops into a uniformly chosen bandit state. From bandit state `i` at
/// level `h`, the hidden best action moves to the good state with
/// probability `1/2 + tau` and every other action with probability `1/2`;
/// the rest goes to the bad state. Good and bad are absorbing. The only
/// reward is 1, paid at level `H` in the good state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditChainMDP {
    mdp: TabularMDP,
    tau: f64,
    /// `best_actions[h - 1][i]` for levels `1..H-1`.
    best_actions: Vec<Vec<usize>>,
}

pub fn make_bandit_chain(
    states: usize,
    horizon: usize,
    actions: usize,
    tau: f64,
    best_actions: Option<Vec<Vec<usize>>>,
    seed: u64,
) -> Result<BanditChainMDP> {
    if states < 4 || actions < 2 || horizon < 2 {
        bail!(InvalidArgument, "bandit chain needs M >= 4, K >= 2 and H >= 2 (got M={}, K={}, H={})", states, actions, horizon);
    }
    if !(tau > 0.0 && tau <= libm::sqrt(1.0 / 8.0)) {
        bail!(InvalidArgument, "gap tau = {} must lie in (0, sqrt(1/8)]", tau);
    }
    let bandits = states - BANDIT_OFFSET;
    let best = match best_actions {
        Some(b) => {
            if b.len() != horizon - 1 || b.iter().any(|l| l.len() != bandits || l.iter().any(|&a| a >= actions)) {
                bail!(ShapeMismatch, "best actions must be {} levels of {} actions below {}", horizon - 1, bandits, actions);
            }
            b
        }
        None => {
            let mut rng = StreamSeed::new(seed).child(purpose::ENVIRONMENT).rng();
            (1..horizon).map(|_| (0..bandits).map(|_| rng.random_range(0..actions)).collect()).collect()
        }
    };

    let hf = horizon as f64;
    let stay = 1.0 - 1.0 / hf;
    let spread = 1.0 / (hf * bandits as f64);
    let shape = Shape::uniform(horizon, actions, states)?;

    let mut initial = vec![spread; states];
    initial[WAIT] = stay;
    initial[GOOD] = 0.0;
    initial[BAD] = 0.0;

    let wait_row: Row = core::iter::once((WAIT, stay)).chain((0..bandits).map(|i| (BANDIT_OFFSET + i, spread))).collect();
    let transitions = (1..horizon)
        .map(|h| {
            let mut level = Vec::with_capacity(states * actions);
            for s in 0..states {
                for a in 0..actions {
                    let row: Row = match s {
                        WAIT => wait_row.clone(),
                        GOOD => vec![(GOOD, 1.0)],
                        BAD => vec![(BAD, 1.0)],
                        _ => {
                            let p = if best[h - 1][s - BANDIT_OFFSET] == a { 0.5 + tau } else { 0.5 };
                            vec![(GOOD, p), (BAD, 1.0 - p)]
                        }
                    };
                    level.push(row);
                }
            }
            level
        })
        .collect();
    let rewards = (1..=horizon)
        .map(|h| {
            let mut r = vec![0.0; states * actions];
            if h == horizon {
                r[GOOD * actions..(GOOD + 1) * actions].iter_mut().for_each(|x| *x = 1.0);
            }
            r
        })
        .collect();
    let mdp = TabularMDP::new(shape, initial, transitions, rewards, RewardNoise::None)?;
    Ok(BanditChainMDP { mdp, tau, best_actions: best })
}

impl BanditChainMDP {
    pub fn mdp(&self) -> &TabularMDP {
        &self.mdp
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn best_actions(&self) -> &[Vec<usize>] {
        &self.best_actions
    }

    pub fn bandit_states(&self) -> usize {
        self.mdp.states(1) - BANDIT_OFFSET
    }

    /// Probability of occupying one given bandit state at `level`.
    pub fn bandit_occupancy(&self, level: usize) -> f64 {
        let hf = ExactDynamics::shape(&self.mdp).horizon() as f64;
        (1.0 / (hf * self.bandit_states() as f64)) * libm::pow(1.0 - 1.0 / hf, (level - 1) as f64)
    }

    /// Total probability of passing through some bandit state at a level
    /// from which the good state can still be reached before `H`.
    pub fn visit_mass(&self) -> f64 {
        let horizon = ExactDynamics::shape(&self.mdp).horizon();
        (1..horizon).map(|h| self.bandit_occupancy(h) * self.bandit_states() as f64).sum()
    }

    /// `V*` by the visit-probability sum.
    pub fn optimal_value_closed_form(&self) -> f64 {
        self.visit_mass() * (0.5 + self.tau)
    }

    /// `V* - V(pi)` for a policy that never picks a best action.
    pub fn wrong_everywhere_gap(&self) -> f64 {
        self.visit_mass() * self.tau
    }
}

impl ExactDynamics for BanditChainMDP {
    fn shape(&self) -> &Shape {
        ExactDynamics::shape(&self.mdp)
    }
    fn latent_count(&self, level: usize) -> usize {
        self.mdp.latent_count(level)
    }
    fn initial_latent(&self) -> &[f64] {
        self.mdp.initial_latent()
    }
    fn emission(&self, level: usize, latent: usize) -> Emission<'_> {
        self.mdp.emission(level, latent)
    }
    fn reward_mean(&self, level: usize, latent: usize, core: usize, action: usize) -> f64 {
        self.mdp.reward_mean(level, latent, core, action)
    }
    fn reward_cap(&self, level: usize, latent: usize, core: usize, action: usize) -> f64 {
        self.mdp.reward_cap(level, latent, core, action)
    }
    fn transition(&self, level: usize, latent: usize, core: usize, action: usize) -> &[(usize, f64)] {
        self.mdp.transition(level, latent, core, action)
    }
}

impl EpisodicEnvironment for BanditChainMDP {
    fn shape(&self) -> &Shape {
        EpisodicEnvironment::shape(&self.mdp)
    }
    fn reset(&self, rng: &mut SimRng) -> (usize, usize) {
        self.mdp.reset(rng)
    }
    fn step(&self, level: usize, latent: usize, core: usize, action: usize, rng: &mut SimRng) -> Step {
        self.mdp.step(level, latent, core, action, rng)
    }
    fn dynamics(&self) -> Option<&dyn ExactDynamics> {
        Some(self)
    }
}
