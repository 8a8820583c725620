use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdp::{Emission, EpisodicEnvironment, ExactDynamics, Shape, Step};
use crate::error::{bail, Result};
use crate::seed::{purpose, SimRng, StreamSeed};

use super::tabular::{RewardNoise, TabularMDP};
use super::{dense_to_row, flat_dirichlet};

/// The two row-stochastic factors of one level's transition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankFactors {
    /// `(S_h * K) x M`, row `s * K + a`.
    pub left: Vec<Vec<f64>>,
    /// `M x S_{h+1}`.
    pub right: Vec<Vec<f64>>,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.right.len()
    }

    /// Dense `left * right`.
    pub fn product(&self) -> Vec<Vec<f64>> {
        let next = self.right.first().map_or(0, Vec::len);
        self.left
            .iter()
            .map(|l| {
                let mut row = alloc::vec![0.0; next];
                for (m, &w) in l.iter().enumerate() {
                    for (s, &p) in self.right[m].iter().enumerate() {
                        row[s] += w * p;
                    }
                }
                row
            })
            .collect()
    }
}

/// A tabular MDP whose transitions factor through `M` latent factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankMDP {
    mdp: TabularMDP,
    /// One entry per level `1..H-1`.
    factors: Vec<LowRankFactors>,
}

fn check_stochastic(rows: &[Vec<f64>], width: usize, what: &str) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            bail!(ShapeMismatch, "{} row {} has {} entries, expected {}", what, i, row.len(), width);
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > crate::cdp::ROW_SUM_TOL {
            bail!(InvalidArgument, "{} row {} is not a distribution (sum {})", what, i, sum);
        }
    }
    Ok(())
}

impl LowRankMDP {
    pub fn from_factors(shape: Shape, initial: Vec<f64>, factors: Vec<LowRankFactors>, rewards: Vec<Vec<f64>>, noise: RewardNoise) -> Result<Self> {
        let horizon = shape.horizon();
        let k = shape.action_count();
        if factors.len() != horizon - 1 {
            bail!(ShapeMismatch, "expected {} factor pairs, got {}", horizon - 1, factors.len());
        }
        let mut transitions = Vec::with_capacity(horizon - 1);
        for (i, f) in factors.iter().enumerate() {
            let h = i + 1;
            let m = f.rank();
            if f.left.len() != shape.cores(h) * k || m == 0 {
                bail!(ShapeMismatch, "factor at level {} has the wrong shape", h);
            }
            check_stochastic(&f.left, m, "left factor")?;
            check_stochastic(&f.right, shape.cores(h + 1), "right factor")?;
            transitions.push(f.product().iter().map(|r| dense_to_row(r)).collect());
        }
        let mdp = TabularMDP::new(shape, initial, transitions, rewards, noise)?;
        Ok(LowRankMDP { mdp, factors })
    }

    pub fn mdp(&self) -> &TabularMDP {
        &self.mdp
    }

    pub fn factors(&self) -> &[LowRankFactors] {
        &self.factors
    }

    /// Factor dimension (the largest over levels).
    pub fn rank(&self) -> usize {
        self.factors.iter().map(LowRankFactors::rank).max().unwrap_or(1)
    }
}

/// Random MDP whose per-level transition table is a product of two
/// flat-Dirichlet row-stochastic factors with inner dimension `M`.
pub fn make_low_rank_mdp(states: usize, actions: usize, horizon: usize, rank: usize, seed: u64) -> Result<LowRankMDP> {
    if states == 0 || actions == 0 || horizon == 0 {
        bail!(InvalidArgument, "S, K and H must all be at least 1 (got {}, {}, {})", states, actions, horizon);
    }
    if rank == 0 || rank > states {
        bail!(InvalidArgument, "factor dimension {} must lie in 1..={}", rank, states);
    }
    let shape = Shape::uniform(horizon, actions, states)?;
    let mut rng = StreamSeed::new(seed).child(purpose::ENVIRONMENT).rng();
    let cap = 1.0 / horizon as f64;
    let initial = flat_dirichlet(states, &mut rng);
    let factors = (1..horizon)
        .map(|_| LowRankFactors {
            left: (0..states * actions).map(|_| flat_dirichlet(rank, &mut rng)).collect(),
            right: (0..rank).map(|_| flat_dirichlet(states, &mut rng)).collect(),
        })
        .collect();
    let rewards = (0..horizon).map(|_| (0..states * actions).map(|_| rng.random::<f64>() * cap).collect()).collect();
    LowRankMDP::from_factors(shape, initial, factors, rewards, RewardNoise::None)
}

impl ExactDynamics for LowRankMDP {
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

impl EpisodicEnvironment for LowRankMDP {
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
