use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdp::{sample_dense, sample_row, validate_environment, Emission, EpisodicEnvironment, ExactDynamics, Shape, Step};
use crate::error::{bail, Result};
use crate::seed::{purpose, SimRng, StreamSeed};

use super::flat_dirichlet;

/// Sparse probability row: `(index, probability)` pairs.
pub type Row = Vec<(usize, f64)>;

/// How realized rewards relate to their means.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardNoise {
    /// The realized reward is the mean.
    #[default]
    None,
    /// `r = scale * Bernoulli(mean / scale)`, so `r` never exceeds `scale`.
    Bernoulli { scale: f64 },
}

impl RewardNoise {
    pub fn cap(self, mean: f64) -> f64 {
        match self {
            RewardNoise::None => mean,
            RewardNoise::Bernoulli { scale } => {
                if mean > 0.0 {
                    scale
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(self, mean: f64, rng: &mut SimRng) -> f64 {
        match self {
            RewardNoise::None => mean,
            RewardNoise::Bernoulli { scale } => {
                if mean <= 0.0 {
                    0.0
                } else if rng.random::<f64>() < mean / scale {
                    scale
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn check_mean(self, mean: f64) -> Result<()> {
        if let RewardNoise::Bernoulli { scale } = self {
            if !(scale > 0.0) || mean > scale {
                bail!(InvalidArgument, "reward mean {} is not representable with Bernoulli scale {}", mean, scale);
            }
        }
        Ok(())
    }
}

/// Layered tabular MDP. The context core at each level is the state id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMDP {
    shape: Shape,
    initial: Vec<f64>,
    /// `transitions[h - 1][s * K + a]` for `h < H`, over level-`h + 1` states.
    transitions: Vec<Vec<Row>>,
    /// `rewards[h - 1][s * K + a]`.
    rewards: Vec<Vec<f64>>,
    noise: RewardNoise,
}

impl TabularMDP {
    /// Builds an MDP and audits it with [`validate_environment`].
    pub fn new(shape: Shape, initial: Vec<f64>, transitions: Vec<Vec<Row>>, rewards: Vec<Vec<f64>>, noise: RewardNoise) -> Result<Self> {
        let mdp = TabularMDP::new_unvalidated(shape, initial, transitions, rewards, noise)?;
        let report = validate_environment(&mdp);
        if let Some(v) = report.violations.first() {
            bail!(InvalidArgument, "environment failed validation: {:?}", v);
        }
        Ok(mdp)
    }

    /// Checks table shapes and index ranges only, skipping the
    /// normalization audit. Useful to construct deliberately broken models.
    pub fn new_unvalidated(
        shape: Shape,
        initial: Vec<f64>,
        transitions: Vec<Vec<Row>>,
        rewards: Vec<Vec<f64>>,
        noise: RewardNoise,
    ) -> Result<Self> {
        let horizon = shape.horizon();
        let k = shape.action_count();
        if initial.len() != shape.cores(1) {
            bail!(ShapeMismatch, "initial distribution has {} entries, level 1 has {} states", initial.len(), shape.cores(1));
        }
        if transitions.len() != horizon - 1 {
            bail!(ShapeMismatch, "expected {} transition levels, got {}", horizon - 1, transitions.len());
        }
        if rewards.len() != horizon {
            bail!(ShapeMismatch, "expected {} reward levels, got {}", horizon, rewards.len());
        }
        for h in 1..=horizon {
            let cells = shape.cores(h) * k;
            if rewards[h - 1].len() != cells {
                bail!(ShapeMismatch, "reward level {} has {} entries, expected {}", h, rewards[h - 1].len(), cells);
            }
            for &r in &rewards[h - 1] {
                noise.check_mean(r)?;
            }
            if h < horizon {
                let level = &transitions[h - 1];
                if level.len() != cells {
                    bail!(ShapeMismatch, "transition level {} has {} rows, expected {}", h, level.len(), cells);
                }
                let next = shape.cores(h + 1);
                if let Some(i) = level.iter().position(|row| row.is_empty() || row.iter().any(|&(s, _)| s >= next)) {
                    bail!(InvalidArgument, "transition row {} at level {} is empty or leaves the level", i, h);
                }
            }
        }
        Ok(TabularMDP { shape, initial, transitions, rewards, noise })
    }

    pub fn states(&self, level: usize) -> usize {
        self.shape.cores(level)
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    pub fn with_noise(mut self, noise: RewardNoise) -> Result<Self> {
        for r in self.rewards.iter().flatten() {
            noise.check_mean(*r)?;
        }
        self.noise = noise;
        Ok(self)
    }

    /// Bernoulli rewards at scale `1/H`, which keeps every path sum at most 1.
    pub fn with_bernoulli_rewards(self) -> Result<Self> {
        let scale = 1.0 / self.shape.horizon() as f64;
        self.with_noise(RewardNoise::Bernoulli { scale })
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Vec<Row>] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn reward(&self, level: usize, state: usize, action: usize) -> f64 {
        self.rewards[level - 1][state * self.shape.action_count() + action]
    }

    /// Next-state row for `(level, state, action)`; empty at level `H`.
    pub fn row(&self, level: usize, state: usize, action: usize) -> &[(usize, f64)] {
        if level >= self.shape.horizon() {
            return &[];
        }
        &self.transitions[level - 1][state * self.shape.action_count() + action]
    }
}

impl ExactDynamics for TabularMDP {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn latent_count(&self, level: usize) -> usize {
        self.shape.cores(level)
    }

    fn initial_latent(&self) -> &[f64] {
        &self.initial
    }

    fn emission(&self, _level: usize, latent: usize) -> Emission<'_> {
        Emission::Point(latent)
    }

    fn reward_mean(&self, level: usize, latent: usize, _core: usize, action: usize) -> f64 {
        self.reward(level, latent, action)
    }

    fn reward_cap(&self, level: usize, latent: usize, _core: usize, action: usize) -> f64 {
        self.noise.cap(self.reward(level, latent, action))
    }

    fn transition(&self, level: usize, latent: usize, _core: usize, action: usize) -> &[(usize, f64)] {
        self.row(level, latent, action)
    }
}

impl EpisodicEnvironment for TabularMDP {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn reset(&self, rng: &mut SimRng) -> (usize, usize) {
        let s = sample_dense(&self.initial, rng);
        (s, s)
    }

    fn step(&self, level: usize, latent: usize, _core: usize, action: usize, rng: &mut SimRng) -> Step {
        let reward = self.noise.sample(self.reward(level, latent, action), rng);
        if level >= self.shape.horizon() {
            return Step { reward, latent: 0, core: 0 };
        }
        let next = sample_row(self.row(level, latent, action), rng);
        Step { reward, latent: next, core: next }
    }

    fn dynamics(&self) -> Option<&dyn ExactDynamics> {
        Some(self)
    }
}

/// Random layered MDP: flat-Dirichlet rows, reward means uniform on
/// `[0, 1/H]`, noiseless rewards.
pub fn make_random_mdp(states: usize, actions: usize, horizon: usize, seed: u64) -> Result<TabularMDP> {
    if states == 0 || actions == 0 || horizon == 0 {
        bail!(InvalidArgument, "S, K and H must all be at least 1 (got {}, {}, {})", states, actions, horizon);
    }
    let shape = Shape::uniform(horizon, actions, states)?;
    let mut rng = StreamSeed::new(seed).child(purpose::ENVIRONMENT).rng();
    let cap = 1.0 / horizon as f64;
    let initial = flat_dirichlet(states, &mut rng);
    let transitions = (1..horizon)
        .map(|_| (0..states * actions).map(|_| super::dense_to_row(&flat_dirichlet(states, &mut rng))).collect())
        .collect();
    let rewards = (0..horizon).map(|_| (0..states * actions).map(|_| rng.random::<f64>() * cap).collect()).collect();
    TabularMDP::new(shape, initial, transitions, rewards, RewardNoise::None)
}
