use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdp::{sample_dense, sample_row, validate_environment, Emission, EpisodicEnvironment, ExactDynamics, Shape, Step};
use crate::error::{bail, Result};
use crate::seed::{purpose, SimRng, StreamSeed};

use super::tabular::{RewardNoise, Row, TabularMDP};
use super::{dense_to_row, flat_dirichlet};

/// Layered POMDP whose contexts are the current observation (reactive).
///
/// Rewards and transitions may depend on the observation as well as the
/// hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactivePOMDP {
    /// Context cores are observations.
    shape: Shape,
    hidden: Vec<usize>,
    initial: Vec<f64>,
    /// `emissions[h - 1][s]`, a row over level-`h` observations.
    emissions: Vec<Vec<Row>>,
    /// `rewards[h - 1][(s * O_h + o) * K + a]`.
    rewards: Vec<Vec<f64>>,
    /// `transitions[h - 1][(s * O_h + o) * K + a]` for `h < H`.
    transitions: Vec<Vec<Row>>,
    noise: RewardNoise,
}

impl ReactivePOMDP {
    pub fn new(
        shape: Shape,
        hidden: Vec<usize>,
        initial: Vec<f64>,
        emissions: Vec<Vec<Row>>,
        rewards: Vec<Vec<f64>>,
        transitions: Vec<Vec<Row>>,
        noise: RewardNoise,
    ) -> Result<Self> {
        let horizon = shape.horizon();
        let k = shape.action_count();
        if hidden.len() != horizon || hidden.contains(&0) {
            bail!(ShapeMismatch, "hidden-state counts must be positive for each of {} levels", horizon);
        }
        if initial.len() != hidden[0] || emissions.len() != horizon || rewards.len() != horizon || transitions.len() != horizon - 1 {
            bail!(ShapeMismatch, "POMDP tables do not match the declared horizon and hidden counts");
        }
        for h in 1..=horizon {
            let (s, o) = (hidden[h - 1], shape.cores(h));
            if emissions[h - 1].len() != s || rewards[h - 1].len() != s * o * k {
                bail!(ShapeMismatch, "level {} emission or reward table has the wrong size", h);
            }
            if emissions[h - 1].iter().any(|r| r.is_empty() || r.iter().any(|&(c, _)| c >= o)) {
                bail!(InvalidArgument, "level {} has an emission row leaving the observation range", h);
            }
            for &r in &rewards[h - 1] {
                noise.check_mean(r)?;
            }
            if h < horizon {
                let rows = &transitions[h - 1];
                if rows.len() != s * o * k || rows.iter().any(|r| r.is_empty() || r.iter().any(|&(n, _)| n >= hidden[h])) {
                    bail!(InvalidArgument, "level {} transition table is malformed", h);
                }
            }
        }
        let pomdp = ReactivePOMDP { shape, hidden, initial, emissions, rewards, transitions, noise };
        if let Some(v) = validate_environment(&pomdp).violations.first() {
            bail!(InvalidArgument, "environment failed validation: {:?}", v);
        }
        Ok(pomdp)
    }

    /// The MDP viewed as a reactive POMDP with identity emissions and
    /// transitions that ignore the observation.
    pub fn from_mdp(mdp: &TabularMDP) -> Result<Self> {
        let shape = ExactDynamics::shape(mdp).clone();
        let horizon = shape.horizon();
        let k = shape.action_count();
        let hidden: Vec<usize> = (1..=horizon).map(|h| shape.cores(h)).collect();
        let emissions = hidden.iter().map(|&s| (0..s).map(|i| vec![(i, 1.0)]).collect()).collect();
        let mut rewards = Vec::with_capacity(horizon);
        let mut transitions = Vec::with_capacity(horizon - 1);
        for h in 1..=horizon {
            let s = hidden[h - 1];
            let mut r = Vec::with_capacity(s * s * k);
            let mut t = Vec::with_capacity(s * s * k);
            for latent in 0..s {
                for _obs in 0..s {
                    for a in 0..k {
                        r.push(mdp.reward(h, latent, a));
                        if h < horizon {
                            t.push(mdp.row(h, latent, a).to_vec());
                        }
                    }
                }
            }
            rewards.push(r);
            if h < horizon {
                transitions.push(t);
            }
        }
        ReactivePOMDP::new(shape, hidden, mdp.initial().to_vec(), emissions, rewards, transitions, mdp.noise())
    }

    pub fn hidden(&self, level: usize) -> usize {
        if level > self.shape.horizon() {
            1
        } else {
            self.hidden[level - 1]
        }
    }

    pub fn observations(&self, level: usize) -> usize {
        self.shape.cores(level)
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    pub fn emissions(&self) -> &[Vec<Row>] {
        &self.emissions
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[Vec<Row>] {
        &self.transitions
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    fn cell(&self, level: usize, latent: usize, obs: usize, action: usize) -> usize {
        (latent * self.shape.cores(level) + obs) * self.shape.action_count() + action
    }
}

impl ExactDynamics for ReactivePOMDP {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn latent_count(&self, level: usize) -> usize {
        self.hidden(level)
    }

    fn initial_latent(&self) -> &[f64] {
        &self.initial
    }

    fn emission(&self, level: usize, latent: usize) -> Emission<'_> {
        Emission::Row(&self.emissions[level - 1][latent])
    }

    fn reward_mean(&self, level: usize, latent: usize, core: usize, action: usize) -> f64 {
        self.rewards[level - 1][self.cell(level, latent, core, action)]
    }

    fn reward_cap(&self, level: usize, latent: usize, core: usize, action: usize) -> f64 {
        self.noise.cap(self.reward_mean(level, latent, core, action))
    }

    fn transition(&self, level: usize, latent: usize, core: usize, action: usize) -> &[(usize, f64)] {
        if level >= self.shape.horizon() {
            return &[];
        }
        &self.transitions[level - 1][self.cell(level, latent, core, action)]
    }
}

impl EpisodicEnvironment for ReactivePOMDP {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn reset(&self, rng: &mut SimRng) -> (usize, usize) {
        let s = sample_dense(&self.initial, rng);
        (s, sample_row(&self.emissions[0][s], rng))
    }

    fn step(&self, level: usize, latent: usize, core: usize, action: usize, rng: &mut SimRng) -> Step {
        let reward = self.noise.sample(self.reward_mean(level, latent, core, action), rng);
        if level >= self.shape.horizon() {
            return Step { reward, latent: 0, core: 0 };
        }
        let next = sample_row(self.transition(level, latent, core, action), rng);
        let obs = sample_row(&self.emissions[level][next], rng);
        Step { reward, latent: next, core: obs }
    }

    fn dynamics(&self) -> Option<&dyn ExactDynamics> {
        Some(self)
    }
}

/// Random reactive POMDP with `S` hidden states and `O` observations per
/// level: flat-Dirichlet emissions and transitions, rewards uniform on
/// `[0, 1/H]`.
pub fn make_reactive_pomdp(hidden: usize, observations: usize, actions: usize, horizon: usize, seed: u64) -> Result<ReactivePOMDP> {
    if hidden == 0 || observations == 0 || actions == 0 || horizon == 0 {
        bail!(InvalidArgument, "S, O, K and H must all be at least 1");
    }
    let shape = Shape::uniform(horizon, actions, observations)?;
    let mut rng = StreamSeed::new(seed).child(purpose::ENVIRONMENT).rng();
    let cap = 1.0 / horizon as f64;
    let cells = hidden * observations * actions;
    let initial = flat_dirichlet(hidden, &mut rng);
    let emissions = (0..horizon).map(|_| (0..hidden).map(|_| dense_to_row(&flat_dirichlet(observations, &mut rng))).collect()).collect();
    let transitions = (1..horizon).map(|_| (0..cells).map(|_| dense_to_row(&flat_dirichlet(hidden, &mut rng))).collect()).collect();
    let rewards = (0..horizon).map(|_| (0..cells).map(|_| rng.random::<f64>() * cap).collect()).collect();
    ReactivePOMDP::new(shape, vec![hidden; horizon], initial, emissions, rewards, transitions, RewardNoise::None)
}

/// Grid-world preset: few hidden cells, many observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Each cell emits from its own disjoint block of this many observations.
    pub observations_per_cell: usize,
    pub horizon: usize,
    /// Probability that a move fails and the agent stays put.
    pub slip: f64,
}

/// Grid world with moves up/right/down/left. Observations are drawn from
/// a per-cell block, so the observation determines the cell. The agent
/// starts in cell 0 and collects `1/H` per step spent in the last cell.
pub fn make_grid_pomdp(spec: GridSpec, seed: u64) -> Result<ReactivePOMDP> {
    let GridSpec { width, height, observations_per_cell, horizon, slip } = spec;
    if width == 0 || height == 0 || observations_per_cell == 0 || horizon == 0 || !(0.0..=1.0).contains(&slip) {
        bail!(InvalidArgument, "grid dimensions, block size and horizon must be positive and slip in [0, 1]");
    }
    let cells = width * height;
    let obs = cells * observations_per_cell;
    let k = 4;
    let shape = Shape::uniform(horizon, k, obs)?;
    let mut rng = StreamSeed::new(seed).child(purpose::ENVIRONMENT).rng();
    let goal = cells - 1;
    let reward = 1.0 / horizon as f64;

    let level_emissions: Vec<Row> = (0..cells)
        .map(|c| {
            flat_dirichlet(observations_per_cell, &mut rng)
                .into_iter()
                .enumerate()
                .map(|(i, p)| (c * observations_per_cell + i, p))
                .filter(|&(_, p)| p > 0.0)
                .collect()
        })
        .collect();
    let moved = |c: usize, a: usize| -> usize {
        let (x, y) = (c % width, c / width);
        match a {
            0 if y + 1 < height => c + width,
            1 if x + 1 < width => c + 1,
            2 if y > 0 => c - width,
            3 if x > 0 => c - 1,
            _ => c,
        }
    };
    let mut rewards_level = Vec::with_capacity(cells * obs * k);
    let mut trans_level = Vec::with_capacity(cells * obs * k);
    for c in 0..cells {
        for _o in 0..obs {
            for a in 0..k {
                rewards_level.push(if c == goal { reward } else { 0.0 });
                let target = moved(c, a);
                let row = if target == c || slip == 0.0 {
                    vec![(target, 1.0)]
                } else if slip == 1.0 {
                    vec![(c, 1.0)]
                } else {
                    let mut r = vec![(c, slip), (target, 1.0 - slip)];
                    r.sort_by_key(|e| e.0);
                    r
                };
                trans_level.push(row);
            }
        }
    }
    let mut initial = vec![0.0; cells];
    initial[0] = 1.0;
    ReactivePOMDP::new(
        shape,
        vec![cells; horizon],
        initial,
        vec![level_emissions; horizon],
        vec![rewards_level; horizon],
        vec![trans_level; horizon - 1],
        RewardNoise::None,
    )
}
