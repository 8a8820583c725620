use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cdp::{Context, Emission, EpisodicEnvironment, ExactDynamics, Shape, Step};
use crate::class::{argmax_lowest, FunctionClass, Hypothesis, QFunction};
use crate::error::{bail, Error, Result};
use crate::seed::SimRng;

use super::tabular::{RewardNoise, TabularMDP};

/// Default bound on the number of leaves `K^H`.
pub const DEFAULT_LEAF_CAP: u64 = 4096;

fn leaf_count(branching: usize, horizon: usize, cap: u64) -> Result<usize> {
    if branching < 2 || horizon == 0 {
        bail!(InvalidArgument, "tree needs K >= 2 and H >= 1 (got K={}, H={})", branching, horizon);
    }
    let leaves = (branching as u64).checked_pow(horizon as u32).unwrap_or(u64::MAX);
    if leaves > cap {
        return Err(Error::SizeCap { what: "K^H", value: leaves, cap });
    }
    Ok(leaves as usize)
}

fn tree_shape(branching: usize, horizon: usize) -> Result<Shape> {
    Shape::new(branching, (0..horizon).map(|h| branching.pow(h as u32)).collect())
}

/// Complete `K`-ary tree of depth `H` with deterministic moves. Leaf
/// `l = node * K + action` taken at level `H` pays `Bernoulli(1/2)`,
/// except the distinguished leaf which pays `Bernoulli(1/2 + gap)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeLowerBoundMDP {
    mdp: TabularMDP,
    branching: usize,
    gap: f64,
    leaf: usize,
}

/// Build the tree instance with the default leaf cap.
pub fn make_tree_lower_bound(branching: usize, horizon: usize, gap: f64, leaf: usize) -> Result<TreeLowerBoundMDP> {
    TreeLowerBoundMDP::with_cap(branching, horizon, gap, leaf, DEFAULT_LEAF_CAP)
}

impl TreeLowerBoundMDP {
    pub fn with_cap(branching: usize, horizon: usize, gap: f64, leaf: usize, cap: u64) -> Result<Self> {
        let leaves = leaf_count(branching, horizon, cap)?;
        if !(0.0..=0.5).contains(&gap) {
            bail!(InvalidArgument, "gap {} must lie in [0, 1/2]", gap);
        }
        if leaf >= leaves {
            bail!(InvalidArgument, "leaf index {} out of range for {} leaves", leaf, leaves);
        }
        let k = branching;
        let shape = tree_shape(k, horizon)?;
        let transitions = (1..horizon)
            .map(|h| (0..shape.cores(h) * k).map(|cell| vec![(cell, 1.0)]).collect())
            .collect();
        let mut rewards: Vec<Vec<f64>> = (1..=horizon).map(|h| vec![0.0; shape.cores(h) * k]).collect();
        let last = rewards.last_mut().expect("horizon is positive");
        last.iter_mut().for_each(|r| *r = 0.5);
        last[leaf] = 0.5 + gap;
        let mdp = TabularMDP::new(shape, vec![1.0], transitions, rewards, RewardNoise::Bernoulli { scale: 1.0 })?;
        Ok(TreeLowerBoundMDP { mdp, branching, gap, leaf })
    }

    pub fn mdp(&self) -> &TabularMDP {
        &self.mdp
    }

    pub fn leaf(&self) -> usize {
        self.leaf
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn leaf_count(&self) -> usize {
        self.branching.pow(ExactDynamics::shape(&self.mdp).horizon() as u32)
    }

    pub fn optimal_value(&self) -> f64 {
        0.5 + self.gap
    }
}

impl ExactDynamics for TreeLowerBoundMDP {
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

impl EpisodicEnvironment for TreeLowerBoundMDP {
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

/// `Q*` of the tree instance whose distinguished leaf is `leaf`, evaluated
/// on the fly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeQ {
    shape: Shape,
    leaf: usize,
    gap: f64,
}

impl TreeQ {
    fn leads_to_leaf(&self, x: Context, action: usize) -> bool {
        let k = self.shape.action_count();
        let depth_below = (self.shape.horizon() - x.level) as u32;
        self.leaf / k.pow(depth_below) == x.core * k + action
    }

    pub fn value(&self, x: Context, action: usize) -> f64 {
        if x.level > self.shape.horizon() {
            0.0
        } else if self.leads_to_leaf(x, action) {
            0.5 + self.gap
        } else {
            0.5
        }
    }

    pub fn leaf(&self) -> usize {
        self.leaf
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn to_qfunction(&self) -> QFunction {
        QFunction::from_fn(self.shape.clone(), |x, a| self.value(x, a)).expect("tree values lie in [0, 1]")
    }
}

impl Hypothesis for TreeQ {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn greedy_action(&self, x: Context) -> usize {
        let k = self.shape.action_count();
        let values: Vec<f64> = (0..k).map(|a| self.value(x, a)).collect();
        argmax_lowest(&values)
    }

    fn greedy_value(&self, x: Context) -> f64 {
        if x.level > self.shape.horizon() {
            return 0.0;
        }
        self.value(x, self.greedy_action(x))
    }
}

/// One member per leaf placement; member `l` is `Q*` of the instance with
/// distinguished leaf `l`.
pub fn tree_qstar_class(branching: usize, horizon: usize, gap: f64, cap: u64) -> Result<FunctionClass<TreeQ>> {
    let leaves = leaf_count(branching, horizon, cap)?;
    if !(0.0..=0.5).contains(&gap) {
        bail!(InvalidArgument, "gap {} must lie in [0, 1/2]", gap);
    }
    let shape = tree_shape(branching, horizon)?;
    FunctionClass::new((0..leaves).map(|leaf| TreeQ { shape: shape.clone(), leaf, gap }).collect())
}
