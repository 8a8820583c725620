//! Environment generators.
//!
//! Every family here exposes explicit dynamics through [`ExactDynamics`]
//! and can be sampled through [`EpisodicEnvironment`]. Generators are pure
//! functions of their parameters and a `u64` seed.
//!
//! [`ExactDynamics`]: crate::cdp::ExactDynamics
//! [`EpisodicEnvironment`]: crate::cdp::EpisodicEnvironment

mod chain;
mod lowrank;
mod pomdp;
mod qstar;
mod tabular;
mod tree;

pub use chain::{make_bandit_chain, BanditChainMDP, BANDIT_OFFSET, BAD, GOOD, WAIT};
pub use lowrank::{make_low_rank_mdp, LowRankFactors, LowRankMDP};
pub use pomdp::{make_grid_pomdp, make_reactive_pomdp, GridSpec, ReactivePOMDP};
pub use qstar::{optimal_value, qstar, random_class, realizable_class};
pub use tabular::{make_random_mdp, RewardNoise, Row, TabularMDP};
pub use tree::{make_tree_lower_bound, tree_qstar_class, TreeLowerBoundMDP, TreeQ, DEFAULT_LEAF_CAP};

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Exp1;

use crate::seed::SimRng;

/// Default desk-scale caps.
pub const MAX_STATES: usize = 16;
pub const MAX_OBSERVATIONS: usize = 64;
pub const MAX_CLASS_SIZE: usize = 256;

/// A draw from the flat Dirichlet distribution on `n` categories.
pub(crate) fn flat_dirichlet(n: usize, rng: &mut SimRng) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![1.0];
    }
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

pub(crate) fn dense_to_row(probs: &[f64]) -> Row {
    probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect()
}
