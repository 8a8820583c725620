//! Contexts, policies, trajectories and the episodic environment contract.
//!
//! Contexts are `(core, level)` pairs. For an MDP the core is the state id;
//! for a reactive POMDP it is the observation id. Level `H + 1` is terminal
//! and carries a single core.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::seed::SimRng;

/// Tolerance used when checking that stochastic rows are normalized.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context {
    pub core: usize,
    /// 1-based level in `1..=H+1`.
    pub level: usize,
}

impl Context {
    pub const fn new(core: usize, level: usize) -> Self {
        Context { core, level }
    }
}

/// Horizon, action count and per-level context-core counts shared by an
/// environment and every hypothesis evaluated on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    horizon: usize,
    action_count: usize,
    context_cores: Vec<usize>,
}

impl Shape {
    /// `context_cores[h - 1]` is the core count at level `h` for `h` in `1..=H`.
    pub fn new(action_count: usize, context_cores: Vec<usize>) -> Result<Self> {
        if context_cores.is_empty() {
            bail!(InvalidArgument, "horizon must be at least 1");
        }
        if action_count == 0 {
            bail!(InvalidArgument, "action count must be at least 1");
        }
        if let Some(h) = context_cores.iter().position(|&c| c == 0) {
            bail!(InvalidArgument, "level {} has no context cores", h + 1);
        }
        Ok(Shape { horizon: context_cores.len(), action_count, context_cores })
    }

    pub fn uniform(horizon: usize, action_count: usize, cores: usize) -> Result<Self> {
        Shape::new(action_count, vec![cores; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Core count at `level`; the terminal level `H + 1` has exactly one.
    pub fn cores(&self, level: usize) -> usize {
        match level {
            l if l >= 1 && l <= self.horizon => self.context_cores[l - 1],
            l if l == self.horizon + 1 => 1,
            _ => 0,
        }
    }

    pub fn context_cores(&self) -> &[usize] {
        &self.context_cores
    }

    pub fn terminal(&self) -> Context {
        Context::new(0, self.horizon + 1)
    }

    pub fn contains(&self, x: Context) -> bool {
        x.core < self.cores(x.level)
    }

    pub fn check_context(&self, x: Context) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            outside_shape(x)
        }
    }

    /// Number of `(level, core)` cells at levels `1..=H`.
    pub fn cell_count(&self) -> usize {
        self.context_cores.iter().sum()
    }
}

fn outside_shape(x: Context) -> Result<()> {
    Err(Error::InvalidArgument(format!("context (core {}, level {}) is outside the shape", x.core, x.level)))
}

/// A deterministic tabular policy over levels `1..=H`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    action_count: usize,
    actions: Vec<Vec<usize>>,
}

impl Policy {
    pub fn new(shape: &Shape, actions: Vec<Vec<usize>>) -> Result<Self> {
        if actions.len() != shape.horizon() {
            bail!(ShapeMismatch, "policy has {} levels, shape has {}", actions.len(), shape.horizon());
        }
        for (h, row) in actions.iter().enumerate() {
            if row.len() != shape.cores(h + 1) {
                bail!(ShapeMismatch, "policy level {} has {} cores, expected {}", h + 1, row.len(), shape.cores(h + 1));
            }
            if let Some(&a) = row.iter().find(|&&a| a >= shape.action_count()) {
                bail!(InvalidArgument, "action {} out of range at level {}", a, h + 1);
            }
        }
        Ok(Policy { action_count: shape.action_count(), actions })
    }

    pub fn from_fn(shape: &Shape, mut rule: impl FnMut(Context) -> usize) -> Result<Self> {
        let actions = (1..=shape.horizon())
            .map(|h| (0..shape.cores(h)).map(|c| rule(Context::new(c, h))).collect())
            .collect();
        Policy::new(shape, actions)
    }

    pub fn constant(shape: &Shape, action: usize) -> Result<Self> {
        Policy::from_fn(shape, |_| action)
    }

    pub fn random(shape: &Shape, rng: &mut SimRng) -> Self {
        let k = shape.action_count();
        Policy::from_fn(shape, |_| rng.random_range(0..k)).expect("actions drawn in range")
    }

    /// Action at `x`; panics if `x` is outside the table. Use
    /// [`Policy::try_action`] for untrusted contexts.
    pub fn action(&self, x: Context) -> usize {
        self.actions[x.level - 1][x.core]
    }

    pub fn try_action(&self, x: Context) -> Result<usize> {
        x.level
            .checked_sub(1)
            .and_then(|h| self.actions.get(h))
            .and_then(|row| row.get(x.core))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("policy undefined at (core {}, level {})", x.core, x.level)))
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.actions
    }

    /// Check the policy covers every context of `shape`.
    pub fn check_shape(&self, shape: &Shape) -> Result<()> {
        let ok = self.action_count == shape.action_count()
            && self.actions.len() == shape.horizon()
            && self.actions.iter().enumerate().all(|(h, row)| row.len() == shape.cores(h + 1));
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("policy does not cover the environment's context space".into()))
        }
    }
}

/// One episode `(x_1, a_1, r_1, ..., x_H, a_H, r_H, x_{H+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub contexts: Vec<Context>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Context at level `h` (1-based, up to `H + 1`).
    pub fn context(&self, h: usize) -> Context {
        self.contexts[h - 1]
    }

    pub fn action(&self, h: usize) -> usize {
        self.actions[h - 1]
    }

    pub fn reward(&self, h: usize) -> f64 {
        self.rewards[h - 1]
    }

    /// Levels run `1..=H+1` in order, rewards are nonnegative and sum to at
    /// most one (with `slack` for accumulated rounding).
    pub fn satisfies_invariants(&self, slack: f64) -> bool {
        let h = self.actions.len();
        self.contexts.len() == h + 1
            && self.rewards.len() == h
            && self.contexts.iter().enumerate().all(|(i, x)| x.level == i + 1)
            && self.rewards.iter().all(|&r| r >= 0.0)
            && self.total_reward() <= 1.0 + slack
    }
}

/// Outcome of one environment transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub latent: usize,
    pub core: usize,
}

/// An episodic decision process that can be sampled.
///
/// `latent` is environment-private bookkeeping (the hidden state of a POMDP,
/// or the state itself for an MDP). Agents only ever see cores.
pub trait EpisodicEnvironment: Sync {
    fn shape(&self) -> &Shape;

    /// Draw `(latent, core)` for level 1.
    fn reset(&self, rng: &mut SimRng) -> (usize, usize);

    /// Advance from level `level` (in `1..=H`). At level `H` the returned
    /// core and latent are both 0, the terminal context.
    fn step(&self, level: usize, latent: usize, core: usize, action: usize, rng: &mut SimRng) -> Step;

    /// Explicit dynamics, when the environment exposes them.
    fn dynamics(&self) -> Option<&dyn ExactDynamics> {
        None
    }
}

/// Emission row: the distribution over cores a latent state produces.
#[derive(Debug, Clone, Copy)]
pub enum Emission<'a> {
    /// The latent state is observed directly.
    Point(usize),
    Row(&'a [(usize, f64)]),
}

impl<'a> Emission<'a> {
    pub fn iter(self) -> impl Iterator<Item = (usize, f64)> + 'a {
        let (point, row) = match self {
            Emission::Point(c) => (Some((c, 1.0)), &[][..]),
            Emission::Row(r) => (None, r),
        };
        point.into_iter().chain(row.iter().copied())
    }
}

/// Explicit dynamics of a layered latent-state process with reactive contexts.
///
/// Rows are sparse `(index, probability)` lists. Transition rows at level `H`
/// are empty (the episode ends).
pub trait ExactDynamics: Sync {
    fn shape(&self) -> &Shape;

    fn latent_count(&self, level: usize) -> usize;

    /// Distribution over level-1 latent states.
    fn initial_latent(&self) -> &[f64];

    fn emission(&self, level: usize, latent: usize) -> Emission<'_>;

    fn reward_mean(&self, level: usize, latent: usize, core: usize, action: usize) -> f64;

    /// Largest reward that can be realized at this cell (equals the mean when
    /// rewards are noiseless).
    fn reward_cap(&self, level: usize, latent: usize, core: usize, action: usize) -> f64;

    fn transition(&self, level: usize, latent: usize, core: usize, action: usize) -> &[(usize, f64)];
}

/// Draw an index from a sparse probability row.
pub fn sample_row(row: &[(usize, f64)], rng: &mut SimRng) -> usize {
    debug_assert!(!row.is_empty());
    if row.len() == 1 {
        return row[0].0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(i, p) in row {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row[row.len() - 1].0
}

/// Draw an index from a dense probability vector.
pub fn sample_dense(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

/// Roll out one episode choosing actions with `choose(context, rng)`.
pub fn rollout<E: EpisodicEnvironment + ?Sized>(
    env: &E,
    rng: &mut SimRng,
    mut choose: impl FnMut(Context, &mut SimRng) -> Result<usize>,
) -> Result<Trajectory> {
    let horizon = env.shape().horizon();
    let mut contexts = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let (mut latent, mut core) = env.reset(rng);
    for h in 1..=horizon {
        let x = Context::new(core, h);
        contexts.push(x);
        let a = choose(x, rng)?;
        let step = env.step(h, latent, core, a, rng);
        actions.push(a);
        rewards.push(step.reward);
        latent = step.latent;
        core = step.core;
    }
    contexts.push(env.shape().terminal());
    Ok(Trajectory { contexts, actions, rewards })
}

/// One episode with `a_{1:H} = policy(x_{1:H})`.
pub fn sample_episode<E: EpisodicEnvironment + ?Sized>(env: &E, policy: &Policy, rng: &mut SimRng) -> Result<Trajectory> {
    policy.check_shape(env.shape())?;
    rollout(env, rng, |x, _| policy.try_action(x))
}

/// One full-length episode following `base` except that `a_h` is drawn
/// uniformly from the action set.
pub fn sample_episode_with_deviation<E: EpisodicEnvironment + ?Sized>(
    env: &E,
    base: &Policy,
    deviate_level: usize,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    let shape = env.shape();
    if deviate_level == 0 || deviate_level > shape.horizon() {
        bail!(InvalidArgument, "deviation level {} outside 1..={}", deviate_level, shape.horizon());
    }
    base.check_shape(shape)?;
    let k = shape.action_count();
    rollout(env, rng, |x, rng| {
        if x.level == deviate_level {
            Ok(rng.random_range(0..k))
        } else {
            base.try_action(x)
        }
    })
}

/// One episode with every action drawn uniformly at random.
pub fn sample_uniform_episode<E: EpisodicEnvironment + ?Sized>(env: &E, rng: &mut SimRng) -> Result<Trajectory> {
    let k = env.shape().action_count();
    rollout(env, rng, |_, rng| Ok(rng.random_range(0..k)))
}

/// Mean return of `policy` over `n_episodes` independent episodes.
pub fn policy_value_mc<E: EpisodicEnvironment + ?Sized>(
    env: &E,
    policy: &Policy,
    n_episodes: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    if n_episodes == 0 {
        bail!(InvalidArgument, "n_episodes must be at least 1");
    }
    let mut total = 0.0;
    for _ in 0..n_episodes {
        total += sample_episode(env, policy, rng)?.total_reward();
    }
    Ok(total / n_episodes as f64)
}

/// A single defect found by [`validate_environment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    InitialSum { sum: f64 },
    EmissionSum { level: usize, latent: usize, sum: f64 },
    TransitionSum { level: usize, latent: usize, core: usize, action: usize, sum: f64 },
    NegativeProbability { level: usize, latent: usize },
    IndexOutOfRange { level: usize, latent: usize },
    NegativeReward { level: usize, latent: usize, core: usize, action: usize, reward: f64 },
    RewardPathSum { worst: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Largest reward sum along any path of positive probability.
    pub worst_reward_path: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn row_sum(row: impl Iterator<Item = (usize, f64)>, bound: usize, neg: &mut bool, oob: &mut bool) -> f64 {
    let mut s = 0.0;
    for (i, p) in row {
        *neg |= p < 0.0;
        *oob |= i >= bound;
        s += p;
    }
    s
}

/// Audit normalization, reward sign and the unit reward-sum bound.
pub fn validate_environment(dynamics: &dyn ExactDynamics) -> ValidationReport {
    let shape = dynamics.shape();
    let horizon = shape.horizon();
    let k = shape.action_count();
    let mut violations = Vec::new();

    let init = dynamics.initial_latent();
    let (mut neg, mut oob) = (false, init.len() != dynamics.latent_count(1));
    let s = row_sum(init.iter().copied().enumerate(), dynamics.latent_count(1), &mut neg, &mut oob);
    if (s - 1.0).abs() > ROW_SUM_TOL {
        violations.push(Violation::InitialSum { sum: s });
    }
    if neg {
        violations.push(Violation::NegativeProbability { level: 1, latent: usize::MAX });
    }

    for h in 1..=horizon {
        let cores = shape.cores(h);
        let next_latents = if h < horizon { dynamics.latent_count(h + 1) } else { 0 };
        for latent in 0..dynamics.latent_count(h) {
            let (mut neg, mut oob) = (false, false);
            let es = row_sum(dynamics.emission(h, latent).iter(), cores, &mut neg, &mut oob);
            if (es - 1.0).abs() > ROW_SUM_TOL {
                violations.push(Violation::EmissionSum { level: h, latent, sum: es });
            }
            for (core, _) in dynamics.emission(h, latent).iter().filter(|&(c, _)| c < cores) {
                for a in 0..k {
                    let r = dynamics.reward_mean(h, latent, core, a);
                    if r < 0.0 || dynamics.reward_cap(h, latent, core, a) < 0.0 {
                        violations.push(Violation::NegativeReward { level: h, latent, core, action: a, reward: r });
                    }
                    if h < horizon {
                        let ts = row_sum(dynamics.transition(h, latent, core, a).iter().copied(), next_latents, &mut neg, &mut oob);
                        if (ts - 1.0).abs() > ROW_SUM_TOL {
                            violations.push(Violation::TransitionSum { level: h, latent, core, action: a, sum: ts });
                        }
                    }
                }
            }
            if neg {
                violations.push(Violation::NegativeProbability { level: h, latent });
            }
            if oob {
                violations.push(Violation::IndexOutOfRange { level: h, latent });
            }
        }
    }

    let worst = worst_reward_path(dynamics);
    if worst > 1.0 + ROW_SUM_TOL {
        violations.push(Violation::RewardPathSum { worst });
    }
    ValidationReport { violations, worst_reward_path: worst }
}

/// Backward max-plus DP over positive-probability paths with arbitrary actions.
fn worst_reward_path(dynamics: &dyn ExactDynamics) -> f64 {
    let shape = dynamics.shape();
    let horizon = shape.horizon();
    let k = shape.action_count();
    let mut next: Vec<f64> = Vec::new();
    for h in (1..=horizon).rev() {
        let cur: Vec<f64> = (0..dynamics.latent_count(h))
            .map(|latent| {
                let mut best = 0.0f64;
                for (core, p) in dynamics.emission(h, latent).iter() {
                    if p <= 0.0 || core >= shape.cores(h) {
                        continue;
                    }
                    for a in 0..k {
                        let tail = if h < horizon {
                            dynamics
                                .transition(h, latent, core, a)
                                .iter()
                                .filter(|&&(s, q)| q > 0.0 && s < next.len())
                                .map(|&(s, _)| next[s])
                                .fold(0.0, f64::max)
                        } else {
                            0.0
                        };
                        best = best.max(dynamics.reward_cap(h, latent, core, a) + tail);
                    }
                }
                best
            })
            .collect();
        next = cur;
    }
    dynamics
        .initial_latent()
        .iter()
        .enumerate()
        .filter(|&(s, &p)| p > 0.0 && s < next.len())
        .map(|(s, _)| next[s])
        .fold(0.0, f64::max)
}
