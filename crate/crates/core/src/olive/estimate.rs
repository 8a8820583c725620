use alloc::vec::Vec;

use crate::cdp::{sample_episode, sample_episode_with_deviation, sample_uniform_episode, EpisodicEnvironment, ExactDynamics, Policy, Trajectory};
use crate::class::{FunctionClass, Hypothesis, SurvivingSet};
use crate::error::{bail, Error, Result};
use crate::oracle::{bellman_error_from, expected_initial_value, latent_occupancy, Greedy};
use crate::seed::SimRng;

/// `f(x_h, a_h) - r_h - f(x_{h+1}, a_{h+1})` on an on-policy episode of `pi_f`.
pub fn self_error_term<F: Hypothesis + ?Sized>(traj: &Trajectory, level: usize, f: &F) -> f64 {
    f.greedy_value(traj.context(level)) - traj.reward(level) - f.greedy_value(traj.context(level + 1))
}

/// Importance-weighted term
/// `K 1[a_h = pi_f(x_h)] (f(x_h, a_h) - r_h - f(x_{h+1}, pi_f(x_{h+1})))`
/// for an episode whose level-`h` action was uniform. Lies in `[-2K, K]`.
pub fn importance_weighted_term<F: Hypothesis + ?Sized>(traj: &Trajectory, level: usize, f: &F, actions: usize) -> f64 {
    let x = traj.context(level);
    if traj.action(level) != f.greedy_action(x) {
        return 0.0;
    }
    actions as f64 * (f.greedy_value(x) - traj.reward(level) - f.greedy_value(traj.context(level + 1)))
}

/// Monte-Carlo predicted values: `n_est` uniform-action episodes, of which
/// only the initial contexts are used.
pub fn estimate_initial_values<E, F>(env: &E, class: &FunctionClass<F>, n_est: usize, rng: &mut SimRng) -> Result<Vec<f64>>
where
    E: EpisodicEnvironment + ?Sized,
    F: Hypothesis,
{
    if n_est == 0 {
        bail!(InvalidArgument, "n_est must be at least 1");
    }
    let mut starts = Vec::with_capacity(n_est);
    for _ in 0..n_est {
        starts.push(sample_uniform_episode(env, rng)?.context(1));
    }
    Ok(class.iter().map(|f| starts.iter().map(|&x| f.greedy_value(x)).sum::<f64>() / n_est as f64).collect())
}

/// Exact `E[f(x_1, pi_f(x_1))]` for every member.
pub fn exact_initial_values<F: Hypothesis>(dynamics: &dyn ExactDynamics, class: &FunctionClass<F>) -> Vec<f64> {
    class.iter().map(|f| expected_initial_value(dynamics, f)).collect()
}

/// Surviving member with the largest predicted value, lowest index on ties.
pub fn choose_optimistic(surviving: &SurvivingSet, values: &[f64]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for i in surviving.indices() {
        if best.is_none_or(|b| values[i] > values[b]) {
            best = Some(i);
        }
    }
    best.ok_or(Error::EmptySurvivorSet)
}

/// Per-level on-policy estimates of `E(f_t, pi_t, h)` from `n_eval` episodes.
pub fn estimate_self_errors<E, F>(env: &E, f: &F, n_eval: usize, rng: &mut SimRng) -> Result<Vec<f64>>
where
    E: EpisodicEnvironment + ?Sized,
    F: Hypothesis + ?Sized,
{
    if n_eval == 0 {
        bail!(InvalidArgument, "n_eval must be at least 1");
    }
    let horizon = env.shape().horizon();
    let policy = f.policy();
    let mut sums = alloc::vec![0.0; horizon];
    for _ in 0..n_eval {
        let traj = sample_episode(env, &policy, rng)?;
        for (h, s) in sums.iter_mut().enumerate() {
            *s += self_error_term(&traj, h + 1, f);
        }
    }
    Ok(sums.into_iter().map(|s| s / n_eval as f64).collect())
}

/// Exact `E(f, pi_f, h)` for every level.
pub fn exact_self_errors<F: Hypothesis + ?Sized>(dynamics: &dyn ExactDynamics, f: &F) -> Result<Vec<f64>> {
    (1..=dynamics.shape().horizon())
        .map(|h| latent_occupancy(dynamics, &Greedy(f), h).map(|mu| bellman_error_from(dynamics, &mu, h, f)))
        .collect()
}

/// Decision after the on-policy check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stop,
    Explore(usize),
}

/// Stop iff `sum_h E_h <= 5 eps/8`; otherwise the smallest `h` with
/// `E_h >= 5 eps / (8H)`.
pub fn check_termination(self_errors: &[f64], epsilon: f64) -> Result<Termination> {
    let horizon = self_errors.len() as f64;
    let total: f64 = self_errors.iter().sum();
    if total <= 5.0 * epsilon / 8.0 {
        return Ok(Termination::Stop);
    }
    let bar = 5.0 * epsilon / (8.0 * horizon);
    match self_errors.iter().position(|&e| e >= bar) {
        Some(i) => Ok(Termination::Explore(i + 1)),
        None => Err(Error::Internal(alloc::format!("error sum {} exceeds 5eps/8 but no level reaches {}", total, bar))),
    }
}

/// Importance-weighted estimates of `E(f, pi_t, h)` for every survivor,
/// all from the same `n` episodes with a uniform action at level `h`.
pub fn estimate_all_errors<E, F>(
    env: &E,
    roll_in: &Policy,
    level: usize,
    class: &FunctionClass<F>,
    surviving: &SurvivingSet,
    n: usize,
    rng: &mut SimRng,
) -> Result<Vec<(usize, f64)>>
where
    E: EpisodicEnvironment + ?Sized,
    F: Hypothesis,
{
    if n == 0 {
        bail!(InvalidArgument, "n must be at least 1");
    }
    let k = env.shape().action_count();
    let mut episodes = Vec::with_capacity(n);
    for _ in 0..n {
        episodes.push(sample_episode_with_deviation(env, roll_in, level, rng)?);
    }
    Ok(surviving
        .indices()
        .map(|i| {
            let total: f64 = episodes.iter().map(|t| importance_weighted_term(t, level, &class[i], k)).sum();
            (i, total / n as f64)
        })
        .collect())
}

/// Exact `E(f, pi_t, h)` for every survivor.
pub fn exact_all_errors<F: Hypothesis>(
    dynamics: &dyn ExactDynamics,
    roll_in: &Policy,
    level: usize,
    class: &FunctionClass<F>,
    surviving: &SurvivingSet,
) -> Result<Vec<(usize, f64)>> {
    let mu = latent_occupancy(dynamics, roll_in, level)?;
    Ok(surviving.indices().map(|i| (i, bellman_error_from(dynamics, &mu, level, &class[i]))).collect())
}

/// Keep members whose estimate is at most `threshold` in magnitude.
/// Returns the new set and the indices removed.
pub fn eliminate(surviving: &SurvivingSet, estimates: &[(usize, f64)], threshold: f64) -> (SurvivingSet, Vec<usize>) {
    let mut next = surviving.clone();
    let mut removed = Vec::new();
    for &(i, e) in estimates {
        if surviving.contains(i) && e.abs() > threshold {
            next.remove(i);
            removed.push(i);
        }
    }
    (next, removed)
}
