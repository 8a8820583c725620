use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cdp::EpisodicEnvironment;
use crate::class::{FunctionClass, Hypothesis};
use crate::error::{bail, Result};
use crate::num::{floor, ln, sqrt};
use crate::seed::StreamSeed;

use super::params::check_unit_open;
use super::run::{run_olive, FailureReason, Mode, OliveConfig, OliveResult, Outcome, DEFAULT_MAX_EPISODES};

/// How the norm parameter is chosen for a rank guess `M'`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ZetaRule {
    /// `zeta' = 2 sqrt(M')`.
    #[default]
    TwoSqrt,
    Fixed(f64),
}

impl ZetaRule {
    pub fn zeta(&self, m: usize) -> f64 {
        match *self {
            ZetaRule::TwoSqrt => 2.0 * sqrt(m as f64),
            ZetaRule::Fixed(z) => z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessMConfig {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default)]
    pub zeta_rule: ZetaRule,
    #[serde(default)]
    pub mode: Mode,
    /// Episode budget shared by all calls.
    #[serde(default)]
    pub max_episodes: Option<u64>,
    /// Largest exponent `i` tried, so `M' <= 2^max_exponent`.
    #[serde(default = "default_max_exponent")]
    pub max_exponent: u32,
}

fn default_max_exponent() -> u32 {
    12
}

impl GuessMConfig {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        GuessMConfig {
            epsilon,
            delta,
            zeta_rule: ZetaRule::TwoSqrt,
            mode: Mode::Sampled,
            max_episodes: None,
            max_exponent: default_max_exponent(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessAttempt {
    pub exponent: u32,
    pub m_guess: usize,
    pub delta: f64,
    pub zeta: f64,
    pub hard_stop: usize,
    pub result: OliveResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessMResult {
    pub attempts: Vec<GuessAttempt>,
    pub total_episodes: u64,
}

impl GuessMResult {
    /// The last call, which carries the returned policy on success.
    pub fn final_result(&self) -> &OliveResult {
        &self.attempts.last().expect("at least one attempt is always made").result
    }

    pub fn succeeded(&self) -> bool {
        self.final_result().succeeded()
    }

    pub fn largest_guess(&self) -> usize {
        self.attempts.last().map_or(0, |a| a.m_guess)
    }
}

/// Failure share of call `i`: `delta / (i (i + 1))`. These sum to `delta`.
pub fn delta_share(delta: f64, i: u32) -> f64 {
    let i = i as f64;
    delta / (i * (i + 1.0))
}

/// `H M' ln(6 H sqrt(M') zeta' / eps) / ln(5/3)`, floored.
pub fn hard_stop(horizon: usize, m: usize, zeta: f64, epsilon: f64) -> usize {
    let (h, mf) = (horizon as f64, m as f64);
    let b = h * mf * ln(6.0 * h * sqrt(mf) * zeta / epsilon) / ln(5.0 / 3.0);
    if b.is_nan() || b < 1.0 {
        1
    } else {
        floor(b) as usize
    }
}

/// Doubling schedule over the rank: `M' = 2^i` for `i = 1, 2, ...`,
/// returning the first policy any call produces.
pub fn run_guess_m<E, F>(env: &E, class: &FunctionClass<F>, config: &GuessMConfig, seed: StreamSeed) -> Result<GuessMResult>
where
    E: EpisodicEnvironment + ?Sized,
    F: Hypothesis,
{
    check_unit_open("epsilon", config.epsilon)?;
    check_unit_open("delta", config.delta)?;
    if config.max_exponent == 0 || config.max_exponent > 40 {
        bail!(InvalidArgument, "max_exponent = {} must lie in [1, 40]", config.max_exponent);
    }
    let horizon = env.shape().horizon();
    let budget = config.max_episodes.unwrap_or(DEFAULT_MAX_EPISODES);
    let mut attempts = Vec::new();
    let mut used = 0u64;
    for i in 1..=config.max_exponent {
        let m_guess = 1usize << i;
        let zeta = config.zeta_rule.zeta(m_guess);
        let delta = delta_share(config.delta, i);
        let stop = hard_stop(horizon, m_guess, zeta, config.epsilon);
        let mut olive = OliveConfig::new(config.epsilon, delta, m_guess, zeta);
        olive.mode = config.mode;
        olive.max_iterations = Some(stop);
        olive.max_episodes = Some(budget - used);
        let result = run_olive(env, class, &olive, seed.child2(i as u64, m_guess as u64))?;
        used += result.total_episodes;
        let done = match &result.outcome {
            Outcome::Success { .. } => true,
            Outcome::Failure { reason: FailureReason::BudgetExhausted { .. } } => true,
            Outcome::Failure { .. } => false,
        };
        attempts.push(GuessAttempt { exponent: i, m_guess, delta, zeta, hard_stop: stop, result });
        if done {
            break;
        }
    }
    Ok(GuessMResult { attempts, total_episodes: used })
}
