use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cdp::{EpisodicEnvironment, ExactDynamics, Policy};
use crate::class::{FunctionClass, Hypothesis, SurvivingSet};
use crate::error::{bail, Error, Result};
use crate::seed::{purpose, StreamSeed};

use super::estimate::*;
use super::params::{check_unit_open, compute_parameters, default_max_iterations, effective_epsilon, Parameters};

const INIT_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;
const EXPLORE_STREAM: u64 = 3;

/// Default episode budget for sampled runs.
pub const DEFAULT_MAX_EPISODES: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Sampled,
    Population,
}

/// Explicit replacements for the derived threshold and sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Overrides {
    pub phi: Option<f64>,
    pub n_est: Option<u64>,
    pub n_eval: Option<u64>,
    pub n: Option<u64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.phi.is_none() && self.n_est.is_none() && self.n_eval.is_none() && self.n.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OliveConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Bellman-rank input `M`.
    pub m: usize,
    pub zeta: f64,
    /// Validity slack; 0 for the basic loop.
    #[serde(default)]
    pub theta: f64,
    /// Factorization slack; 0 for the basic loop.
    #[serde(default)]
    pub theta_m: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub max_episodes: Option<u64>,
}

impl OliveConfig {
    pub fn new(epsilon: f64, delta: f64, m: usize, zeta: f64) -> Self {
        OliveConfig {
            epsilon,
            delta,
            m,
            zeta,
            theta: 0.0,
            theta_m: 0.0,
            mode: Mode::Sampled,
            overrides: Overrides::default(),
            max_iterations: None,
            max_episodes: None,
        }
    }

    pub fn population(mut self) -> Self {
        self.mode = Mode::Population;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_open("epsilon", self.epsilon)?;
        check_unit_open("delta", self.delta)?;
        if self.m == 0 {
            bail!(InvalidArgument, "M must be at least 1");
        }
        if !(self.zeta > 0.0) {
            bail!(InvalidArgument, "zeta = {} must be positive", self.zeta);
        }
        for (name, v) in [("theta", self.theta), ("theta_M", self.theta_m)] {
            if !(0.0..=1.0).contains(&v) {
                bail!(InvalidArgument, "{} = {} must lie in [0, 1]", name, v);
            }
        }
        if let Some(phi) = self.overrides.phi {
            if !(phi >= 0.0) {
                bail!(InvalidArgument, "overridden phi = {} must be nonnegative", phi);
            }
        }
        if [self.overrides.n_est, self.overrides.n_eval, self.overrides.n].contains(&Some(0)) {
            bail!(InvalidArgument, "overridden sample sizes must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Index of the optimistic member `f_t`.
    pub chosen: usize,
    pub vhat: f64,
    pub self_errors: Vec<f64>,
    pub sum_self_error: f64,
    /// `h_t`, or `None` when the loop terminated at this iteration.
    pub level: Option<usize>,
    pub survivors_before: usize,
    pub survivors_after: usize,
    pub eliminated: Vec<usize>,
    pub episodes_cum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    BudgetExhausted { needed: u64, remaining: u64 },
    IterationLimit { limit: usize },
    EmptySurvivorSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success { member: usize, policy: Policy },
    Failure { reason: FailureReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OliveResult {
    pub mode: Mode,
    pub outcome: Outcome,
    pub iterations: Vec<IterationRecord>,
    pub total_episodes: u64,
    pub parameters: Parameters,
    pub epsilon_effective: f64,
    pub threshold: f64,
    pub max_iterations: usize,
    pub warnings: Vec<String>,
}

impl OliveResult {
    pub fn policy(&self) -> Option<&Policy> {
        match &self.outcome {
            Outcome::Success { policy, .. } => Some(policy),
            Outcome::Failure { .. } => None,
        }
    }

    pub fn succeeded(&self) -> bool {
        matches!(self.outcome, Outcome::Success { .. })
    }

    /// Iterations that selected level `h`.
    pub fn level_count(&self, level: usize) -> usize {
        self.iterations.iter().filter(|r| r.level == Some(level)).count()
    }
}

struct Budget {
    used: u64,
    max: u64,
}

impl Budget {
    fn take(&mut self, n: u64) -> core::result::Result<usize, FailureReason> {
        let remaining = self.max.saturating_sub(self.used);
        if n > remaining || n > usize::MAX as u64 {
            return Err(FailureReason::BudgetExhausted { needed: n, remaining });
        }
        self.used += n;
        Ok(n as usize)
    }
}

/// Basic loop: terminates on `eps`, eliminates at `phi`.
pub fn run_olive<E, F>(env: &E, class: &FunctionClass<F>, config: &OliveConfig, seed: StreamSeed) -> Result<OliveResult>
where
    E: EpisodicEnvironment + ?Sized,
    F: Hypothesis,
{
    let mut basic = config.clone();
    basic.theta = 0.0;
    basic.theta_m = 0.0;
    run_loop(env, class, &basic, seed)
}

/// Robust loop: terminates on `eps'`, eliminates at `phi + theta`.
pub fn run_oliver<E, F>(env: &E, class: &FunctionClass<F>, config: &OliveConfig, seed: StreamSeed) -> Result<OliveResult>
where
    E: EpisodicEnvironment + ?Sized,
    F: Hypothesis,
{
    run_loop(env, class, config, seed)
}

fn resolve(config: &OliveConfig, horizon: usize, actions: usize, size: usize, warnings: &mut Vec<String>) -> Result<Parameters> {
    let mut p = compute_parameters(config.epsilon, config.delta, config.m, config.zeta, horizon, actions, size)?;
    let o = config.overrides;
    if !o.is_empty() {
        warnings.push(String::from("parameter overrides are in effect; the iteration bound no longer applies"));
    }
    p.phi = o.phi.unwrap_or(p.phi);
    p.n_est = o.n_est.unwrap_or(p.n_est);
    p.n_eval = o.n_eval.unwrap_or(p.n_eval);
    p.n = o.n.unwrap_or(p.n);
    if p.phi > 4.0 {
        warnings.push(alloc::format!("phi = {} exceeds 4; the deviation bound for the elimination step does not hold", p.phi));
    }
    Ok(p)
}

fn run_loop<E, F>(env: &E, class: &FunctionClass<F>, config: &OliveConfig, seed: StreamSeed) -> Result<OliveResult>
where
    E: EpisodicEnvironment + ?Sized,
    F: Hypothesis,
{
    config.validate()?;
    let shape = env.shape();
    if class.shape() != shape {
        bail!(ShapeMismatch, "class and environment shapes differ");
    }
    let horizon = shape.horizon();
    let exact: Option<&dyn ExactDynamics> = match config.mode {
        Mode::Population => Some(env.dynamics().ok_or(Error::CapabilityRequired)?),
        Mode::Sampled => None,
    };
    let mut warnings = Vec::new();
    let params = resolve(config, horizon, shape.action_count(), class.len(), &mut warnings)?;
    let eps_eff = effective_epsilon(config.epsilon, horizon, config.m, config.theta, config.theta_m);
    let threshold = params.phi + config.theta;
    let max_iterations = config.max_iterations.unwrap_or_else(|| default_max_iterations(horizon, config.m, config.zeta, params.phi));
    let mut budget = Budget { used: 0, max: config.max_episodes.unwrap_or(DEFAULT_MAX_EPISODES) };
    let streams = seed.child(purpose::EPISODES);

    let mut records = Vec::new();
    let finish = |outcome: Outcome, records: Vec<IterationRecord>, used: u64, warnings: Vec<String>| OliveResult {
        mode: config.mode,
        outcome,
        iterations: records,
        total_episodes: used,
        parameters: params,
        epsilon_effective: eps_eff,
        threshold,
        max_iterations,
        warnings,
    };
    macro_rules! sample_or_fail {
        ($n:expr) => {
            match budget.take($n) {
                Ok(n) => n,
                Err(reason) => return Ok(finish(Outcome::Failure { reason }, records, budget.used, warnings)),
            }
        };
    }

    let vhat = match exact {
        Some(d) => exact_initial_values(d, class),
        None => {
            let n = sample_or_fail!(params.n_est);
            estimate_initial_values(env, class, n, &mut streams.child(INIT_STREAM).rng())?
        }
    };
    let mut surviving = SurvivingSet::full(class.len());

    for t in 1.. {
        if t > max_iterations {
            let reason = FailureReason::IterationLimit { limit: max_iterations };
            return Ok(finish(Outcome::Failure { reason }, records, budget.used, warnings));
        }
        let chosen = choose_optimistic(&surviving, &vhat)?;
        let f = &class[chosen];
        let self_errors = match exact {
            Some(d) => exact_self_errors(d, f)?,
            None => {
                let n = sample_or_fail!(params.n_eval);
                estimate_self_errors(env, f, n, &mut streams.child2(EVAL_STREAM, t as u64).rng())?
            }
        };
        let sum_self_error = self_errors.iter().sum();
        let before = surviving.count();
        let mut record = IterationRecord {
            t,
            chosen,
            vhat: vhat[chosen],
            self_errors,
            sum_self_error,
            level: None,
            survivors_before: before,
            survivors_after: before,
            eliminated: Vec::new(),
            episodes_cum: budget.used,
        };
        let level = match check_termination(&record.self_errors, eps_eff)? {
            Termination::Stop => {
                records.push(record);
                let outcome = Outcome::Success { member: chosen, policy: f.policy() };
                return Ok(finish(outcome, records, budget.used, warnings));
            }
            Termination::Explore(h) => h,
        };
        let roll_in = f.policy();
        let estimates = match exact {
            Some(d) => exact_all_errors(d, &roll_in, level, class, &surviving)?,
            None => {
                let n = sample_or_fail!(params.n);
                estimate_all_errors(env, &roll_in, level, class, &surviving, n, &mut streams.child2(EXPLORE_STREAM, t as u64).rng())?
            }
        };
        let (next, removed) = eliminate(&surviving, &estimates, threshold);
        surviving = next;
        record.level = Some(level);
        record.survivors_after = surviving.count();
        record.eliminated = removed;
        record.episodes_cum = budget.used;
        records.push(record);
        if surviving.is_empty() {
            let reason = FailureReason::EmptySurvivorSet;
            return Ok(finish(Outcome::Failure { reason }, records, budget.used, warnings));
        }
    }
    unreachable!("the iteration loop is unbounded")
}
