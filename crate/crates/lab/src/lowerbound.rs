//! Side-by-side runs on the hard families: OLIVE with exact expectations
//! against uniform exploration with importance-weighted value estimates.

use anyhow::Result;
use olive_core::cdp::{sample_uniform_episode, EpisodicEnvironment, Trajectory};
use olive_core::class::{FunctionClass, Hypothesis};
use olive_core::envs::{optimal_value, realizable_class, tree_qstar_class, DEFAULT_LEAF_CAP};
use olive_core::olive::{run_olive, OliveConfig, OliveResult};
use olive_core::oracle::{exact_value_of_policy, Greedy};
use olive_core::seed::StreamSeed;
use serde::{Deserialize, Serialize};

use crate::analysis::Provenance;
use crate::env::{Environment, GeneratorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub branching: usize,
    pub horizon: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub states: usize,
    pub horizon: usize,
    pub actions: usize,
    pub tau: f64,
    /// Size of the realizable class run on the chain.
    #[serde(default = "default_chain_class")]
    pub class_size: usize,
}

fn default_chain_class() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSpec {
    #[serde(default = "default_tree")]
    pub tree: Option<TreeParams>,
    #[serde(default = "default_chain")]
    pub chain: Option<ChainParams>,
    /// Uniform episodes given to the baseline.
    #[serde(default = "default_baseline")]
    pub baseline_episodes: u64,
}

fn default_tree() -> Option<TreeParams> {
    Some(TreeParams { branching: 2, horizon: 3, gap: 0.25 })
}

fn default_chain() -> Option<ChainParams> {
    Some(ChainParams { states: 4, horizon: 2, actions: 2, tau: 0.25, class_size: default_chain_class() })
}

fn default_baseline() -> u64 {
    1000
}

impl Default for LowerBoundSpec {
    fn default() -> Self {
        LowerBoundSpec { tree: default_tree(), chain: default_chain(), baseline_episodes: default_baseline() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OliveSide {
    pub success: bool,
    pub value: Option<f64>,
    pub iterations: usize,
    /// Episodes the sampled version would have drawn with the derived sizes.
    pub equivalent_episodes: u64,
    pub result: OliveResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSide {
    pub success: bool,
    pub chosen: usize,
    pub estimated_value: f64,
    pub estimate_provenance: Provenance,
    pub value: f64,
    pub episodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: String,
    pub env_fingerprint: String,
    pub class_size: usize,
    pub optimal_value: f64,
    pub olive: OliveSide,
    pub baseline: BaselineSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub families: Vec<FamilyReport>,
}

impl LowerBoundReport {
    pub fn olive_succeeded(&self) -> bool {
        self.families.iter().all(|f| f.olive.success)
    }
}

/// `n_est + T n_eval + (exploring iterations) n`.
pub fn equivalent_episodes(result: &OliveResult) -> u64 {
    let p = &result.parameters;
    let t = result.iterations.len() as u64;
    let exploring = result.iterations.iter().filter(|r| r.level.is_some()).count() as u64;
    p.n_est.saturating_add(t.saturating_mul(p.n_eval)).saturating_add(exploring.saturating_mul(p.n))
}

/// Importance-weighted return of `f`'s greedy policy on one uniform episode.
fn iw_return<F: Hypothesis>(t: &Trajectory, f: &F, k: f64) -> f64 {
    let mut w = 1.0;
    for h in 1..=t.horizon() {
        if t.action(h) != f.greedy_action(t.context(h)) {
            return 0.0;
        }
        w *= k;
    }
    w * t.total_reward()
}

/// Picks the member whose estimated value is largest, lowest index on ties.
pub fn uniform_baseline<F: Hypothesis>(env: &Environment, class: &FunctionClass<F>, episodes: u64, epsilon: f64, seed: StreamSeed) -> Result<BaselineSide> {
    let k = EpisodicEnvironment::shape(env).action_count() as f64;
    let mut rng = seed.rng();
    let mut sums = vec![0.0; class.len()];
    for _ in 0..episodes {
        let t = sample_uniform_episode(env, &mut rng)?;
        for (s, f) in sums.iter_mut().zip(class.iter()) {
            *s += iw_return(&t, f, k);
        }
    }
    let n = episodes.max(1) as f64;
    let (chosen, best) = sums.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    let value = exact_value_of_policy(env.exact(), &Greedy(&class[chosen]));
    let vstar = optimal_value(env.exact())?;
    Ok(BaselineSide {
        success: value >= vstar - epsilon,
        chosen,
        estimated_value: best / n,
        estimate_provenance: Provenance::MonteCarlo,
        value,
        episodes,
    })
}

fn family<F: Hypothesis>(
    name: &str,
    env: &Environment,
    class: &FunctionClass<F>,
    olive: &OliveConfig,
    spec: &LowerBoundSpec,
    seed: StreamSeed,
) -> Result<FamilyReport> {
    let result = run_olive(env, class, olive, seed.child(1))?;
    let value = result.policy().map(|p| exact_value_of_policy(env.exact(), p));
    let side = OliveSide {
        success: result.succeeded(),
        value,
        iterations: result.iterations.len(),
        equivalent_episodes: equivalent_episodes(&result),
        result,
    };
    Ok(FamilyReport {
        family: name.to_string(),
        env_fingerprint: env.fingerprint(),
        class_size: class.len(),
        optimal_value: optimal_value(env.exact())?,
        olive: side,
        baseline: uniform_baseline(env, class, spec.baseline_episodes, olive.epsilon, seed.child(2))?,
    })
}

/// Runs each configured family once. OLIVE runs in population mode with
/// `M` equal to the latent width of the instance and `zeta = 2 sqrt(M)`.
pub fn lowerbound_demo(spec: &LowerBoundSpec, epsilon: f64, delta: f64, seed: u64) -> Result<LowerBoundReport> {
    let base = StreamSeed::new(seed);
    let config = |env: &Environment| {
        let m = env.factor_dimension();
        OliveConfig::new(epsilon, delta, m, 2.0 * (m as f64).sqrt()).population()
    };
    let mut families = Vec::new();
    if let Some(t) = &spec.tree {
        let env = GeneratorSpec::Tree { branching: t.branching, horizon: t.horizon, gap: t.gap, leaf: None, seed: None }.generate(seed)?;
        let class = tree_qstar_class(t.branching, t.horizon, t.gap, DEFAULT_LEAF_CAP)?;
        families.push(family("tree", &env, &class, &config(&env), spec, base.child(1))?);
    }
    if let Some(c) = &spec.chain {
        let env = GeneratorSpec::Chain { states: c.states, horizon: c.horizon, actions: c.actions, tau: c.tau, seed: None }.generate(seed)?;
        let class = realizable_class(env.exact(), c.class_size, 0.1, seed)?;
        families.push(family("chain", &env, &class, &config(&env), spec, base.child(2))?);
    }
    Ok(LowerBoundReport { families })
}
