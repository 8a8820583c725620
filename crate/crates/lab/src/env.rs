//! Environment documents and generator specs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use olive_core::cdp::{validate_environment, Emission, EpisodicEnvironment, ExactDynamics, Shape, Step};
use olive_core::envs::{
    make_bandit_chain, make_grid_pomdp, make_low_rank_mdp, make_random_mdp, make_reactive_pomdp, BanditChainMDP, GridSpec, LowRankMDP,
    ReactivePOMDP, TabularMDP, TreeLowerBoundMDP,
};
use olive_core::seed::SimRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Any environment the laboratory can load, save or generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Environment {
    Tabular(TabularMDP),
    LowRank(LowRankMDP),
    Pomdp(ReactivePOMDP),
    Tree(TreeLowerBoundMDP),
    Chain(BanditChainMDP),
}

macro_rules! each {
    ($self:expr, $e:ident => $body:expr) => {
        match $self {
            Environment::Tabular($e) => $body,
            Environment::LowRank($e) => $body,
            Environment::Pomdp($e) => $body,
            Environment::Tree($e) => $body,
            Environment::Chain($e) => $body,
        }
    };
}

impl Environment {
    pub fn kind(&self) -> &'static str {
        match self {
            Environment::Tabular(_) => "tabular",
            Environment::LowRank(_) => "low_rank",
            Environment::Pomdp(_) => "pomdp",
            Environment::Tree(_) => "tree",
            Environment::Chain(_) => "chain",
        }
    }

    pub fn exact(&self) -> &dyn ExactDynamics {
        each!(self, e => e)
    }

    /// Largest number of latent states at any level. This is the dimension
    /// of the latent factorization.
    pub fn latent_width(&self) -> usize {
        let d = self.exact();
        (1..=d.shape().horizon()).map(|h| d.latent_count(h)).max().unwrap_or(1)
    }

    /// Dimension of the tightest constructive factorization available.
    pub fn factor_dimension(&self) -> usize {
        match self {
            Environment::LowRank(e) => e.rank().max(1),
            _ => self.latent_width(),
        }
    }

    /// Rebuilds from the raw tables through the checked constructors, so a
    /// hand-edited file cannot bypass validation.
    pub fn rechecked(&self) -> Result<Environment> {
        let env = match self {
            Environment::Tabular(m) => Environment::Tabular(recheck_tabular(m)?),
            Environment::LowRank(m) => {
                let inner = m.mdp();
                let shape = recheck_shape(ExactDynamics::shape(inner))?;
                let rebuilt = LowRankMDP::from_factors(shape, inner.initial().to_vec(), m.factors().to_vec(), inner.rewards().to_vec(), inner.noise())?;
                if &rebuilt != m {
                    bail!("low-rank transitions do not equal the product of the stored factors");
                }
                Environment::LowRank(rebuilt)
            }
            Environment::Pomdp(p) => {
                let shape = recheck_shape(ExactDynamics::shape(p))?;
                let horizon = shape.horizon();
                Environment::Pomdp(ReactivePOMDP::new(
                    shape,
                    (1..=horizon).map(|h| p.hidden(h)).collect(),
                    p.initial().to_vec(),
                    p.emissions().to_vec(),
                    p.rewards().to_vec(),
                    p.transitions().to_vec(),
                    p.noise(),
                )?)
            }
            Environment::Tree(t) => {
                let horizon = ExactDynamics::shape(t).horizon();
                let rebuilt = TreeLowerBoundMDP::with_cap(t.branching(), horizon, t.gap(), t.leaf(), u64::MAX)?;
                if &rebuilt != t {
                    bail!("tree tables do not match the declared branching, gap and leaf");
                }
                Environment::Tree(rebuilt)
            }
            Environment::Chain(c) => {
                let shape = ExactDynamics::shape(c);
                let rebuilt =
                    make_bandit_chain(c.mdp().states(1), shape.horizon(), shape.action_count(), c.tau(), Some(c.best_actions().to_vec()), 0)?;
                if &rebuilt != c {
                    bail!("bandit-chain tables do not match the declared gap and best actions");
                }
                Environment::Chain(rebuilt)
            }
        };
        let report = validate_environment(env.exact());
        if !report.is_valid() {
            bail!("environment failed validation: {:?}", report.violations);
        }
        Ok(env)
    }

    pub fn load(path: &Path) -> Result<Environment> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Environment::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    /// Parses a versioned document and revalidates it.
    pub fn from_json(text: &str) -> Result<Environment> {
        let env: Environment = crate::doc::from_versioned(text)?;
        env.rechecked()
    }

    /// Versioned document, as written by `gen`.
    pub fn to_json(&self) -> String {
        crate::doc::to_versioned(self)
    }

    /// Hex SHA-256 of the compact JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("environments always serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn recheck_shape(shape: &Shape) -> Result<Shape> {
    Ok(Shape::new(shape.action_count(), shape.context_cores().to_vec())?)
}

fn recheck_tabular(m: &TabularMDP) -> Result<TabularMDP> {
    let shape = recheck_shape(ExactDynamics::shape(m))?;
    Ok(TabularMDP::new(shape, m.initial().to_vec(), m.transitions().to_vec(), m.rewards().to_vec(), m.noise())?)
}

impl EpisodicEnvironment for Environment {
    fn shape(&self) -> &Shape {
        each!(self, e => EpisodicEnvironment::shape(e))
    }

    fn reset(&self, rng: &mut SimRng) -> (usize, usize) {
        each!(self, e => e.reset(rng))
    }

    fn step(&self, level: usize, latent: usize, core: usize, action: usize, rng: &mut SimRng) -> Step {
        each!(self, e => e.step(level, latent, core, action, rng))
    }

    fn dynamics(&self) -> Option<&dyn ExactDynamics> {
        Some(self.exact())
    }
}

impl ExactDynamics for Environment {
    fn shape(&self) -> &Shape {
        self.exact().shape()
    }
    fn latent_count(&self, level: usize) -> usize {
        self.exact().latent_count(level)
    }
    fn initial_latent(&self) -> &[f64] {
        self.exact().initial_latent()
    }
    fn emission(&self, level: usize, latent: usize) -> Emission<'_> {
        self.exact().emission(level, latent)
    }
    fn reward_mean(&self, level: usize, latent: usize, core: usize, action: usize) -> f64 {
        self.exact().reward_mean(level, latent, core, action)
    }
    fn reward_cap(&self, level: usize, latent: usize, core: usize, action: usize) -> f64 {
        self.exact().reward_cap(level, latent, core, action)
    }
    fn transition(&self, level: usize, latent: usize, core: usize, action: usize) -> &[(usize, f64)] {
        self.exact().transition(level, latent, core, action)
    }
}

/// Parameters for one of the built-in generators. A missing `seed` is
/// filled in with the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Mdp {
        states: usize,
        actions: usize,
        horizon: usize,
        #[serde(default)]
        bernoulli: bool,
        #[serde(default)]
        seed: Option<u64>,
    },
    LowRank {
        states: usize,
        actions: usize,
        horizon: usize,
        rank: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Pomdp {
        hidden: usize,
        observations: usize,
        actions: usize,
        horizon: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Grid {
        #[serde(flatten)]
        spec: GridSpec,
        #[serde(default)]
        seed: Option<u64>,
    },
    Tree {
        branching: usize,
        horizon: usize,
        gap: f64,
        /// Distinguished leaf; drawn from the seed when absent.
        #[serde(default)]
        leaf: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
    },
    Chain {
        states: usize,
        horizon: usize,
        actions: usize,
        tau: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// Caps on generated sizes.
pub const MAX_STATES: usize = olive_core::envs::MAX_STATES;
pub const MAX_OBSERVATIONS: usize = olive_core::envs::MAX_OBSERVATIONS;

impl GeneratorSpec {
    pub fn generate(&self, run_seed: u64) -> Result<Environment> {
        let pick = |s: &Option<u64>| s.unwrap_or(run_seed);
        let check_states = |s: usize| -> Result<()> {
            if s > MAX_STATES {
                bail!("{} states exceeds the cap of {}", s, MAX_STATES);
            }
            Ok(())
        };
        Ok(match self {
            GeneratorSpec::Mdp { states, actions, horizon, bernoulli, seed } => {
                check_states(*states)?;
                let m = make_random_mdp(*states, *actions, *horizon, pick(seed))?;
                Environment::Tabular(if *bernoulli { m.with_bernoulli_rewards()? } else { m })
            }
            GeneratorSpec::LowRank { states, actions, horizon, rank, seed } => {
                check_states(*states)?;
                Environment::LowRank(make_low_rank_mdp(*states, *actions, *horizon, *rank, pick(seed))?)
            }
            GeneratorSpec::Pomdp { hidden, observations, actions, horizon, seed } => {
                check_states(*hidden)?;
                if *observations > MAX_OBSERVATIONS {
                    bail!("{} observations exceeds the cap of {}", observations, MAX_OBSERVATIONS);
                }
                Environment::Pomdp(make_reactive_pomdp(*hidden, *observations, *actions, *horizon, pick(seed))?)
            }
            GeneratorSpec::Grid { spec, seed } => Environment::Pomdp(make_grid_pomdp(*spec, pick(seed))?),
            GeneratorSpec::Tree { branching, horizon, gap, leaf, seed } => {
                let leaves = (*branching as u64).checked_pow(*horizon as u32).unwrap_or(u64::MAX);
                let leaf = match leaf {
                    Some(l) => *l,
                    None => (olive_core::seed::StreamSeed::new(pick(seed)).child(olive_core::seed::purpose::ENVIRONMENT).0 % leaves.max(1)) as usize,
                };
                Environment::Tree(olive_core::envs::make_tree_lower_bound(*branching, *horizon, *gap, leaf)?)
            }
            GeneratorSpec::Chain { states, horizon, actions, tau, seed } => {
                check_states(*states)?;
                Environment::Chain(make_bandit_chain(*states, *horizon, *actions, *tau, None, pick(seed))?)
            }
        })
    }
}

/// Where an experiment gets its environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSpec {
    File { file: std::path::PathBuf },
    Generator(GeneratorSpec),
}

impl EnvSpec {
    pub fn resolve(&self, run_seed: u64) -> Result<Environment> {
        match self {
            EnvSpec::File { file } => Environment::load(file),
            EnvSpec::Generator(g) => g.generate(run_seed),
        }
    }
}
