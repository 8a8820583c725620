//! Hypothesis-class documents and specs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use olive_core::cdp::{ExactDynamics, Shape};
use olive_core::class::{FunctionClass, Hypothesis, QFunction};
use olive_core::envs::{random_class, realizable_class, tree_qstar_class, TreeQ, MAX_CLASS_SIZE};
use serde::{Deserialize, Serialize};

use crate::env::Environment;

/// A class as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassDoc {
    /// Explicit action-value tables.
    Table {
        members: Vec<QFunction>,
        #[serde(default)]
        qstar_index: Option<usize>,
    },
    /// The `K^H` optimal functions of the tree family.
    Tree { branching: usize, horizon: usize, gap: f64 },
}

/// A loaded class, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub enum Class {
    Table(FunctionClass<QFunction>),
    Tree(FunctionClass<TreeQ>),
}

/// Dispatch on the member type of a [`Class`].
#[macro_export]
macro_rules! with_class {
    ($class:expr, $c:ident => $body:expr) => {
        match $class {
            $crate::class::Class::Table($c) => $body,
            $crate::class::Class::Tree($c) => $body,
        }
    };
}

impl Class {
    pub fn len(&self) -> usize {
        with_class!(self, c => c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &Shape {
        with_class!(self, c => c.shape())
    }

    pub fn qstar_index(&self) -> Option<usize> {
        with_class!(self, c => c.qstar_index())
    }

    pub fn to_doc(&self) -> ClassDoc {
        match self {
            Class::Table(c) => ClassDoc::Table { members: c.members().to_vec(), qstar_index: c.qstar_index() },
            Class::Tree(c) => {
                let shape = c.shape();
                ClassDoc::Tree { branching: shape.action_count(), horizon: shape.horizon(), gap: c[0].gap() }
            }
        }
    }
}

impl ClassDoc {
    pub fn into_class(self) -> Result<Class> {
        match self {
            ClassDoc::Table { members, qstar_index } => {
                if members.len() > MAX_CLASS_SIZE {
                    bail!("class has {} members, cap is {}", members.len(), MAX_CLASS_SIZE);
                }
                let members = members
                    .into_iter()
                    .map(|q| {
                        let shape = Shape::new(q.shape().action_count(), q.shape().context_cores().to_vec())?;
                        QFunction::new(shape, q.table().to_vec())
                    })
                    .collect::<olive_core::Result<Vec<_>>>()?;
                let mut class = FunctionClass::new(members)?;
                if let Some(i) = qstar_index {
                    class = class.with_qstar_index(i)?;
                }
                Ok(Class::Table(class))
            }
            ClassDoc::Tree { branching, horizon, gap } => {
                Ok(Class::Tree(tree_qstar_class(branching, horizon, gap, olive_core::envs::DEFAULT_LEAF_CAP)?))
            }
        }
    }

    pub fn load(path: &Path) -> Result<Class> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        ClassDoc::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Class> {
        crate::doc::from_versioned::<ClassDoc>(text)?.into_class()
    }

    pub fn to_json(&self) -> String {
        crate::doc::to_versioned(self)
    }
}

/// Where an experiment gets its class. A missing `seed` is filled in with
/// the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ClassSpec {
    File { file: PathBuf },
    /// `Q*` plus perturbed and random distractors.
    Realizable {
        size: usize,
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Uniform random tables; needs no optimal values.
    Random {
        size: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// The tree family's own class; the environment must be a tree.
    TreeQstar,
}

fn default_scale() -> f64 {
    0.1
}

impl ClassSpec {
    pub fn resolve(&self, env: &Environment, run_seed: u64) -> Result<Class> {
        let check = |n: usize| -> Result<()> {
            if n == 0 || n > MAX_CLASS_SIZE {
                bail!("class size {} outside 1..={}", n, MAX_CLASS_SIZE);
            }
            Ok(())
        };
        let class = match self {
            ClassSpec::File { file } => ClassDoc::load(file)?,
            ClassSpec::Realizable { size, scale, seed } => {
                check(*size)?;
                Class::Table(realizable_class(env.exact(), *size, *scale, seed.unwrap_or(run_seed))?)
            }
            ClassSpec::Random { size, seed } => {
                check(*size)?;
                Class::Table(random_class(env.exact().shape(), *size, seed.unwrap_or(run_seed))?)
            }
            ClassSpec::TreeQstar => match env {
                Environment::Tree(t) => {
                    let shape = ExactDynamics::shape(t);
                    Class::Tree(tree_qstar_class(t.branching(), shape.horizon(), t.gap(), olive_core::envs::DEFAULT_LEAF_CAP)?)
                }
                _ => bail!("tree_qstar needs a tree environment, got {}", env.kind()),
            },
        };
        if class.shape() != env.exact().shape() {
            bail!("class and environment shapes differ");
        }
        Ok(class)
    }
}
