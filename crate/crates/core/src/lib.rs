//! Contextual decision processes on tabular substrates, exact Bellman-error
//! oracles, Bellman-rank analysis and the optimism-led value-function
//! elimination family (OLIVE, OLIVER, GuessM).
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the CLI and
//! the experiment harness live in the `olive-lab` companion crate.
//!
//! Module map:
//! - [`cdp`]: contexts, policies, trajectories, the episodic environment
//!   contract, episode sampling and Monte-Carlo evaluation.
//! - [`class`]: finite hypothesis classes of action-value functions and the
//!   (policy, V-value) pair view.
//! - [`envs`]: generators for every decision-process family used in tests
//!   and demos, plus `Q*` and realizable-class construction.
//! - [`oracle`]: exact values, occupancies, average Bellman errors, error
//!   matrices, numerical rank and constructive factorizations.
//! - [`olive`]: the elimination loop, its robust variant, the rank-guessing
//!   wrapper and the parameter formulas.
//! - [`geometry`]: closed-form slab-cut ellipsoids, volume ratios and the
//!   version-space tracker used to audit runs.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod cdp;
pub mod class;
pub mod envs;
mod error;
pub mod geometry;
pub(crate) mod num;
pub mod olive;
pub mod oracle;
pub mod seed;

pub use error::{Error, Result};
