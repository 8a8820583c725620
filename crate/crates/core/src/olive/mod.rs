//! Optimism-led iterative value-function elimination.
//!
//! [`run_olive`] is the basic loop, [`run_oliver`] the variant tolerant to
//! approximate validity and approximate factorization, and [`run_guess_m`]
//! wraps the loop with a doubling schedule over the unknown rank.
//!
//! In [`Mode::Population`] every Monte-Carlo estimate is replaced by its
//! exact value and no episodes are drawn.

mod estimate;
mod guess;
mod params;
mod run;

pub use estimate::{
    check_termination, choose_optimistic, eliminate, estimate_all_errors, estimate_initial_values, estimate_self_errors,
    exact_all_errors, exact_initial_values, exact_self_errors, importance_weighted_term, self_error_term, Termination,
};
pub use guess::{delta_share, hard_stop, run_guess_m, GuessAttempt, GuessMConfig, GuessMResult, ZetaRule};
pub use params::{compute_parameters, default_max_iterations, effective_epsilon, per_level_iteration_bound, Parameters};
pub use run::{run_olive, run_oliver, FailureReason, IterationRecord, Mode, OliveConfig, OliveResult, Outcome, Overrides};
