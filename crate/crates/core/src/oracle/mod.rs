//! Exact dynamic-programming oracles.
//!
//! Everything here works on [`ExactDynamics`] and uses reward means, so
//! reward noise never enters. Summation order is fixed, which makes every
//! result bit-reproducible.
//!
//! [`ExactDynamics`]: crate::cdp::ExactDynamics

mod errors;
mod factor;
mod occupancy;
mod rank;
mod validity;

pub use errors::{
    all_error_matrices, bellman_error_from, bellman_error_matrix, exact_bellman_error, latent_residuals, BellmanErrorMatrix,
};
pub use factor::{
    latent_factorization, lowrank_factorization, mdp_factorization, pomdp_factorization, verify_factorization, BellmanFactorization,
    FactorizationReport, Witness, MAX_WITNESSES,
};
pub use occupancy::{
    context_occupancy, exact_value_of_policy, expected_initial_value, latent_occupancy, occupancy, push_forward, reachable_latents,
    ActionRule, Greedy, OccupancyDistribution,
};
pub use rank::{matrix_rank, numerical_bellman_rank, singular_values, ABS_RANK_FLOOR, DEFAULT_REL_TOL};
pub use validity::{optimal_valid_value, policy_loss_residual, theta_valid_set, validity_slack, validity_slacks};
