use olive_core::cdp::{Context, ExactDynamics, Policy};
use olive_core::class::{FunctionClass, Hypothesis, QFunction};
use olive_core::envs::{make_low_rank_mdp, make_random_mdp, make_grid_pomdp, make_reactive_pomdp, optimal_value, qstar, random_class, realizable_class, GridSpec, TabularMDP};
use olive_core::oracle::{
    all_error_matrices, exact_bellman_error, exact_value_of_policy, latent_factorization, lowrank_factorization, matrix_rank,
    numerical_bellman_rank, policy_loss_residual, singular_values, verify_factorization, Greedy, DEFAULT_REL_TOL,
};
use proptest::prelude::*;

/// Brute-force `E(f, pi, h)` on a tabular MDP by walking every state path.
fn enumerate_error(mdp: &TabularMDP, f: &QFunction, roll_in: &Policy, level: usize) -> f64 {
    fn walk(mdp: &TabularMDP, f: &QFunction, roll_in: &Policy, level: usize, h: usize, s: usize, p: f64) -> f64 {
        let x = Context::new(s, h);
        if h < level {
            let a = roll_in.action(x);
            return mdp.row(h, s, a).iter().map(|&(t, q)| walk(mdp, f, roll_in, level, h + 1, t, p * q)).sum();
        }
        let a = f.greedy_action(x);
        let mut e = f.value(x, a) - mdp.reward(h, s, a);
        for &(t, q) in mdp.row(h, s, a) {
            e -= q * f.greedy_value(Context::new(t, h + 1));
        }
        p * e
    }
    mdp.initial().iter().enumerate().map(|(s, &p)| walk(mdp, f, roll_in, level, 1, s, p)).sum()
}

fn enumerate_value(mdp: &TabularMDP, policy: &Policy) -> f64 {
    fn walk(mdp: &TabularMDP, policy: &Policy, h: usize, s: usize) -> f64 {
        if h > ExactDynamics::shape(mdp).horizon() {
            return 0.0;
        }
        let a = policy.action(Context::new(s, h));
        mdp.reward(h, s, a) + mdp.row(h, s, a).iter().map(|&(t, q)| q * walk(mdp, policy, h + 1, t)).sum::<f64>()
    }
    mdp.initial().iter().enumerate().map(|(s, &p)| p * walk(mdp, policy, 1, s)).sum()
}

fn dims(seed: u64) -> (usize, usize, usize) {
    (1 + (seed % 5) as usize, 1 + (seed / 5 % 3) as usize, 1 + (seed / 15 % 4) as usize)
}

#[test]
fn oracle_matches_path_enumeration() {
    for seed in 0..40 {
        let (s, k, h) = dims(seed);
        let mdp = make_random_mdp(s, k, h, seed).unwrap();
        let class = realizable_class(&mdp, 6, 0.3, seed).unwrap();
        for f in class.iter() {
            for g in class.iter() {
                let pi = g.policy();
                for level in 1..=h {
                    let a = exact_bellman_error(&mdp, f, &pi, level).unwrap();
                    let b = enumerate_error(&mdp, f, &pi, level);
                    assert!((a - b).abs() < 1e-12, "seed {seed} level {level}: {a} vs {b}");
                }
            }
            let pi = f.policy();
            assert!((exact_value_of_policy(&mdp, &pi) - enumerate_value(&mdp, &pi)).abs() < 1e-12);
        }
    }
}

#[test]
fn optimal_value_dominates_every_deterministic_policy() {
    let mdp = make_random_mdp(2, 2, 3, 11).unwrap();
    let shape = ExactDynamics::shape(&mdp).clone();
    let vstar = optimal_value(&mdp).unwrap();
    let cells = shape.cell_count();
    let mut best: f64 = 0.0;
    for code in 0..(1u32 << cells) {
        let mut bit = 0;
        let p = Policy::from_fn(&shape, |_| {
            let a = ((code >> bit) & 1) as usize;
            bit += 1;
            a
        })
        .unwrap();
        best = best.max(enumerate_value(&mdp, &p));
    }
    assert!((best - vstar).abs() < 1e-12);
}

#[test]
fn qstar_is_valid_everywhere() {
    for seed in 0..30 {
        let (s, k, h) = dims(seed);
        let mdp = make_random_mdp(s, k, h, 1000 + seed).unwrap();
        let class = realizable_class(&mdp, 16, 0.2, seed).unwrap();
        for m in all_error_matrices(&mdp, &class).unwrap() {
            assert!(m.column(0).iter().all(|e| e.abs() <= 1e-10));
        }
    }
}

#[test]
fn pomdp_qstar_is_valid_when_markov() {
    let spec = GridSpec { width: 2, height: 2, observations_per_cell: 3, horizon: 3, slip: 0.2 };
    let pomdp = make_grid_pomdp(spec, 5).unwrap();
    let q = qstar(&pomdp).unwrap();
    let class = realizable_class(&pomdp, 8, 0.2, 2).unwrap();
    for g in class.iter() {
        for level in 1..=3 {
            assert!(exact_bellman_error(&pomdp, &q, &g.policy(), level).unwrap().abs() < 1e-10);
        }
    }
    let mixed = make_reactive_pomdp(3, 6, 2, 3, 5).unwrap();
    assert!(matches!(qstar(&mixed), Err(olive_core::Error::Unsupported(_))));
}

#[test]
fn rank_bounded_by_latent_dimension() {
    for seed in 0..15 {
        let mdp = make_random_mdp(3, 2, 3, seed).unwrap();
        let class = realizable_class(&mdp, 20, 0.3, seed).unwrap();
        assert!(numerical_bellman_rank(&all_error_matrices(&mdp, &class).unwrap(), DEFAULT_REL_TOL) <= 3);
        let pomdp = make_reactive_pomdp(3, 12, 2, 3, seed).unwrap();
        let class = random_class(ExactDynamics::shape(&pomdp), 20, seed).unwrap();
        assert!(numerical_bellman_rank(&all_error_matrices(&pomdp, &class).unwrap(), DEFAULT_REL_TOL) <= 3);
        for m in 1..=3 {
            let env = make_low_rank_mdp(6, 2, 3, m, seed).unwrap();
            let class = realizable_class(&env, 20, 0.3, seed).unwrap();
            let mats = all_error_matrices(&env, &class).unwrap();
            assert!(numerical_bellman_rank(&mats, DEFAULT_REL_TOL) <= m, "seed {seed} m {m}");
            for level in 1..=3 {
                let fact = lowrank_factorization(&env, &class, level).unwrap();
                let report = verify_factorization(&env, &class, &fact, 1e-8).unwrap();
                assert!(report.passed, "{report:?}");
                assert!(fact.dimension <= m);
            }
        }
    }
}

#[test]
fn rank_of_a_generic_class_saturates() {
    let mdp = make_random_mdp(4, 2, 2, 8).unwrap();
    let class = realizable_class(&mdp, 24, 0.5, 8).unwrap();
    let mats = all_error_matrices(&mdp, &class).unwrap();
    let r = matrix_rank(&singular_values(&mats[1]), DEFAULT_REL_TOL);
    assert!((2..=4).contains(&r));
}

#[test]
fn constant_function_on_reward_free_chain() {
    let mdp = make_random_mdp(2, 2, 3, 0).unwrap();
    let zero = TabularMDP::new(
        ExactDynamics::shape(&mdp).clone(),
        mdp.initial().to_vec(),
        mdp.transitions().to_vec(),
        mdp.rewards().iter().map(|r| vec![0.0; r.len()]).collect(),
        mdp.noise(),
    )
    .unwrap();
    let c = QFunction::constant(ExactDynamics::shape(&zero).clone(), 0.4).unwrap();
    let errs: Vec<f64> = (1..=3).map(|h| exact_bellman_error(&zero, &c, &Greedy(&c), h).unwrap()).collect();
    assert!(errs[0].abs() < 1e-15 && errs[1].abs() < 1e-15);
    assert!((errs[2] - 0.4).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn policy_loss_decomposes(seed in 0u64..10_000, s in 1usize..6, k in 1usize..4, h in 1usize..5) {
        let mdp = make_random_mdp(s, k, h, seed).unwrap();
        let class = realizable_class(&mdp, 4, 0.5, seed).unwrap();
        for f in class.iter() {
            prop_assert!(policy_loss_residual(&mdp, f).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn latent_factorization_round_trips(seed in 0u64..10_000, s in 1usize..6, k in 1usize..4, h in 1usize..5) {
        let mdp = make_random_mdp(s, k, h, seed).unwrap();
        let class: FunctionClass<QFunction> = realizable_class(&mdp, 8, 0.3, seed).unwrap();
        for level in 1..=h {
            let fact = latent_factorization(&mdp, &class, level).unwrap();
            let report = verify_factorization(&mdp, &class, &fact, 1e-8).unwrap();
            prop_assert!(report.passed);
            prop_assert!(fact.max_nu_norm() * fact.max_xi_norm() <= 2.0 * (fact.dimension as f64).sqrt() + 1e-12);
        }
    }
}
