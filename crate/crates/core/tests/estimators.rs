use olive_core::cdp::{sample_episode, sample_episode_with_deviation, ExactDynamics, Policy};
use olive_core::class::Hypothesis;
use olive_core::envs::{make_random_mdp, realizable_class, RewardNoise};
use olive_core::olive::{
    estimate_all_errors, estimate_initial_values, estimate_self_errors, exact_all_errors, exact_initial_values, exact_self_errors,
    importance_weighted_term, self_error_term,
};
use olive_core::class::SurvivingSet;
use olive_core::seed::StreamSeed;
use proptest::prelude::*;

#[test]
fn initial_values_sit_in_the_hoeffding_band() {
    let mdp = make_random_mdp(4, 2, 3, 21).unwrap();
    let class = realizable_class(&mdp, 8, 0.3, 21).unwrap();
    let exact = exact_initial_values(&mdp, &class);
    let (n, delta) = (500usize, 0.01);
    let band = ((2.0 * class.len() as f64 / delta).ln() / (2.0 * n as f64)).sqrt();
    let mut violations = 0;
    for rep in 0..100 {
        let est = estimate_initial_values(&mdp, &class, n, &mut StreamSeed::new(rep).rng()).unwrap();
        if est.iter().zip(&exact).any(|(a, b)| (a - b).abs() > band) {
            violations += 1;
        }
    }
    assert!(violations <= 2, "{violations} violations");
}

#[test]
fn self_errors_sit_in_the_deviation_band() {
    let mdp = make_random_mdp(3, 2, 3, 4).unwrap().with_bernoulli_rewards().unwrap();
    let class = realizable_class(&mdp, 4, 0.3, 4).unwrap();
    let f = &class[1];
    let exact = exact_self_errors(&mdp, f).unwrap();
    let (n, delta) = (400usize, 0.01f64);
    let band = 3.0 * ((2.0 * 3.0 / delta).ln() / (2.0 * n as f64)).sqrt();
    let mut violations = 0;
    for rep in 0..100 {
        let est = estimate_self_errors(&mdp, f, n, &mut StreamSeed::new(rep).rng()).unwrap();
        if est.iter().zip(&exact).any(|(a, b)| (a - b).abs() > band) {
            violations += 1;
        }
    }
    assert!(violations <= 2, "{violations} violations");
}

#[test]
fn importance_weighted_estimator_is_unbiased() {
    let mdp = make_random_mdp(3, 3, 3, 8).unwrap().with_noise(RewardNoise::Bernoulli { scale: 1.0 / 3.0 }).unwrap();
    let class = realizable_class(&mdp, 6, 0.3, 8).unwrap();
    let roll_in = class[2].policy();
    let level = 2;
    let k = ExactDynamics::shape(&mdp).action_count();
    let all = SurvivingSet::full(class.len());
    let exact = exact_all_errors(&mdp, &roll_in, level, &class, &all).unwrap();
    let (reps, n) = (200u64, 2000usize);
    for &(i, target) in &exact {
        let means: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = StreamSeed::new(r).child(i as u64).rng();
                estimate_all_errors(&mdp, &roll_in, level, &class, &SurvivingSet::from_mask((0..class.len()).map(|j| j == i).collect()), n, &mut rng)
                    .unwrap()[0]
                    .1
            })
            .collect();
        let grand = means.iter().sum::<f64>() / reps as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((grand - target).abs() <= 5.0 * se + 1e-12, "member {i}: {grand} vs {target} (se {se})");
    }
    let mut rng = StreamSeed::new(99).rng();
    let mut second = 0.0;
    let draws = 20_000;
    for _ in 0..draws {
        let t = sample_episode_with_deviation(&mdp, &roll_in, level, &mut rng).unwrap();
        let z = importance_weighted_term(&t, level, &class[0], k);
        assert!((-2.0 * k as f64..=k as f64).contains(&z));
        second += z * z;
    }
    assert!(second / draws as f64 <= 4.0 * k as f64);
}

#[test]
fn single_action_weight_is_one() {
    let mdp = make_random_mdp(3, 1, 2, 3).unwrap();
    let class = realizable_class(&mdp, 3, 0.3, 3).unwrap();
    let roll_in = Policy::constant(ExactDynamics::shape(&mdp), 0).unwrap();
    let mut rng = StreamSeed::new(1).rng();
    for _ in 0..50 {
        let t = sample_episode(&mdp, &roll_in, &mut rng).unwrap();
        for f in class.iter() {
            assert_eq!(importance_weighted_term(&t, 1, f, 1), self_error_term(&t, 1, f));
        }
    }
}

#[test]
fn single_start_gives_exact_initial_values() {
    let mut mdp = make_random_mdp(3, 2, 2, 3).unwrap();
    let shape = ExactDynamics::shape(&mdp).clone();
    mdp = olive_core::envs::TabularMDP::new(shape, vec![0.0, 1.0, 0.0], mdp.transitions().to_vec(), mdp.rewards().to_vec(), mdp.noise())
        .unwrap();
    let class = realizable_class(&mdp, 5, 0.3, 1).unwrap();
    let x1 = olive_core::cdp::Context::new(1, 1);
    for n in [1, 2] {
        let est = estimate_initial_values(&mdp, &class, n, &mut StreamSeed::new(0).rng()).unwrap();
        for (f, v) in class.iter().zip(est) {
            assert_eq!(v, f.greedy_value(x1));
        }
    }
    let est = estimate_initial_values(&mdp, &class, 7, &mut StreamSeed::new(0).rng()).unwrap();
    for (f, v) in class.iter().zip(est) {
        assert!((v - f.greedy_value(x1)).abs() <= 4.0 * f64::EPSILON);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampled_episodes_obey_the_reward_budget(seed in 0u64..5000, s in 1usize..5, k in 1usize..4, h in 1usize..5) {
        let mdp = make_random_mdp(s, k, h, seed).unwrap().with_bernoulli_rewards().unwrap();
        let class = realizable_class(&mdp, 3, 0.2, seed).unwrap();
        let mut rng = StreamSeed::new(seed).rng();
        for f in class.iter() {
            let t = sample_episode(&mdp, &f.policy(), &mut rng).unwrap();
            prop_assert!(t.satisfies_invariants(1e-12));
            for level in 1..=h {
                let z = self_error_term(&t, level, f);
                prop_assert!((-2.0..=1.0).contains(&z), "z = {z}");
            }
        }
    }
}
