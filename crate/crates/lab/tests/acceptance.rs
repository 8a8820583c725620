#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod support;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use olive_core::cdp::{sample_episode_with_deviation, validate_environment, Context, ExactDynamics};
use olive_core::class::{FunctionClass, Hypothesis, QFunction, SurvivingSet};
use olive_core::envs::{
    make_bandit_chain, make_low_rank_mdp, make_random_mdp, make_reactive_pomdp, make_tree_lower_bound, random_class, realizable_class,
    tree_qstar_class, RewardNoise, DEFAULT_LEAF_CAP,
};
use olive_core::geometry::{mvee_slab_cut_unit, slab_cut_ratio_bound, volume_ratio};
use olive_core::olive::{
    delta_share, estimate_all_errors, importance_weighted_term, run_guess_m, run_olive, run_oliver, GuessMConfig, OliveConfig, Overrides,
};
use olive_core::oracle::{
    all_error_matrices, exact_bellman_error, numerical_bellman_rank, optimal_valid_value, policy_loss_residual,
    theta_valid_set, validity_slack, DEFAULT_REL_TOL,
};
use olive_core::seed::StreamSeed;
use olive_lab::analysis::factorizations;
use olive_lab::env::Environment;
use olive_lab::experiment::{run_batch, summarize, to_json, write_outputs, ExperimentConfig};
use rand::Rng;
use rand_distr::StandardNormal;
use support::{backward_q, dims, enumerate_error, enumerate_value, optimal_value, predicted_value};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn validity_of_qstar() -> Check {
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let (s, k, h) = dims(i);
        let mdp = ok(make_random_mdp(s, k, h, 7000 + i))?;
        let class = ok(realizable_class(&mdp, 16, 0.3, i))?;
        let q = backward_q(&mdp);
        let qstar = &class[0];
        for level in 1..=h {
            for st in 0..s {
                for a in 0..k {
                    let d = (qstar.value(Context::new(st, level), a) - q[level - 1][st][a]).abs();
                    ensure!(d <= 1e-12, "instance {i}: class member 0 is not Q* ({d})");
                }
            }
        }
        for g in class.iter() {
            let pi = g.policy();
            for level in 1..=h {
                let a = enumerate_error(&mdp, qstar, &pi, level);
                let b = ok(exact_bellman_error(&mdp, qstar, &pi, level))?;
                worst = worst.max(a.abs()).max(b.abs());
            }
        }
    }
    ensure!(worst <= 1e-10, "max |E(Q*, pi, h)| = {worst:e}");
    Ok(format!("max |E| = {worst:.1e} over 50 MDPs x 16 roll-ins"))
}

fn policy_loss_decomposition() -> Check {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let (s, k, h) = dims(i * 7 + 1);
        let mdp = ok(make_random_mdp(s, k, h, 9000 + i))?;
        let class = if i % 2 == 0 { ok(realizable_class(&mdp, 4, 0.5, i))? } else { ok(random_class(ExactDynamics::shape(&mdp), 4, i))? };
        let f = &class[1 + (i as usize % 3)];
        let pi = f.policy();
        let errors: f64 = (1..=h).map(|level| enumerate_error(&mdp, f, &pi, level)).sum();
        let independent = predicted_value(&mdp, f) - enumerate_value(&mdp, &pi) - errors;
        let library = ok(policy_loss_residual(&mdp, f))?;
        worst = worst.max(independent.abs()).max(library.abs());
    }
    ensure!(worst <= 1e-10, "max residual {worst:e}");
    Ok(format!("max residual {worst:.1e} over 100 pairs"))
}

struct RankInstance {
    label: String,
    env: Environment,
    class: FunctionClass<QFunction>,
    bound: usize,
}

fn rank_instances() -> Result<Vec<RankInstance>, String> {
    let mut out = Vec::new();
    for seed in 0..50u64 {
        let s = 2 + (seed % 4) as usize;
        let mdp = ok(make_random_mdp(s, 2, 3, 500 + seed))?;
        let class = ok(realizable_class(&mdp, 20, 0.3, seed))?;
        out.push(RankInstance { label: format!("tabular S={s} seed {seed}"), env: Environment::Tabular(mdp), class, bound: s });
        for m in 1..=3 {
            let lr = ok(make_low_rank_mdp(6, 2, 3, m, 600 + seed))?;
            let class = ok(realizable_class(&lr, 20, 0.3, seed))?;
            out.push(RankInstance { label: format!("low-rank M={m} seed {seed}"), env: Environment::LowRank(lr), class, bound: m });
        }
        let pomdp = ok(make_reactive_pomdp(3, 12, 2, 3, 700 + seed))?;
        let class = ok(random_class(ExactDynamics::shape(&pomdp), 20, seed))?;
        out.push(RankInstance { label: format!("pomdp seed {seed}"), env: Environment::Pomdp(pomdp), class, bound: 3 });
    }
    Ok(out)
}

fn rank_bounds() -> Check {
    let mut counts = BTreeMap::new();
    for inst in rank_instances()? {
        let mats = ok(all_error_matrices(inst.env.exact(), &inst.class))?;
        let rank = numerical_bellman_rank(&mats, DEFAULT_REL_TOL);
        ensure!(rank <= inst.bound, "{}: rank {} exceeds {}", inst.label, rank, inst.bound);
        *counts.entry(inst.env.kind()).or_insert(0) += 1;
    }
    Ok(format!("all within bound: {counts:?}"))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn factorization_round_trip() -> Check {
    let mut worst = 0.0f64;
    let mut worst_norm_ratio = 0.0f64;
    for inst in rank_instances()? {
        let mats = ok(all_error_matrices(inst.env.exact(), &inst.class))?;
        for fact in ok(factorizations(&inst.env, &inst.class))? {
            let n = inst.class.len();
            for i in 0..n {
                let pi = inst.class[i].policy();
                for j in 0..n {
                    let inner: f64 = fact.nu[i].iter().zip(&fact.xi[j]).map(|(a, b)| a * b).sum();
                    let exact = match &inst.env {
                        Environment::Tabular(m) => enumerate_error(m, &inst.class[j], &pi, fact.level),
                        Environment::LowRank(m) => enumerate_error(m.mdp(), &inst.class[j], &pi, fact.level),
                        _ => mats[fact.level - 1].get(i, j),
                    };
                    worst = worst.max((inner - exact).abs());
                }
            }
            let nu = fact.nu.iter().map(|v| norm(v)).fold(0.0, f64::max);
            let xi = fact.xi.iter().map(|v| norm(v)).fold(0.0, f64::max);
            let cap = 2.0 * (fact.dimension as f64).sqrt();
            ensure!(nu * xi <= cap + 1e-12, "{} level {}: norm product {} > {}", inst.label, fact.level, nu * xi, cap);
            worst_norm_ratio = worst_norm_ratio.max(nu * xi / cap);
        }
    }
    ensure!(worst <= 1e-8, "max factorization residual {worst:e}");
    Ok(format!("max residual {worst:.1e}, max norm product / 2 sqrt(M) = {worst_norm_ratio:.3}"))
}

fn population_olive() -> Check {
    let eps = 0.05;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_count_ratio = 0.0f64;
    for i in 0..20u64 {
        let (s, k, h) = dims(i * 3);
        let mdp = ok(make_random_mdp(s, k, h, 7000 + i * 3))?;
        let class = ok(realizable_class(&mdp, 16, 0.3, i))?;
        let m = s;
        let zeta = 2.0 * (m as f64).sqrt();
        let result = ok(run_olive(&mdp, &class, &OliveConfig::new(eps, 0.1, m, zeta).population(), StreamSeed::new(i)))?;
        let policy = result.policy().ok_or_else(|| format!("instance {i} failed: {:?}", result.outcome))?;
        let gap = optimal_value(&mdp) - enumerate_value(&mdp, policy);
        ensure!(gap <= eps, "instance {i}: suboptimality {gap}");
        worst_gap = worst_gap.max(gap);
        let phi = eps / (12.0 * h as f64 * (m as f64).sqrt());
        ensure!((result.parameters.phi - phi).abs() <= 1e-15, "instance {i}: phi {} vs {}", result.parameters.phi, phi);
        let bound = m as f64 * (zeta / (2.0 * phi)).ln() / (5.0f64 / 3.0).ln();
        for level in 1..=h {
            let c = result.level_count(level) as f64;
            ensure!(c <= bound, "instance {i} level {level}: {c} iterations > {bound}");
            worst_count_ratio = worst_count_ratio.max(c / bound);
        }
    }
    Ok(format!("20/20 eps-optimal, worst suboptimality {worst_gap:.2e}, worst level count / bound {worst_count_ratio:.3}"))
}

fn estimator_fidelity() -> Check {
    let mdp = ok(ok(make_random_mdp(3, 3, 3, 8))?.with_noise(RewardNoise::Bernoulli { scale: 1.0 / 3.0 }))?;
    let class = ok(realizable_class(&mdp, 6, 0.3, 8))?;
    let (k, level, member) = (3usize, 2usize, 3usize);
    let roll_in = class[1].policy();
    let exact = enumerate_error(&mdp, &class[member], &roll_in, level);
    let only = SurvivingSet::from_mask((0..class.len()).map(|j| j == member).collect());
    let (reps, n) = (200u64, 10_000usize);
    let means: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = StreamSeed::new(r).child(1).rng();
            estimate_all_errors(&mdp, &roll_in, level, &class, &only, n, &mut rng).map(|v| v[0].1)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let grand = means.iter().sum::<f64>() / reps as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    ensure!((grand - exact).abs() <= 5.0 * se, "grand mean {grand} vs exact {exact}, se {se}");

    let (mut lo, mut hi, mut second) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for r in 0..reps {
        let mut rng = StreamSeed::new(r).child(2).rng();
        for _ in 0..n {
            let t = ok(sample_episode_with_deviation(&mdp, &roll_in, level, &mut rng))?;
            let z = importance_weighted_term(&t, level, &class[member], k);
            lo = lo.min(z);
            hi = hi.max(z);
            second += z * z;
        }
    }
    let second = second / (reps as f64 * n as f64);
    let kf = k as f64;
    ensure!(lo >= -2.0 * kf && hi <= kf, "sample range [{lo}, {hi}] outside [-2K, K]");
    ensure!(second <= 4.0 * kf * 1.1, "second moment {second} > 4K(1.1)");
    Ok(format!(
        "|mean - exact| = {:.2e} ({:.2} se), range [{lo:.3}, {hi:.3}], second moment {second:.3}",
        (grand - exact).abs(),
        (grand - exact).abs() / se
    ))
}

fn sampled_olive() -> Check {
    let mdp = ok(make_random_mdp(3, 2, 2, 7))?;
    let class = ok(realizable_class(&mdp, 8, 0.3, 7))?;
    let vstar = optimal_value(&mdp);
    let mut config = OliveConfig::new(0.2, 0.1, 3, 2.0 * 3f64.sqrt());
    config.overrides = Overrides { phi: None, n_est: Some(2000), n_eval: Some(2000), n: Some(20_000) };
    let mut wins = 0;
    for seed in 0..20 {
        let result = ok(run_olive(&mdp, &class, &config, StreamSeed::new(seed)))?;
        if let Some(p) = result.policy() {
            if enumerate_value(&mdp, p) >= vstar - 0.2 {
                wins += 1;
            }
        }
    }
    ensure!(wins >= 16, "only {wins}/20 seeds succeeded");
    Ok(format!("{wins}/20 seeds eps-optimal"))
}

fn perturbed(q: &QFunction, rng: &mut olive_core::seed::SimRng, size: f64) -> QFunction {
    QFunction::from_fn(q.shape().clone(), |x, a| (q.value(x, a) + rng.random_range(-size..size)).clamp(0.0, 1.0)).expect("clamped")
}

fn oliver_robustness() -> Check {
    let eps = 0.1;
    let mut worst_margin = f64::INFINITY;
    for i in 0..10u64 {
        let mdp = ok(make_random_mdp(3, 2, 3, 300 + i))?;
        let base = ok(realizable_class(&mdp, 8, 0.3, i))?;
        let mut rng = StreamSeed::new(i).child(77).rng();
        let mut members = base.members().to_vec();
        members[0] = perturbed(&members[0], &mut rng, 0.02);
        let class = ok(FunctionClass::new(members))?;
        let theta = ok(validity_slack(&mdp, &class, 0))?;
        ensure!(theta > 0.0, "instance {i}: perturbation left member 0 exactly valid");
        let valid = ok(theta_valid_set(&mdp, &class, theta))?;
        ensure!(valid.contains(0), "instance {i}: member 0 not in its own theta-valid set");
        let (_, vtheta) = ok(optimal_valid_value(&mdp, &class, theta))?;
        let independent = valid.indices().map(|j| enumerate_value(&mdp, &class[j].policy())).fold(f64::NEG_INFINITY, f64::max);
        ensure!((vtheta - independent).abs() <= 1e-12, "instance {i}: v*_theta {vtheta} vs {independent}");
        let (m, h) = (3usize, 3usize);
        let mut config = OliveConfig::new(eps, 0.1, m, 2.0 * (m as f64).sqrt()).population();
        config.theta = theta;
        let result = ok(run_oliver(&mdp, &class, &config, StreamSeed::new(i)))?;
        let policy = result.policy().ok_or_else(|| format!("instance {i}: OLIVER failed: {:?}", result.outcome))?;
        let value = enumerate_value(&mdp, policy);
        let floor = vtheta - eps - 8.0 * h as f64 * (m as f64).sqrt() * theta;
        ensure!(value >= floor, "instance {i}: value {value} < {floor}");
        worst_margin = worst_margin.min(value - floor);

        let plain = OliveConfig::new(eps, 0.1, m, 2.0 * (m as f64).sqrt());
        for cfg in [plain.clone().population(), {
            let mut c = plain.clone();
            c.overrides = Overrides { phi: None, n_est: Some(200), n_eval: Some(200), n: Some(500) };
            c
        }] {
            let a = ok(run_olive(&mdp, &base, &cfg, StreamSeed::new(i)))?;
            let b = ok(run_oliver(&mdp, &base, &cfg, StreamSeed::new(i)))?;
            ensure!(to_json(&a) == to_json(&b), "instance {i}: theta = 0 trace differs from OLIVE ({:?} mode)", cfg.mode);
        }
    }
    Ok(format!("10/10 within the robust bound (smallest margin {worst_margin:.3}); theta = 0 traces identical"))
}

fn guess_m() -> Check {
    let eps = 0.1;
    let mut largest = Vec::new();
    for i in 0..10u64 {
        let m = [2usize, 3, 5][i as usize % 3];
        let env = ok(make_low_rank_mdp(6, 2, 3, m, 400 + i))?;
        let class = ok(realizable_class(&env, 16, 0.3, i))?;
        let mut config = GuessMConfig::new(eps, 0.1);
        config.mode = olive_core::olive::Mode::Population;
        let result = ok(run_guess_m(&env, &class, &config, StreamSeed::new(i)))?;
        let policy = result.final_result().policy().ok_or_else(|| format!("instance {i} (M={m}) returned no policy"))?;
        let gap = optimal_value(env.mdp()) - enumerate_value(env.mdp(), policy);
        ensure!(gap <= eps, "instance {i} (M={m}): suboptimality {gap}");
        ensure!(result.largest_guess() <= 2 * m, "instance {i}: guessed {} > 2M = {}", result.largest_guess(), 2 * m);
        let spent: f64 = result.attempts.iter().map(|a| a.delta).sum();
        let calls = result.attempts.len() as f64;
        ensure!((spent - 0.1 * (1.0 - 1.0 / (calls + 1.0))).abs() <= 1e-15, "instance {i}: attempts spent {spent} of delta");
        largest.push((m, result.largest_guess()));
    }
    let delta = 0.05;
    let mut partial = 0.0;
    for i in 1..=1_000_000u32 {
        partial += delta_share(delta, i);
    }
    let tail = delta / 1_000_001.0;
    ensure!((partial + tail - delta).abs() <= 1e-12, "delta split sums to {} (+ tail {tail})", partial);
    Ok(format!("10/10 eps-optimal; (true M, largest guess) = {largest:?}; split sums to delta"))
}

fn geometry() -> Check {
    for d in 2..=64usize {
        let df = d as f64;
        let r = ok(volume_ratio(1.0 / df.sqrt(), d))?;
        ensure!((r - 1.0).abs() <= 1e-12, "d={d}: ratio at 1/sqrt(d) is {r}");
        let b = ok(slab_cut_ratio_bound(3.0 * df.sqrt(), 1.0, d))?;
        ensure!(b < 0.6, "d={d}: bound {b}");
    }
    let beta = 1.0 / (3.0 * 2f64.sqrt());
    // sqrt(d) beta (d / (d - 1))^((d - 1) / 2) (1 - beta^2)^((d - 1) / 2) at d = 2
    let closed = 2f64.sqrt() * beta * 2f64.sqrt() * (1.0 - beta * beta).sqrt();
    let rho = 2.0 * (1.0 - beta * beta);
    let sigma = (1.0 - 2.0 * beta * beta) / (1.0 - beta * beta);
    let via_det = (rho * rho * (1.0 - sigma)).sqrt();
    let lib = ok(slab_cut_ratio_bound(3.0 * 2f64.sqrt(), 1.0, 2))?;
    ensure!((lib - closed).abs() <= 1e-9 && (lib - via_det).abs() <= 1e-9, "d=2: {lib} vs {closed} / {via_det}");
    ensure!((lib - 0.458123).abs() <= 1e-6, "d=2 value {lib}");

    let mut rng = StreamSeed::new(10).rng();
    let mut checked = 0usize;
    for d in 1..=10usize {
        for frac in [0.05, 0.3, 0.6, 0.9, 1.0] {
            let beta = frac / (d as f64).sqrt();
            let e = ok(mvee_slab_cut_unit(beta, d))?;
            let mut pts = 0;
            while pts < 2000 {
                let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&g);
                let radius = if d > 1 && pts % 2 == 0 { 1.0 } else { rng.random::<f64>().powf(1.0 / d as f64) };
                let w: Vec<f64> = g.iter().map(|x| x / n * radius).collect();
                if w[0].abs() > beta {
                    continue;
                }
                pts += 1;
                ensure!(e.contains(&w, 1e-12), "d={d} beta={beta}: point outside the MVEE");
            }
            let mut corner = vec![0.0; d];
            corner[0] = beta;
            if d > 1 {
                corner[1] = (1.0 - beta * beta).sqrt();
            }
            ensure!(e.contains(&corner, 1e-12), "d={d} beta={beta}: rim point outside");
            checked += pts + 1;
        }
    }
    Ok(format!("d=2 bound {lib:.9}; {checked} containment samples, 0 violations"))
}

fn lower_bound_envs() -> Check {
    for (k, h) in [(2usize, 1usize), (2, 3), (3, 2), (4, 3), (2, 6)] {
        let leaves = k.pow(h as u32);
        let env = ok(make_tree_lower_bound(k, h, 0.25, leaves - 1))?;
        ensure!(validate_environment(&env).is_valid(), "tree K={k} H={h} fails validation");
        let class = ok(tree_qstar_class(k, h, 0.25, DEFAULT_LEAF_CAP))?;
        ensure!(class.len() == leaves, "tree K={k} H={h}: class size {} != {leaves}", class.len());
    }
    let mut worst = 0.0f64;
    for (m, h, k, tau) in [(4usize, 2usize, 2usize, 0.25), (6, 4, 3, 0.1), (8, 5, 2, 0.3), (5, 3, 4, 0.2)] {
        let env = ok(make_bandit_chain(m, h, k, tau, None, 11))?;
        ensure!(validate_environment(&env).is_valid(), "chain M={m} H={h} fails validation");
        let dp = optimal_value(env.mdp());
        let lib = ok(olive_core::envs::optimal_value(&env))?;
        let closed = env.optimal_value_closed_form();
        worst = worst.max((dp - closed).abs()).max((lib - closed).abs());
    }
    ensure!(worst <= 1e-10, "chain V* mismatch {worst:e}");
    Ok(format!("trees and chains validate; chain |DP - closed form| <= {worst:.1e}"))
}

fn reproducibility_configs() -> Vec<&'static str> {
    vec![
        r#"{"kind":"olive","env":{"generator":"mdp","states":3,"actions":2,"horizon":3},"class":{"class":"realizable","size":12},
            "algorithm":{"epsilon":0.05,"mode":"population","audit":true},"seeds":[1,2,3,4,5,6]}"#,
        r#"{"kind":"olive","env":{"generator":"mdp","states":3,"actions":2,"horizon":2,"seed":7},"class":{"class":"realizable","size":8,"seed":7},
            "algorithm":{"epsilon":0.2,"m":3,"overrides":{"n_est":500,"n_eval":500,"n":2000}},"seeds":[0,1,2,3]}"#,
        r#"{"kind":"oliver","env":{"generator":"mdp","states":3,"actions":2,"horizon":2},"class":{"class":"random","size":8},
            "algorithm":{"epsilon":0.1,"theta":0.05,"mode":"population"},"seeds":[3,4]}"#,
        r#"{"kind":"guessm","env":{"generator":"low_rank","states":6,"actions":2,"horizon":3,"rank":2},"class":{"class":"realizable","size":8},
            "algorithm":{"epsilon":0.1,"mode":"population"},"seeds":[1,2,3]}"#,
        r#"{"kind":"rank","env":{"generator":"pomdp","hidden":3,"observations":12,"actions":2,"horizon":3},"class":{"class":"random","size":10},
            "seeds":[1,2]}"#,
        r#"{"kind":"geometry","algorithm":{"geometry":{"dims":[2,5,9],"samples":300}},"seeds":[1,2]}"#,
        r#"{"kind":"lowerbound-demo","algorithm":{"lowerbound":{"baseline_episodes":200}},"seeds":[1,2]}"#,
    ]
}

fn read_dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in ok(fs::read_dir(dir))? {
        let entry = ok(entry)?;
        out.insert(entry.file_name().to_string_lossy().into_owned(), ok(fs::read(entry.path()))?);
    }
    Ok(out)
}

fn reproducibility() -> Check {
    let tmp = ok(tempfile::tempdir())?;
    let mut files = 0;
    for (i, text) in reproducibility_configs().into_iter().enumerate() {
        let config = ok(ExperimentConfig::from_json(text))?;
        let mut snapshots = Vec::new();
        for (j, threads) in [None, Some(1), Some(4), None].into_iter().enumerate() {
            let runs = ok(run_batch(&config, threads))?;
            let summary = summarize(&config, &runs);
            let dir = tmp.path().join(format!("{i}-{j}"));
            ok(write_outputs(&dir, &runs, &summary))?;
            snapshots.push(read_dir_bytes(&dir)?);
        }
        for s in &snapshots[1..] {
            ensure!(s == &snapshots[0], "config {i} ({:?}): artifacts differ between runs", config.kind);
        }
        files += snapshots[0].len();
    }
    Ok(format!("7 configs x 4 runs (default, 1 and 4 threads), {files} artifacts byte-identical"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "validity of Q*", limit: Some(Duration::from_secs(30)), run: validity_of_qstar },
    Criterion { id: 2, name: "policy-loss decomposition", limit: Some(Duration::from_secs(30)), run: policy_loss_decomposition },
    Criterion { id: 3, name: "rank bounds", limit: Some(Duration::from_secs(300)), run: rank_bounds },
    Criterion { id: 4, name: "factorization round trip", limit: None, run: factorization_round_trip },
    Criterion { id: 5, name: "population-mode OLIVE", limit: Some(Duration::from_secs(300)), run: population_olive },
    Criterion { id: 6, name: "sampled estimator fidelity", limit: Some(Duration::from_secs(120)), run: estimator_fidelity },
    Criterion { id: 7, name: "desk-scale sampled OLIVE", limit: Some(Duration::from_secs(180)), run: sampled_olive },
    Criterion { id: 8, name: "OLIVER robustness", limit: None, run: oliver_robustness },
    Criterion { id: 9, name: "GuessM", limit: None, run: guess_m },
    Criterion { id: 10, name: "geometry", limit: None, run: geometry },
    Criterion { id: 11, name: "lower-bound environments", limit: None, run: lower_bound_envs },
    Criterion { id: 12, name: "reproducibility", limit: None, run: reproducibility },
];

fn main() -> ExitCode {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs())),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} {} [{:.2}s]: {}", c.id, c.name, elapsed.as_secs_f64(), detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
