//! Oracle-side reports: ranks, factorizations, reference values, trace
//! audits and the geometry grid.

use anyhow::Result;
use olive_core::class::{FunctionClass, Hypothesis};
use olive_core::envs::optimal_value;
use olive_core::geometry::{
    mvee_slab_cut_unit, sample_slab_ball, slab_cut_ratio_bound, track_version_space, volume_ratio, TrackerAudit, TrackerConfig,
};
use olive_core::olive::OliveResult;
use olive_core::oracle::{
    all_error_matrices, exact_value_of_policy, latent_factorization, lowrank_factorization, matrix_rank, singular_values,
    verify_factorization, BellmanFactorization, Greedy,
};
use olive_core::seed::StreamSeed;
use olive_core::Error;
use serde::{Deserialize, Serialize};

use crate::env::Environment;

/// Constructive factorization for every level, through the low-rank factors
/// when the environment has them and through the latent state otherwise.
pub fn factorizations<F: Hypothesis>(env: &Environment, class: &FunctionClass<F>) -> Result<Vec<BellmanFactorization>> {
    let horizon = env.exact().shape().horizon();
    (1..=horizon)
        .map(|h| match env {
            Environment::LowRank(e) => Ok(lowrank_factorization(e, class, h)?),
            _ => Ok(latent_factorization(env.exact(), class, h)?),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorNorms {
    pub level: usize,
    pub dimension: usize,
    pub max_nu_norm: f64,
    pub max_xi_norm: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rel_tol: f64,
    pub per_level_rank: Vec<usize>,
    pub max_rank: usize,
    /// Descending, one list per level.
    pub singular_values: Vec<Vec<f64>>,
    pub norms: Vec<FactorNorms>,
    /// Worst `|<nu, xi> - E|` per level.
    pub residuals: Vec<f64>,
    pub factorization_ok: bool,
}

pub fn rank_report<F: Hypothesis>(env: &Environment, class: &FunctionClass<F>, rel_tol: f64, tol: f64) -> Result<RankReport> {
    let mats = all_error_matrices(env.exact(), class)?;
    let singular: Vec<Vec<f64>> = mats.iter().map(singular_values).collect();
    let per_level_rank: Vec<usize> = singular.iter().map(|s| matrix_rank(s, rel_tol)).collect();
    let mut norms = Vec::new();
    let mut residuals = Vec::new();
    let mut ok = true;
    for fact in factorizations(env, class)? {
        let report = verify_factorization(env.exact(), class, &fact, tol)?;
        ok &= report.passed;
        norms.push(FactorNorms {
            level: fact.level,
            dimension: fact.dimension,
            max_nu_norm: report.max_nu_norm,
            max_xi_norm: report.max_xi_norm,
            zeta: fact.zeta,
        });
        residuals.push(report.max_residual);
    }
    Ok(RankReport {
        rel_tol,
        max_rank: per_level_rank.iter().copied().max().unwrap_or(0),
        per_level_rank,
        singular_values: singular,
        norms,
        residuals,
        factorization_ok: ok,
    })
}

/// What a returned value is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// `V*` by dynamic programming.
    Optimal,
    /// Best greedy policy of the class; used when `V*` is not defined over
    /// observations.
    ClassBest,
    /// Best greedy value among the members whose validity slack is at most
    /// `theta`.
    ThetaValidBest,
}

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    MonteCarlo,
}

pub fn reference_value<F: Hypothesis>(env: &Environment, class: &FunctionClass<F>) -> Result<(Reference, f64)> {
    match optimal_value(env.exact()) {
        Ok(v) => Ok((Reference::Optimal, v)),
        Err(Error::Unsupported(_)) => {
            let best = class.iter().map(|f| exact_value_of_policy(env.exact(), &Greedy(f))).fold(f64::NEG_INFINITY, f64::max);
            Ok((Reference::ClassBest, best))
        }
        Err(e) => Err(e.into()),
    }
}

/// Replays a population or sampled trace through the exact factorizations.
pub fn trace_audit<F: Hypothesis>(env: &Environment, class: &FunctionClass<F>, result: &OliveResult, m: usize, zeta: f64, theta: f64) -> Result<TrackerAudit> {
    audit_with(&factorizations(env, class)?, result, m, zeta, theta)
}

/// Same as [`trace_audit`] with factorizations supplied by the caller.
pub fn audit_with(facts: &[BellmanFactorization], result: &OliveResult, m: usize, zeta: f64, theta: f64) -> Result<TrackerAudit> {
    let mut config = TrackerConfig::new(m, zeta, result.parameters.phi);
    config.theta = theta;
    Ok(track_version_space(facts, &result.iterations, &config)?)
}

/// Every error matrix in long format: `level,roll_in,evaluated,error`.
pub fn error_matrices_csv<F: Hypothesis>(env: &Environment, class: &FunctionClass<F>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "roll_in", "evaluated", "error"])?;
    for m in all_error_matrices(env.exact(), class)? {
        for i in 0..m.size {
            for j in 0..m.size {
                w.serialize((m.level, i, j, m.get(i, j)))?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryGrid {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    /// `beta` as fractions of `1 / sqrt(d)`.
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    /// Monte-Carlo points per cell for the containment check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_dims() -> Vec<usize> {
    (2..=16).collect()
}

fn default_fractions() -> Vec<f64> {
    vec![0.1, 1.0 / 3.0, 0.5, 0.75, 1.0]
}

fn default_samples() -> usize {
    2000
}

fn default_slack() -> f64 {
    1e-12
}

impl Default for GeometryGrid {
    fn default() -> Self {
        GeometryGrid { dims: default_dims(), fractions: default_fractions(), samples: default_samples(), slack: default_slack() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRow {
    pub d: usize,
    pub beta: f64,
    pub volume_ratio: f64,
    /// Ratio bound for a witness exactly at `3 sqrt(d) tau`.
    pub slab_cut_ratio_bound: f64,
    pub samples: usize,
    pub violations: usize,
}

pub fn geometry_grid(grid: &GeometryGrid, seed: StreamSeed) -> Result<Vec<GeometryRow>> {
    let mut rows = Vec::with_capacity(grid.dims.len() * grid.fractions.len());
    for &d in &grid.dims {
        let df = d as f64;
        let slab_cut_ratio_bound = slab_cut_ratio_bound(3.0 * df.sqrt(), 1.0, d)?;
        for (j, &frac) in grid.fractions.iter().enumerate() {
            let beta = frac / df.sqrt();
            let e = mvee_slab_cut_unit(beta, d)?;
            let mut rng = seed.child2(d as u64, j as u64).rng();
            let violations = (0..grid.samples).filter(|i| !e.contains(&sample_slab_ball(beta, d, i % 2 == 0, &mut rng), grid.slack)).count();
            rows.push(GeometryRow { d, beta, volume_ratio: volume_ratio(beta, d)?, slab_cut_ratio_bound, samples: grid.samples, violations });
        }
    }
    Ok(rows)
}

/// No containment violations, no ratio above one and every witness bound
/// below 0.6.
pub fn geometry_passed(rows: &[GeometryRow]) -> bool {
    rows.iter().all(|r| r.violations == 0 && r.volume_ratio <= 1.0 + 1e-12 && r.slab_cut_ratio_bound < 0.6)
}
