//! Config-driven batch runner.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use olive_core::class::{FunctionClass, Hypothesis};
use olive_core::geometry::TrackerAudit;
use olive_core::olive::{run_guess_m, run_olive, run_oliver, GuessMConfig, GuessMResult, Mode, OliveConfig, OliveResult, Overrides, ZetaRule};
use olive_core::oracle::{exact_value_of_policy, optimal_valid_value, DEFAULT_REL_TOL};
use olive_core::seed::StreamSeed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{geometry_grid, geometry_passed, rank_report, reference_value, trace_audit, GeometryGrid, GeometryRow, Provenance, RankReport, Reference};
use crate::class::{Class, ClassSpec};
use crate::env::{EnvSpec, Environment};
use crate::lowerbound::{lowerbound_demo, LowerBoundReport, LowerBoundSpec};
use crate::with_class;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Olive,
    Oliver,
    Guessm,
    Rank,
    Geometry,
    LowerboundDemo,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Olive => "olive",
            ExperimentKind::Oliver => "oliver",
            ExperimentKind::Guessm => "guessm",
            ExperimentKind::Rank => "rank",
            ExperimentKind::Geometry => "geometry",
            ExperimentKind::LowerboundDemo => "lowerbound-demo",
        }
    }

    fn needs_env(self) -> bool {
        !matches!(self, ExperimentKind::Geometry | ExperimentKind::LowerboundDemo)
    }
}

/// Knobs shared by the experiment kinds. Each kind reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Rank input; defaults to the environment's factorization dimension.
    #[serde(default)]
    pub m: Option<usize>,
    /// Defaults to `2 sqrt(M)`.
    #[serde(default)]
    pub zeta: Option<f64>,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub theta_m: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub max_episodes: Option<u64>,
    #[serde(default)]
    pub zeta_rule: ZetaRule,
    #[serde(default)]
    pub max_exponent: Option<u32>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Tolerance for factorization round trips.
    #[serde(default = "default_factor_tol")]
    pub factor_tol: f64,
    /// Replay OLIVE traces through the ellipsoid tracker.
    #[serde(default)]
    pub audit: bool,
    #[serde(default)]
    pub geometry: GeometryGrid,
    #[serde(default)]
    pub lowerbound: LowerBoundSpec,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    0.1
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

fn default_factor_tol() -> f64 {
    1e-8
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub env: Option<EnvSpec>,
    #[serde(default)]
    pub class: Option<ClassSpec>,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Series name in plot data; defaults to the kind.
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn config_error(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.to_string(), message: message.into() }
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_error("seeds", "seeds must be distinct"));
        }
        if self.kind.needs_env() && self.env.is_none() {
            return Err(config_error("env", format!("required for kind {}", self.kind.name())));
        }
        if let Some(EnvSpec::File { file }) = &self.env {
            if !file.is_file() {
                return Err(config_error("env.file", format!("{} does not exist", file.display())));
            }
        }
        match &self.class {
            None if self.kind.needs_env() => return Err(config_error("class", format!("required for kind {}", self.kind.name()))),
            Some(ClassSpec::File { file }) if !file.is_file() => {
                return Err(config_error("class.file", format!("{} does not exist", file.display())));
            }
            Some(ClassSpec::Realizable { size: 0, .. } | ClassSpec::Random { size: 0, .. }) => {
                return Err(config_error("class.size", "must be at least 1"));
            }
            _ => {}
        }
        let a = &self.algorithm;
        for (path, v) in [("algorithm.epsilon", a.epsilon), ("algorithm.delta", a.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config_error(path, format!("{} must lie in (0, 1)", v)));
            }
        }
        if a.m == Some(0) {
            return Err(config_error("algorithm.m", "must be at least 1"));
        }
        if let Some(z) = a.zeta {
            if !(z > 0.0) {
                return Err(config_error("algorithm.zeta", format!("{} must be positive", z)));
            }
        }
        for (path, v) in [("algorithm.theta", a.theta), ("algorithm.theta_m", a.theta_m)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_error(path, format!("{} must lie in [0, 1]", v)));
            }
        }
        if !(a.rel_tol > 0.0 && a.rel_tol < 1.0) {
            return Err(config_error("algorithm.rel_tol", format!("{} must lie in (0, 1)", a.rel_tol)));
        }
        if !(a.factor_tol >= 0.0) {
            return Err(config_error("algorithm.factor_tol", "must be nonnegative"));
        }
        if a.max_exponent == Some(0) {
            return Err(config_error("algorithm.max_exponent", "must be at least 1"));
        }
        if a.geometry.dims.contains(&0) {
            return Err(config_error("algorithm.geometry.dims", "dimensions must be at least 1"));
        }
        if a.geometry.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(config_error("algorithm.geometry.fractions", "fractions must lie in (0, 1]"));
        }
        Ok(())
    }

    fn olive_config(&self, env: &Environment) -> OliveConfig {
        let a = &self.algorithm;
        let m = a.m.unwrap_or_else(|| env.factor_dimension());
        let mut c = OliveConfig::new(a.epsilon, a.delta, m, a.zeta.unwrap_or(2.0 * (m as f64).sqrt()));
        c.theta = a.theta;
        c.theta_m = a.theta_m;
        c.mode = a.mode;
        c.overrides = a.overrides;
        c.max_iterations = a.max_iterations;
        c.max_episodes = a.max_episodes;
        c
    }

    fn guess_config(&self) -> GuessMConfig {
        let a = &self.algorithm;
        let mut c = GuessMConfig::new(a.epsilon, a.delta);
        c.zeta_rule = a.zeta_rule;
        c.mode = a.mode;
        c.max_episodes = a.max_episodes;
        if let Some(e) = a.max_exponent {
            c.max_exponent = e;
        }
        c
    }
}

/// Headline numbers for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub success: bool,
    /// Set when the pipeline itself errored for this seed.
    pub error: Option<String>,
    pub env_fingerprint: Option<String>,
    pub class_size: Option<usize>,
    /// Rank input given to the algorithm, or the largest guess for GuessM.
    pub m: Option<usize>,
    pub value: Option<f64>,
    pub reference: Option<Reference>,
    pub reference_value: Option<f64>,
    pub suboptimality: Option<f64>,
    /// Allowed suboptimality under the run's guarantee.
    pub allowed_gap: Option<f64>,
    pub within_guarantee: Option<bool>,
    pub provenance: Option<Provenance>,
    pub episodes: u64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Vec<GeometryRow>>,
}

impl SeedOutcome {
    fn empty(seed: u64) -> Self {
        SeedOutcome {
            seed,
            success: false,
            error: None,
            env_fingerprint: None,
            class_size: None,
            m: None,
            value: None,
            reference: None,
            reference_value: None,
            suboptimality: None,
            allowed_gap: None,
            within_guarantee: None,
            provenance: None,
            episodes: 0,
            iterations: 0,
            max_rank: None,
            geometry: None,
        }
    }
}

/// Full per-seed result, written to `seed-<n>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeedDetail {
    Olive { result: OliveResult, audit: Option<TrackerAudit> },
    Oliver { result: OliveResult, audit: Option<TrackerAudit> },
    Guessm { result: GuessMResult },
    Rank { report: RankReport },
    Geometry { rows: Vec<GeometryRow> },
    LowerboundDemo { report: LowerBoundReport },
    Error,
}

impl SeedDetail {
    /// The trace written to the iteration CSV, if any. GuessM contributes
    /// its final call.
    pub fn trace(&self) -> Option<&OliveResult> {
        match self {
            SeedDetail::Olive { result, .. } | SeedDetail::Oliver { result, .. } => Some(result),
            SeedDetail::Guessm { result } => Some(result.final_result()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub outcome: SeedOutcome,
    pub detail: SeedDetail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Aggregate> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        Some(Aggregate {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub seeds: usize,
    pub successes: usize,
    pub suboptimality: Option<Aggregate>,
    pub episodes: Option<Aggregate>,
    pub iterations: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool_version: String,
    pub label: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedOutcome>,
    pub aggregates: Aggregates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rank: Option<usize>,
}

impl RunSummary {
    pub fn all_succeeded(&self) -> bool {
        self.seeds.iter().all(|s| s.success)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_succeeded() {
            0
        } else {
            1
        }
    }
}

fn fill_value(out: &mut SeedOutcome, env: &Environment, result: &OliveResult, reference: (Reference, f64), gap: f64) {
    out.episodes = result.total_episodes;
    out.iterations = result.iterations.len();
    out.success = result.succeeded();
    out.reference = Some(reference.0);
    out.reference_value = Some(reference.1);
    out.allowed_gap = Some(gap);
    out.provenance = Some(Provenance::Exact);
    if let Some(p) = result.policy() {
        let v = exact_value_of_policy(env.exact(), p);
        out.value = Some(v);
        out.suboptimality = Some(reference.1 - v);
        out.within_guarantee = Some(reference.1 - v <= gap);
    }
}

fn run_with_class<F: Hypothesis>(config: &ExperimentConfig, env: &Environment, class: &FunctionClass<F>, out: &mut SeedOutcome) -> Result<SeedDetail> {
    let seed = StreamSeed::new(out.seed);
    let a = &config.algorithm;
    out.class_size = Some(class.len());
    match config.kind {
        ExperimentKind::Olive | ExperimentKind::Oliver => {
            let oc = config.olive_config(env);
            out.m = Some(oc.m);
            let (result, reference, gap) = if config.kind == ExperimentKind::Olive {
                (run_olive(env, class, &oc, seed)?, reference_value(env, class)?, a.epsilon)
            } else {
                let (_, best) = optimal_valid_value(env.exact(), class, oc.theta)?;
                let h = env.exact().shape().horizon() as f64;
                let gap = oc.epsilon + 8.0 * h * (oc.m as f64).sqrt() * (oc.theta + oc.theta_m);
                (run_oliver(env, class, &oc, seed)?, (Reference::ThetaValidBest, best), gap)
            };
            fill_value(out, env, &result, reference, gap);
            let audit = if a.audit { Some(trace_audit(env, class, &result, oc.m, oc.zeta, oc.theta + oc.theta_m)?) } else { None };
            if let Some(au) = &audit {
                out.success &= au.passed();
            }
            Ok(if config.kind == ExperimentKind::Olive { SeedDetail::Olive { result, audit } } else { SeedDetail::Oliver { result, audit } })
        }
        ExperimentKind::Guessm => {
            let result = run_guess_m(env, class, &config.guess_config(), seed)?;
            fill_value(out, env, result.final_result(), reference_value(env, class)?, a.epsilon);
            out.m = Some(result.largest_guess());
            out.episodes = result.total_episodes;
            out.iterations = result.attempts.iter().map(|t| t.result.iterations.len()).sum();
            Ok(SeedDetail::Guessm { result })
        }
        ExperimentKind::Rank => {
            let report = rank_report(env, class, a.rel_tol, a.factor_tol)?;
            out.success = report.factorization_ok;
            out.max_rank = Some(report.max_rank);
            out.m = Some(env.factor_dimension());
            Ok(SeedDetail::Rank { report })
        }
        ExperimentKind::Geometry | ExperimentKind::LowerboundDemo => unreachable!("handled without an environment"),
    }
}

fn run_seed_inner(config: &ExperimentConfig, out: &mut SeedOutcome) -> Result<SeedDetail> {
    let a = &config.algorithm;
    match config.kind {
        ExperimentKind::Geometry => {
            let rows = geometry_grid(&a.geometry, StreamSeed::new(out.seed))?;
            out.success = geometry_passed(&rows);
            out.geometry = Some(rows.clone());
            Ok(SeedDetail::Geometry { rows })
        }
        ExperimentKind::LowerboundDemo => {
            let report = lowerbound_demo(&a.lowerbound, a.epsilon, a.delta, out.seed)?;
            out.success = report.olive_succeeded();
            out.iterations = report.families.iter().map(|f| f.olive.iterations).sum();
            out.episodes = report.families.iter().map(|f| f.baseline.episodes).sum();
            Ok(SeedDetail::LowerboundDemo { report })
        }
        _ => {
            let env = config.env.as_ref().expect("validated").resolve(out.seed)?;
            out.env_fingerprint = Some(env.fingerprint());
            let class: Class = config.class.as_ref().expect("validated").resolve(&env, out.seed)?;
            with_class!(&class, c => run_with_class(config, &env, c, out))
        }
    }
}

/// One seed's pipeline. Errors are recorded in the outcome.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> SeedRun {
    let mut outcome = SeedOutcome::empty(seed);
    let detail = match run_seed_inner(config, &mut outcome) {
        Ok(d) => d,
        Err(e) => {
            outcome.success = false;
            outcome.error = Some(format!("{:#}", e));
            SeedDetail::Error
        }
    };
    SeedRun { outcome, detail }
}

pub fn summarize(config: &ExperimentConfig, runs: &[SeedRun]) -> RunSummary {
    let seeds: Vec<SeedOutcome> = runs.iter().map(|r| r.outcome.clone()).collect();
    let aggregates = Aggregates {
        seeds: seeds.len(),
        successes: seeds.iter().filter(|s| s.success).count(),
        suboptimality: Aggregate::of(seeds.iter().filter_map(|s| s.suboptimality)),
        episodes: Aggregate::of(seeds.iter().filter(|s| s.error.is_none()).map(|s| s.episodes as f64)),
        iterations: Aggregate::of(seeds.iter().filter(|s| s.error.is_none()).map(|s| s.iterations as f64)),
    };
    RunSummary {
        tool_version: TOOL_VERSION.to_string(),
        label: config.label.clone().unwrap_or_else(|| config.kind.name().to_string()),
        kind: config.kind,
        config: config.clone(),
        max_rank: seeds.iter().filter_map(|s| s.max_rank).max(),
        seeds,
        aggregates,
    }
}

/// Runs every seed, in parallel when `threads` allows, and reduces in seed
/// order. `threads = Some(1)` forces a sequential run.
pub fn run_batch(config: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<SeedRun>> {
    config.validate()?;
    let work = || config.seeds.par_iter().map(|&s| run_seed(config, s)).collect::<Vec<_>>();
    Ok(match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    })
}

pub const ITERATION_COLUMNS: [&str; 8] = ["t", "f_t", "Vhat", "sum_self_err", "h_t", "survivors_before", "survivors_after", "episodes_cum"];

pub fn iteration_csv(result: &OliveResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ITERATION_COLUMNS)?;
    for r in &result.iterations {
        w.write_record([
            r.t.to_string(),
            r.chosen.to_string(),
            r.vhat.to_string(),
            r.sum_self_error.to_string(),
            r.level.map_or_else(String::new, |h| h.to_string()),
            r.survivors_before.to_string(),
            r.survivors_after.to_string(),
            r.episodes_cum.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn geometry_csv(rows: &[GeometryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results always serialize");
    s.push('\n');
    s
}

/// Writes `seed-<n>.json`, the per-seed CSVs and `summary.json`.
pub fn write_outputs(dir: &Path, runs: &[SeedRun], summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for run in runs {
        let seed = run.outcome.seed;
        fs::write(dir.join(format!("seed-{seed}.json")), to_json(run))?;
        if let Some(trace) = run.detail.trace() {
            fs::write(dir.join(format!("seed-{seed}-iterations.csv")), iteration_csv(trace)?)?;
        }
        if let SeedDetail::Geometry { rows } = &run.detail {
            fs::write(dir.join(format!("seed-{seed}-geometry.csv")), geometry_csv(rows)?)?;
        }
    }
    fs::write(dir.join("summary.json"), to_json(summary))?;
    Ok(())
}

/// Runs the batch and writes its artifacts to `output_dir` when one is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    let runs = run_batch(config, None)?;
    let summary = summarize(config, &runs);
    if let Some(dir) = &config.output_dir {
        write_outputs(dir, &runs, &summary)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_carry_field_paths() {
        let e = ExperimentConfig::from_json(r#"{"kind": "rank", "seeds": []}"#).unwrap_err();
        assert_eq!(e.path, "seeds");
        let e = ExperimentConfig::from_json(r#"{"kind": "geometry", "seeds": [1], "algorithm": {"epsilon": 2.0}}"#).unwrap_err();
        assert_eq!(e.path, "algorithm.epsilon");
        let e = ExperimentConfig::from_json(r#"{"kind": "geometry", "seeds": [1], "algorithm": {"epsilno": 0.1}}"#).unwrap_err();
        assert_eq!(e.path, "algorithm.epsilno");
        let e = ExperimentConfig::from_json(r#"{"kind": "olive", "seeds": [1]}"#).unwrap_err();
        assert_eq!(e.path, "env");
        let e = ExperimentConfig::from_json(r#"{"kind": "olive", "seeds": [1], "env": {"file": "/nonexistent.json"}, "class": {"class": "random", "size": 3}}"#)
            .unwrap_err();
        assert_eq!(e.path, "env.file");
    }

    #[test]
    fn default_algorithm_config_parses() {
        let a = AlgorithmConfig::default();
        assert_eq!(a.epsilon, 0.1);
        assert_eq!(a.rel_tol, DEFAULT_REL_TOL);
    }
}
