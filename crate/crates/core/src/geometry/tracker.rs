use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::num::{ln, sqrt};
use crate::olive::{per_level_iteration_bound, IterationRecord};
use crate::oracle::BellmanFactorization;

use super::ellipsoid::{log_volume_ratio, CenteredEllipsoid};

/// Constants of the run being audited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub m: usize,
    pub zeta: f64,
    pub phi: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub theta_m: f64,
    /// Containment slack on `xi^T B^{-1} xi <= 1`.
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_slack() -> f64 {
    1e-9
}

impl TrackerConfig {
    pub fn new(m: usize, zeta: f64, phi: f64) -> Self {
        TrackerConfig { m, zeta, phi, theta: 0.0, theta_m: 0.0, slack: default_slack() }
    }

    /// Slab half-width `2 phi + theta + theta_M`.
    pub fn half_width(&self) -> f64 {
        2.0 * self.phi + self.theta + self.theta_m
    }

    /// Lower bound every witness must reach.
    pub fn required_witness(&self) -> f64 {
        3.0 * sqrt(self.m as f64) * self.half_width() + self.theta_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub t: usize,
    pub chosen: usize,
    /// `p_t = nu_h(f_t)`.
    pub direction: Vec<f64>,
    /// `|<p_t, xi_h(f_t)>|`.
    pub witness: f64,
    pub required: f64,
    pub witness_ok: bool,
    /// `tau / sqrt(p^T B p)` against the current ellipsoid.
    pub beta: f64,
    /// Whether the minimum-volume update shrank the ellipsoid.
    pub applied: bool,
    /// Volume ratio of this update; 1 when not applied.
    pub ratio: f64,
    pub log_volume: f64,
    /// Largest `xi^T B^{-1} xi` over survivors after the cut.
    pub max_survivor_form: f64,
    pub survivors_contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAudit {
    pub level: usize,
    pub cuts: Vec<CutRecord>,
    pub cut_count: usize,
    /// `M ln(zeta / (2 phi)) / ln(5/3)`.
    pub bound: f64,
    pub within_bound: bool,
    /// Log of the product of per-cut ratios.
    pub log_volume_change: f64,
}

impl LevelAudit {
    pub fn flagged(&self) -> impl Iterator<Item = &CutRecord> {
        self.cuts.iter().filter(|c| !c.witness_ok || !c.survivors_contained)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerAudit {
    pub config: TrackerConfig,
    pub levels: Vec<LevelAudit>,
}

impl TrackerAudit {
    pub fn passed(&self) -> bool {
        self.levels.iter().all(|l| l.within_bound && l.flagged().next().is_none())
    }
}

struct LevelState {
    ellipsoid: Option<CenteredEllipsoid>,
    log_volume: f64,
    audit: LevelAudit,
}

/// Replays the elimination trace through the per-level factorizations.
///
/// Each iteration that explored level `h` contributes the slab
/// `{v : |<nu_h(f_t), v>| <= 2 phi + theta + theta_M}`. Starting from a ball
/// holding every `xi_h(f)`, the ellipsoid is updated to the minimum-volume
/// ellipsoid around its intersection with each slab; survivors must stay
/// inside and every witness must clear the required margin. Problems are
/// flagged in the records rather than returned as errors.
pub fn track_version_space(
    factorizations: &[BellmanFactorization],
    trace: &[IterationRecord],
    config: &TrackerConfig,
) -> Result<TrackerAudit> {
    if config.m == 0 || !(config.zeta > 0.0) || !(config.phi > 0.0) {
        bail!(InvalidArgument, "need M >= 1, zeta > 0 and phi > 0");
    }
    let horizon = factorizations.len();
    for (i, f) in factorizations.iter().enumerate() {
        if f.level != i + 1 {
            bail!(InvalidArgument, "factorization {} is for level {}", i, f.level);
        }
    }
    let size = factorizations.first().map_or(0, |f| f.xi.len());
    if factorizations.iter().any(|f| f.xi.len() != size || f.nu.len() != size) {
        bail!(ShapeMismatch, "factorizations disagree on class size");
    }
    let bound = per_level_iteration_bound(config.m, config.zeta, config.phi);
    let tau = config.half_width();
    let required = config.required_witness();

    let mut states = Vec::with_capacity(horizon);
    for f in factorizations {
        let radius = f.max_xi_norm();
        let ellipsoid = if f.dimension > 0 && radius > 0.0 { Some(CenteredEllipsoid::ball(f.dimension, radius)?) } else { None };
        let log_volume = if radius > 0.0 { f.dimension as f64 * ln(radius) } else { f64::NEG_INFINITY };
        states.push(LevelState {
            ellipsoid,
            log_volume,
            audit: LevelAudit { level: f.level, cuts: Vec::new(), cut_count: 0, bound, within_bound: true, log_volume_change: 0.0 },
        });
    }

    let mut alive = alloc::vec![true; size];
    for record in trace {
        if record.chosen >= size || record.eliminated.iter().any(|&i| i >= size) {
            bail!(ShapeMismatch, "trace refers to members outside the factorized class");
        }
        for &i in &record.eliminated {
            alive[i] = false;
        }
        let Some(h) = record.level else { continue };
        if h == 0 || h > horizon {
            bail!(InvalidArgument, "trace level {} outside 1..={}", h, horizon);
        }
        let fact = &factorizations[h - 1];
        let state = &mut states[h - 1];
        let direction = fact.nu[record.chosen].clone();
        let witness = fact.inner(record.chosen, record.chosen).abs();
        let (mut applied, mut beta, mut ratio) = (false, f64::INFINITY, 1.0);
        if let Some(e) = &state.ellipsoid {
            let alpha = e.support(&direction);
            if alpha > 0.0 {
                beta = tau / alpha;
            }
            if let Some((next, b)) = e.cut(&direction, tau)? {
                let lr = log_volume_ratio(b, fact.dimension)?;
                applied = true;
                ratio = crate::num::exp(lr);
                state.log_volume += lr;
                state.audit.log_volume_change += lr;
                state.ellipsoid = Some(next);
            }
        }
        let max_form = match &state.ellipsoid {
            Some(e) => (0..size).filter(|&i| alive[i]).map(|i| e.quadratic_form(&fact.xi[i])).fold(0.0, f64::max),
            None => 0.0,
        };
        state.audit.cuts.push(CutRecord {
            t: record.t,
            chosen: record.chosen,
            direction,
            witness,
            required,
            witness_ok: witness >= required,
            beta,
            applied,
            ratio,
            log_volume: state.log_volume,
            max_survivor_form: max_form,
            survivors_contained: max_form <= 1.0 + config.slack,
        });
    }

    let levels = states
        .into_iter()
        .map(|mut s| {
            s.audit.cut_count = s.audit.cuts.len();
            s.audit.within_bound = s.audit.cut_count as f64 <= bound;
            s.audit
        })
        .collect();
    Ok(TrackerAudit { config: *config, levels })
}
