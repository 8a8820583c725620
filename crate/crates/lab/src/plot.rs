//! Long-format plot data from run summaries.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::experiment::{RunSummary, SeedOutcome};

/// Per-seed metrics; one row per seed.
pub const SEED_AXES: [&str; 8] = ["seed", "m", "class_size", "episodes", "iterations", "value", "suboptimality", "max_rank"];
/// Geometry-grid metrics; one row per grid cell.
pub const GEOMETRY_AXES: [&str; 5] = ["d", "beta", "volume_ratio", "slab_cut_ratio_bound", "violations"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axes {
    pub x: String,
    pub y: String,
}

impl Axes {
    pub fn new(x: &str, y: &str) -> Self {
        Axes { x: x.to_string(), y: y.to_string() }
    }
}

fn seed_metric(s: &SeedOutcome, axis: &str) -> Option<f64> {
    match axis {
        "seed" => Some(s.seed as f64),
        "m" => s.m.map(|v| v as f64),
        "class_size" => s.class_size.map(|v| v as f64),
        "episodes" => Some(s.episodes as f64),
        "iterations" => Some(s.iterations as f64),
        "value" => s.value,
        "suboptimality" => s.suboptimality,
        "max_rank" => s.max_rank.map(|v| v as f64),
        _ => None,
    }
}

fn geometry_metric(r: &crate::analysis::GeometryRow, axis: &str) -> f64 {
    match axis {
        "d" => r.d as f64,
        "beta" => r.beta,
        "volume_ratio" => r.volume_ratio,
        "slab_cut_ratio_bound" => r.slab_cut_ratio_bound,
        "violations" => r.violations as f64,
        _ => unreachable!("axis checked by the caller"),
    }
}

/// CSV with columns `x, y, series, seed`. Both axes must come from the same
/// family. Seeds missing a metric are skipped.
pub fn emit_plot_data(summaries: &[RunSummary], axes: &Axes) -> Result<String> {
    if summaries.is_empty() {
        bail!("need at least one summary");
    }
    let family = |a: &str| {
        if SEED_AXES.contains(&a) {
            Ok(false)
        } else if GEOMETRY_AXES.contains(&a) {
            Ok(true)
        } else {
            bail!("unknown axis {:?}; expected one of {:?} or {:?}", a, SEED_AXES, GEOMETRY_AXES)
        }
    };
    let geometric = family(&axes.x)?;
    if family(&axes.y)? != geometric {
        bail!("axes {:?} and {:?} come from different row families", axes.x, axes.y);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "series", "seed"])?;
    for summary in summaries {
        for s in &summary.seeds {
            if geometric {
                for r in s.geometry.iter().flatten() {
                    let (x, y) = (geometry_metric(r, &axes.x), geometry_metric(r, &axes.y));
                    w.write_record([x.to_string(), y.to_string(), summary.label.clone(), s.seed.to_string()])?;
                }
            } else if let (Some(x), Some(y)) = (seed_metric(s, &axes.x), seed_metric(s, &axes.y)) {
                w.write_record([x.to_string(), y.to_string(), summary.label.clone(), s.seed.to_string()])?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
