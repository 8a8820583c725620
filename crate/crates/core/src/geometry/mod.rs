//! Slab cuts of centered ellipsoids.
//!
//! The closed-form minimum-volume ellipsoid around a unit ball intersected
//! with a symmetric slab, its volume ratio, and [`track_version_space`], a
//! replay of an elimination trace through the factorization that checks the
//! volumetric iteration argument cut by cut.

mod ellipsoid;
mod tracker;

pub use ellipsoid::{
    log_volume_ratio, mvee_slab_cut_unit, sample_slab_ball, slab_cut_ratio_bound, volume_ratio, CenteredEllipsoid, SlabCut,
    SYMMETRY_TOL,
};
pub use tracker::{track_version_space, CutRecord, LevelAudit, TrackerAudit, TrackerConfig};
