use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::errors::BellmanErrorMatrix;

pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Singular values at or below this are treated as zero regardless of the
/// relative threshold, so round-off on an all-but-zero matrix is not counted.
pub const ABS_RANK_FLOOR: f64 = 1e-12;

/// Singular values in decreasing order.
pub fn singular_values(matrix: &BellmanErrorMatrix) -> Vec<f64> {
    if matrix.size == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(matrix.size, matrix.size, &matrix.entries);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `#{sigma_i > rel_tol * sigma_max}`, ignoring values below
/// [`ABS_RANK_FLOOR`].
pub fn matrix_rank(singular: &[f64], rel_tol: f64) -> usize {
    let max = singular.iter().copied().fold(0.0, f64::max);
    let cut = (rel_tol * max).max(ABS_RANK_FLOOR);
    singular.iter().filter(|&&s| s > cut).count()
}

/// Largest numerical rank across the given matrices.
pub fn numerical_bellman_rank(matrices: &[BellmanErrorMatrix], rel_tol: f64) -> usize {
    matrices.iter().map(|m| matrix_rank(&singular_values(m), rel_tol)).max().unwrap_or(0)
}
