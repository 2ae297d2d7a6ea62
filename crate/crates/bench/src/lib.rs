//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use curvgas::{build_grid, Domain, ExternalField, QuadratureGrid};

/// S² grid with `n_theta × 2 n_theta` nodes.
pub fn sphere_grid(n_theta: usize) -> Arc<QuadratureGrid> {
    Arc::new(build_grid(Domain::sphere(2), &[n_theta, 2 * n_theta]).expect("valid resolution"))
}

/// Two antipodal bumps on the poles, mean-zero on `grid`.
pub fn two_bumps(grid: &QuadratureGrid) -> ExternalField {
    ExternalField::two_antipodal_bumps(1.0, 5.0, grid)
}
