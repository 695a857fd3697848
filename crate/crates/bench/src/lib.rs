//! Shared fixtures for the benchmarks.

use btlab_core::{make_uniform_grid, PeriodicGrid, QuadratureRule, ScalarField, TimeGrid};

/// Smooth, non-periodic data exercised by every route.
pub fn smooth_pair() -> (ScalarField, ScalarField) {
    (ScalarField::gauss(), ScalarField::neg_cauchy())
}

pub fn default_rule() -> QuadratureRule {
    QuadratureRule::default()
}

/// Clock and spatial grids sized for a Feynman–Kac solve up to time `t`.
pub fn picard_grids(t: f64, s_steps: usize, points: usize) -> (TimeGrid, PeriodicGrid) {
    let s_grid = make_uniform_grid(default_rule().s_max(t), s_steps).expect("valid clock grid");
    let x_grid = PeriodicGrid::new(16.0, points).expect("valid spatial grid");
    (s_grid, x_grid)
}
