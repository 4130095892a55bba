//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use conelab::fem::Mesh;
use conelab::{parse_coefficient, CoefficientField, GridFunction};

/// Convex-graph coefficient on the unit ball of ℝ³.
pub fn graph_coefficient() -> CoefficientField {
    parse_coefficient("convex_graph:1,1,1", 3).expect("valid coefficient")
}

pub fn ball_mesh(cells_per_side: usize) -> Arc<Mesh> {
    Arc::new(Mesh::mapped_ball(3, 1.0, cells_per_side).expect("valid mesh"))
}

/// x² − y² sampled on [−1, 1]² with spacing h.
pub fn saddle_grid(h: f64) -> GridFunction {
    GridFunction::centered(&[0.0, 0.0], 1.0, h, |x| x[0] * x[0] - x[1] * x[1]).expect("valid grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert!(ball_mesh(4).num_nodes() > 0);
        assert_eq!(saddle_grid(0.25).shape, vec![9, 9]);
        assert_eq!(graph_coefficient().dim(), 3);
    }
}
