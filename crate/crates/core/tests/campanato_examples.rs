use std::sync::Arc;

use conelab::campanato::{probe_boundary, run_iteration, IterationConfig, IterationReport, IterationSetup};
use conelab::coefficient::{CoefficientField, Perturbation, Perturbed};

fn offset_runs() -> (IterationReport, IterationReport) {
    let abar = CoefficientField::convex_graph(&[1.0, 1.0, 1.0]).unwrap();
    let setup = IterationSetup::new(
        &abar,
        IterationConfig {
            rho: Some(0.8),
            cells_per_side: 48,
            levels: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let run = |eps| {
        let a = CoefficientField::new(
            Arc::new(Perturbed {
                base: abar.model().clone(),
                kind: Perturbation::Offset { eps },
            }),
            1.0,
        )
        .unwrap();
        run_iteration(&setup, &a, &probe_boundary).unwrap()
    };
    (run(0.05), run(0.1))
}

fn c2s(r: &IterationReport) -> Vec<f64> {
    r.levels.iter().map(|l| l.measured_c2().expect("offset modulus is positive")).collect()
}

// One test so both resolutions share the solves.
#[test]
fn constant_offset_has_level_independent_and_linear_c2() {
    let (small, large) = offset_runs();
    assert_eq!(small.levels.len(), 4);
    assert!(small.truncated.is_none());
    let a = c2s(&small);
    let b = c2s(&large);
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    for v in &a {
        assert!(v.is_finite() && (v / mean - 1.0).abs() <= 0.2, "{a:?}");
    }
    // the defect equation is linear in A − Ā, so C₂ = ‖∇v‖/(ω‖∇u‖) does not see ε
    for (x, y) in a.iter().zip(&b) {
        assert!((y / x - 1.0).abs() <= 0.1, "{a:?} vs {b:?}");
    }
}
