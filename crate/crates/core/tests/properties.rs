use std::f64::consts::PI;

use proptest::prelude::*;

use conelab::campanato::exp_bound;
use conelab::coefficient::{coefficient_from_metric, metric_from_coefficient, CoefficientField};
use conelab::cone::{check_monotonicity, circle_spectrum, exponent_from_eigenvalue, sphere_spectrum, ConeHarmonic};
use conelab::heat::{heat_apply, GridFunction};
use conelab::linalg::SmallMat;
use conelab::weak::{certify_very_weak, FamilyOptions, FnField, Geometry, Sampled, Sign, TestFunction};

fn spd(n: usize, entries: &[f64], shift: f64) -> SmallMat {
    let b = SmallMat::from_fn(n, |i, j| entries[i * n + j]);
    b.matmul(&b.transpose()).add(&SmallMat::scalar(n, shift))
}

fn rotation(axis: [f64; 3], angle: f64) -> SmallMat {
    let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = [axis[0] / len, axis[1] / len, axis[2] / len];
    let (s, c) = angle.sin_cos();
    SmallMat::from_fn(3, |i, j| {
        let cross = match (i, j) {
            (0, 1) => -k[2],
            (0, 2) => k[1],
            (1, 0) => k[2],
            (1, 2) => -k[0],
            (2, 0) => -k[1],
            (2, 1) => k[0],
            _ => 0.0,
        };
        let id = if i == j { 1.0 } else { 0.0 };
        c * id + s * cross + (1.0 - c) * k[i] * k[j]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_coefficients_survive_the_metric_round_trip(
        n in 3usize..=5,
        entries in prop::collection::vec(-1.0f64..1.0, 25),
        shift in 0.1f64..2.0,
    ) {
        let a0 = spd(n, &entries, shift);
        let a = CoefficientField::constant(a0, "spd").unwrap();
        let back = coefficient_from_metric(&metric_from_coefficient(&a).unwrap(), 1.0).unwrap();
        let x = vec![0.1; n];
        prop_assert!(back.at(&x).sub(&a0).norm_fro() <= 1e-12 * a0.norm_fro());
    }

    #[test]
    fn exponent_solves_the_eigenvalue_relation(lambda in 0.0f64..1e3, n in 2usize..=6) {
        let nn = n as f64;
        let a = exponent_from_eigenvalue(lambda, nn).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a * (nn + a - 2.0) - lambda).abs() <= 1e-12 * lambda.max(1.0));
        if lambda >= nn - 1.0 {
            prop_assert!(a >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn convex_graph_is_rotation_equivariant(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..(2.0 * PI),
        x in prop::array::uniform3(-0.7f64..0.7),
    ) {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        prop_assume!(len > 1e-3 && r > 1e-3);
        let a = CoefficientField::convex_graph(&[1.0, 1.0, 1.0]).unwrap();
        let q = rotation(axis, angle);
        let mut qx = [0.0; 3];
        q.mul_vec(&x, &mut qx);
        let lhs = a.at(&qx);
        let rhs = q.matmul(&a.at(&x)).matmul(&q.transpose());
        prop_assert!(lhs.sub(&rhs).norm_fro() <= 1e-10);
    }

    #[test]
    fn doubling_the_dini_integral_squares_the_bound(
        c3 in 0.0f64..2.0,
        rho in 0.1f64..0.95,
        dini in 0.0f64..3.0,
    ) {
        let one = exp_bound(c3, rho, dini);
        let two = exp_bound(c3, rho, 2.0 * dini);
        prop_assert!(two <= one * one * (1.0 + 1e-9));
    }

    #[test]
    fn cone_harmonics_have_nondecreasing_energy(
        theta in 0.5f64..(2.0 * PI),
        s in 0.3f64..1.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let radii: Vec<f64> = (0..24).map(|k| 0.02 * 50f64.powf(k as f64 / 23.0)).collect();
        for spec in [circle_spectrum(theta, 16).unwrap(), sphere_spectrum(s, 16).unwrap()] {
            let h = ConeHarmonic::new(spec, coeffs.clone()).unwrap();
            let rep = check_monotonicity(&h, &radii).unwrap();
            prop_assert!(rep.violations.is_empty());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn heat_flow_is_linear_and_positive(a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.005f64..0.05) {
        let h = 1.0 / 32.0;
        let u = GridFunction::centered(&[0.0, 0.0], 2.0, h, |x| (3.0 * x[0]).sin() * x[1]).unwrap();
        let v = GridFunction::centered(&[0.0, 0.0], 2.0, h, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let w = u.with_values(u.values.iter().zip(&v.values).map(|(p, q)| a * p + b * q).collect());
        let (pu, pv, pw) = (heat_apply(&u, t).unwrap(), heat_apply(&v, t).unwrap(), heat_apply(&w, t).unwrap());
        for i in 0..pw.len() {
            prop_assert!((pw.values[i] - (a * pu.values[i] + b * pv.values[i])).abs() <= 1e-12);
            prop_assert!(pv.values[i] >= 0.0);
        }
    }

    #[test]
    fn certificates_are_scale_invariant(c in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0]) {
        let opts = FamilyOptions { size: 16, ..FamilyOptions::default() };
        let base = certify_very_weak(
            &FnField::new(2, |x: &[f64]| x[0] * x[0] + 0.5 * x[1]),
            &[0.0, 0.0], 1.0, Sign::Sub, opts, 1e-6,
        ).unwrap();
        let scaled = certify_very_weak(
            &FnField::new(2, move |x: &[f64]| c * (x[0] * x[0] + 0.5 * x[1])),
            &[0.0, 0.0], 1.0, Sign::Sub, opts, 1e-6,
        ).unwrap();
        let s = c.signum();
        let (lo, hi) = if s > 0.0 { (scaled.min_ratio, scaled.max_ratio) } else { (-scaled.max_ratio, -scaled.min_ratio) };
        prop_assert!((lo - base.min_ratio).abs() <= 1e-12 * base.max_ratio.abs().max(1.0));
        prop_assert!((hi - base.max_ratio).abs() <= 1e-12 * base.max_ratio.abs().max(1.0));
        prop_assert_eq!(scaled.passed, s > 0.0);
    }

    #[test]
    fn pairing_is_linear_in_the_field(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        center in prop::array::uniform2(-0.4f64..0.4),
        radius in 0.1f64..0.5,
    ) {
        let phi = TestFunction::bump(&center, radius, Geometry::Flat(2)).unwrap();
        let f = |x: &[f64]| (2.0 * x[0]).cos() * x[1];
        let g = |x: &[f64]| (x[0] + x[1]).abs();
        let pf = FnField::new(2, f).pair(&phi).unwrap();
        let pg = FnField::new(2, g).pair(&phi).unwrap();
        let pc = FnField::new(2, move |x: &[f64]| a * f(x) + b * g(x)).pair(&phi).unwrap().value;
        // relative to the certificate scale ‖u‖₁‖φ‖_E
        let scale = (a.abs() * pf.u_l1 + b.abs() * pg.u_l1) * phi.e_norm();
        prop_assert!((pc - (a * pf.value + b * pg.value)).abs() <= 1e-12 * scale.max(1e-300));
    }
}
