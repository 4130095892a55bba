use conelab::heat::{default_t_grid, trust_margin, GridFunction, HeatKernel};
use conelab::weak::{certify_very_weak, weyl_demo, FamilyOptions, Sign};

fn noisy_linear(amplitude: f64) -> GridFunction {
    GridFunction::centered(&[0.0, 0.0], 1.5, 1.0 / 64.0, |x| {
        x[0] + amplitude * ((37.0 * x[0]).sin() * (53.0 * x[1]).cos() + (91.0 * x[0] * x[1]).sin())
    })
    .unwrap()
}

#[test]
fn certificate_degrades_linearly_with_noise() {
    let worst = |a| {
        certify_very_weak(&noisy_linear(a), &[0.0, 0.0], 1.0, Sign::Harmonic, FamilyOptions::default(), 1e-6)
            .unwrap()
            .worst
            .ratio
            .abs()
    };
    let clean = worst(0.0);
    // sub-cell sampling of Δφ leaves a floor of a few 1e-6
    assert!(clean < 1e-5, "{clean}");
    let (a, b, c) = (worst(1e-3), worst(2e-3), worst(4e-3));
    assert!(a > 1e-4);
    assert!((b / a - 2.0).abs() < 0.1 && (c / b - 2.0).abs() < 0.1, "{a} {b} {c}");
}

#[test]
fn isolated_spikes_only_leave_their_heat_footprint() {
    let h = 1.0 / 64.0;
    let radius = 2.0;
    let t_grid = default_t_grid();
    let t_min = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = radius + trust_margin(0.1, h) + 4.0 * h;
    let mut u = GridFunction::centered(&[0.0, 0.0], half, h, |x| x[0]).unwrap();
    let spikes: Vec<usize> = (0..u.len()).step_by(1009).collect();
    for &i in &spikes {
        u.values[i] += 1.0;
    }
    let report = weyl_demo(&u, &[0.0, 0.0], radius, 3e-2, Some(&t_grid), Some(&|x: &[f64]| x[0])).unwrap();
    // P_t is linear and fixes x₁, so the error is the smoothed spike train: Σ hⁿ p_t(x − x_i)
    let kernel = HeatKernel::new(2).unwrap();
    let predicted = GridFunction::centered(&[0.0, 0.0], radius / 8.0, h, |x| {
        spikes.iter().map(|&i| h * h * kernel.density(t_min, x, &u.coords(i))).sum()
    })
    .unwrap();
    let inner = predicted.nodes_in_ball(&[0.0, 0.0], radius / 8.0);
    let bound = inner.iter().map(|&i| predicted.values[i]).fold(0.0, f64::max);
    let err = report.recovery_error.unwrap();
    assert!(bound > 0.0);
    assert!((err / bound - 1.0).abs() < 0.1, "{err} vs {bound}");
    // a vanishing spike fraction vanishes from the representative
    assert!(err < spikes.len() as f64 * h * h);
}
