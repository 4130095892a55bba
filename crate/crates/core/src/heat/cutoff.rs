use serde::{Deserialize, Serialize};

use super::grid::{dist, GridFunction};
use super::{heat_apply, kernel_radius, min_time};
use crate::error::{LabError, Result};

/// How the smoothing time of the cutoff is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffTime {
    /// t = r₀²/(32n): the flat drift bound ‖φ_t − φ‖_∞ ≤ √(2nt)/R then stays below r₀/(4R) ≤ 1/4.
    Drift { r0: f64 },
    Fixed(f64),
}

impl CutoffTime {
    pub fn time(&self, dim: usize) -> f64 {
        match *self {
            CutoffTime::Drift { r0 } => r0 * r0 / (32.0 * dim as f64),
            CutoffTime::Fixed(t) => t,
        }
    }
}

/// C² ramp: 0 on (−∞, 1/4], 1 on [3/4, ∞), quintic smoothstep between. Returns (f, f', f'').
pub fn ramp(s: f64) -> (f64, f64, f64) {
    if s <= 0.25 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 0.75 {
        return (1.0, 0.0, 0.0);
    }
    let u = (s - 0.25) * 2.0;
    let f = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let f1 = 30.0 * u * u * (1.0 - u) * (1.0 - u) * 2.0;
    let f2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) * 4.0;
    (f, f1, f2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub t: f64,
    pub h: f64,
    /// max |φ_t − φ| and its flat bound √(2nt)/R.
    pub drift: f64,
    pub drift_bound: f64,
    pub sup_gradient: f64,
    pub sup_laplacian: f64,
    /// R·sup(|∇η| + |Δη|)
    pub scale_constant: f64,
    /// Largest r with η = 1 at every node of B_r.
    pub one_radius: f64,
    /// Largest distance of a node with η > 0.
    pub support_radius: f64,
    /// R²·max(|∇φ_t|² − P_t|∇φ|²), positive parts only.
    pub bakry_ledoux_excess: f64,
    #[serde(skip)]
    pub eta: Option<GridFunction>,
}

/// η = f∘P_tφ for the piecewise-linear φ (1 on B_R, 0 off B_{2R}, slope 1/R) on a grid of
/// spacing h. Derivatives of η use the chain rule on central differences of φ_t.
pub fn build_cutoff(center: &[f64], radius: f64, time: CutoffTime, h: f64) -> Result<CutoffReport> {
    let n = center.len();
    if !(radius > 0.0) {
        return Err(LabError::param("R", "radius must be positive"));
    }
    let t = time.time(n);
    if t < min_time(h) {
        return Err(LabError::Resolution {
            what: format!("cutoff smoothing time {t} at spacing {h}"),
            min: t.sqrt() / 2.0,
        });
    }
    let half = 2.0 * radius + kernel_radius(t) + 2.0 * h;
    let c = center.to_vec();
    let phi = GridFunction::centered(center, half, h, |x| {
        ((2.0 * radius - dist(x, &c)) / radius).clamp(0.0, 1.0)
    })?;
    let grad_sq = phi.map(|x, _| {
        let d = dist(x, &c);
        if d > radius && d < 2.0 * radius {
            1.0 / (radius * radius)
        } else {
            0.0
        }
    });
    let phit = heat_apply(&phi, t)?;
    let pgrad = heat_apply(&grad_sq, t)?;
    let drift = phit
        .values
        .iter()
        .zip(&phi.values)
        .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
    let mut eta = vec![0.0; phi.len()];
    let mut sup_g: f64 = 0.0;
    let mut sup_l: f64 = 0.0;
    let mut sup_sum: f64 = 0.0;
    let mut excess: f64 = 0.0;
    let mut one_radius = f64::INFINITY;
    let mut support_radius: f64 = 0.0;
    for i in 0..phi.len() {
        let (f, f1, f2) = ramp(phit.values[i]);
        eta[i] = f;
        let d = dist(&phi.coords(i), center);
        if f < 1.0 {
            one_radius = one_radius.min(d);
        }
        if f > 0.0 {
            support_radius = support_radius.max(d);
        }
        if let (Some(g), Some(l)) = (phit.gradient_at(i), phit.laplacian_at(i)) {
            let g2: f64 = g[..n].iter().map(|v| v * v).sum();
            let ge = f1 * g2.sqrt();
            let le = (f2 * g2 + f1 * l).abs();
            sup_g = sup_g.max(ge);
            sup_l = sup_l.max(le);
            sup_sum = sup_sum.max(ge + le);
            excess = excess.max((g2 - pgrad.values[i]) * radius * radius);
        }
    }
    let eta = phi.with_values(eta);
    Ok(CutoffReport {
        center: center.to_vec(),
        radius,
        t,
        h,
        drift,
        drift_bound: (2.0 * n as f64 * t).sqrt() / radius,
        sup_gradient: sup_g,
        sup_laplacian: sup_l,
        scale_constant: radius * sup_sum,
        one_radius,
        support_radius,
        bakry_ledoux_excess: excess.max(0.0),
        eta: Some(eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_is_c2_and_saturates() {
        assert_eq!(ramp(0.1), (0.0, 0.0, 0.0));
        assert_eq!(ramp(0.9), (1.0, 0.0, 0.0));
        let e = 1e-6;
        for s in [0.3, 0.5, 0.7] {
            let (f, f1, f2) = ramp(s);
            assert!(((ramp(s + e).0 - ramp(s - e).0) / (2.0 * e) - f1).abs() < 1e-6);
            assert!(((ramp(s + e).1 - ramp(s - e).1) / (2.0 * e) - f2).abs() < 1e-5);
            assert!((0.0..=1.0).contains(&f));
        }
        for s in [0.25, 0.75] {
            let (_, f1, f2) = ramp(s + 1e-9);
            assert!(f1.abs() < 1e-6 && f2.abs() < 1e-3);
        }
    }

    #[test]
    fn cutoff_properties() {
        let r = build_cutoff(&[0.0, 0.0], 1.0, CutoffTime::Drift { r0: 1.0 }, 1.0 / 32.0).unwrap();
        assert!(r.drift <= r.drift_bound + 1e-9);
        assert!(r.drift_bound <= 0.25 + 1e-12);
        let eta = r.eta.as_ref().unwrap();
        assert!(eta.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(r.one_radius >= 1.0, "{}", r.one_radius);
        assert!(r.support_radius < 2.0);
        assert!(r.bakry_ledoux_excess < 1e-2, "{}", r.bakry_ledoux_excess);
        assert!(r.scale_constant.is_finite() && r.scale_constant > 0.0);
    }

    #[test]
    fn coarse_grids_are_refused() {
        assert!(matches!(
            build_cutoff(&[0.0, 0.0], 1.0, CutoffTime::Fixed(1e-4), 0.05),
            Err(LabError::Resolution { .. })
        ));
    }
}
