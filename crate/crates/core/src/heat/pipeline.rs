use serde::{Deserialize, Serialize};

use super::grid::{dist, GridFunction};
use super::{heat_apply, trust_margin};
use crate::error::{LabError, Result};
use crate::linalg::fit_slope;
use crate::weak::{Certificate, Sign};

/// Geometric grid of 12 times from 1e−1 down to 1e−3.
pub fn default_t_grid() -> Vec<f64> {
    (0..12).map(|k| 0.1 * 0.01f64.powf(k as f64 / 11.0)).collect()
}

/// sup_{B_{R/8}}|∇v_t| and ‖v_t − v‖₁ along a sequence of times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingTrace {
    pub center: Vec<f64>,
    pub radius: f64,
    pub h: f64,
    pub t: Vec<f64>,
    pub sup_gradient: Vec<f64>,
    /// Over nodes at least `trust_margin(t_max)` from the faces.
    pub l1_distance: Vec<f64>,
    /// (max − min)/min of the sup-gradients.
    pub gradient_variation: f64,
    /// Log-log slope of sup-gradient against t (−1/2 for a jump, 0 for Lipschitz data).
    pub gradient_exponent: f64,
    /// Log-log slope of ‖v_t − v‖₁ against t.
    pub l1_rate: f64,
}

impl SmoothingTrace {
    /// No visible blow-up of the gradient as t → 0.
    pub fn lipschitz(&self) -> bool {
        self.gradient_exponent > -0.1
    }
}

pub fn smoothing_trace(v: &GridFunction, center: &[f64], radius: f64, t_grid: &[f64]) -> Result<SmoothingTrace> {
    if t_grid.len() < 2 {
        return Err(LabError::InsufficientData("need at least two smoothing times".into()));
    }
    let inner = v.nodes_in_ball(center, radius / 8.0);
    if inner.len() < 9 {
        return Err(LabError::Resolution {
            what: "inner ball B_{R/8}".into(),
            min: 8.0 * 3.0 * v.h,
        });
    }
    // one window for every time, so the rate compares like with like
    let tmax = t_grid.iter().cloned().fold(0.0, f64::max);
    let window_margin = trust_margin(tmax, v.h);
    let mut sup_gradient = Vec::new();
    let mut l1_distance = Vec::new();
    for &t in t_grid {
        let vt = heat_apply(v, t)?;
        let margin = trust_margin(t, v.h);
        if inner.iter().any(|&i| v.boundary_distance(i) < margin) {
            return Err(LabError::param("grid", "B_{R/8} lies inside the zero-padding zone"));
        }
        let g = inner
            .iter()
            .filter_map(|&i| vt.gradient_at(i))
            .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        sup_gradient.push(g);
        l1_distance.push(vt.l1_distance_where(v, |i| v.boundary_distance(i) >= window_margin));
    }
    let lt: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let lg: Vec<f64> = sup_gradient.iter().map(|g| g.max(1e-300).ln()).collect();
    let ld: Vec<f64> = l1_distance.iter().map(|d| d.max(1e-300).ln()).collect();
    let gmax = sup_gradient.iter().cloned().fold(0.0, f64::max);
    let gmin = sup_gradient.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SmoothingTrace {
        center: center.to_vec(),
        radius,
        h: v.h,
        t: t_grid.to_vec(),
        gradient_variation: if gmin > 0.0 { (gmax - gmin) / gmin } else { 0.0 },
        gradient_exponent: fit_slope(&lt, &lg),
        l1_rate: fit_slope(&lt, &ld),
        sup_gradient,
        l1_distance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub trace: SmoothingTrace,
    pub lipschitz: bool,
    /// Smoothed field at the smallest time.
    #[serde(skip)]
    pub representative: Option<GridFunction>,
}

/// Runs the smoothing trace on v supported in B_R(x₀), provided a harmonic certificate
/// covers B_{R/2}(x₀).
pub fn smoothing_pipeline(
    v: &GridFunction,
    center: &[f64],
    radius: f64,
    t_grid: &[f64],
    certificate: &Certificate,
) -> Result<PipelineReport> {
    if certificate.sign != Sign::Harmonic || !certificate.passed {
        return Err(LabError::Certification(
            "smoothing needs a passed harmonic certificate".into(),
        ));
    }
    if dist(&certificate.center, center) + radius / 2.0 > certificate.radius * (1.0 + 1e-12) {
        return Err(LabError::Certification(format!(
            "certificate region B_{}({:?}) does not cover B_{}({:?})",
            certificate.radius,
            certificate.center,
            radius / 2.0,
            center
        )));
    }
    let trace = smoothing_trace(v, center, radius, t_grid)?;
    let tmin = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PipelineReport {
        lipschitz: trace.lipschitz(),
        representative: Some(heat_apply(v, tmin)?),
        trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Nondecreasing,
    Nonincreasing,
    Flat,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityTrace {
    /// Times in increasing order.
    pub t: Vec<f64>,
    /// Nodes at least `trust_margin(t_max)` from the faces.
    pub window_nodes: usize,
    /// Mean over the window of (P_{t₂}u − P_{t₁}u)/(t₂ − t₁) for consecutive times.
    pub mean_slopes: Vec<f64>,
    pub min_increment: f64,
    pub max_increment: f64,
    /// Window nodes and time pairs where P_{t₂}u < P_{t₁}u − tol.
    pub violations: usize,
    pub trend: Trend,
    /// Smallest discrete Laplacian of u on the window.
    pub min_laplacian: f64,
    /// min Δu ≥ −tol.
    pub subharmonic: bool,
    /// |∫P_t u − ∫u| / ∫|u| over the whole grid, per time.
    pub mass_defect: Vec<f64>,
}

/// P_t u is nondecreasing in t when u is subharmonic; failures are reported, not raised.
pub fn subharmonic_monotonicity_check(u: &GridFunction, t_grid: &[f64], tol: f64) -> Result<MonotonicityTrace> {
    let mut t: Vec<f64> = t_grid.to_vec();
    t.sort_by(|a, b| a.total_cmp(b));
    t.dedup();
    if t.len() < 2 {
        return Err(LabError::InsufficientData("need at least two times".into()));
    }
    let margin = trust_margin(*t.last().unwrap(), u.h);
    let window: Vec<usize> = (0..u.len()).filter(|&i| u.boundary_distance(i) > margin).collect();
    if window.is_empty() {
        return Err(LabError::Resolution {
            what: "trust window for the largest time".into(),
            min: margin,
        });
    }
    let flows = t.iter().map(|&s| heat_apply(u, s)).collect::<Result<Vec<_>>>()?;
    let mass = u.integral();
    let scale = u.l1_norm().max(f64::MIN_POSITIVE);
    let mass_defect = flows.iter().map(|f| (f.integral() - mass).abs() / scale).collect();
    let mut mean_slopes = Vec::new();
    let mut min_inc = f64::INFINITY;
    let mut max_inc = f64::NEG_INFINITY;
    let mut violations = 0;
    for k in 1..t.len() {
        let (a, b) = (&flows[k - 1], &flows[k]);
        let mut acc = 0.0;
        for &i in &window {
            let d = b.values[i] - a.values[i];
            acc += d;
            min_inc = min_inc.min(d);
            max_inc = max_inc.max(d);
            if d < -tol {
                violations += 1;
            }
        }
        mean_slopes.push(acc / window.len() as f64 / (t[k] - t[k - 1]));
    }
    let trend = if min_inc >= -tol && max_inc <= tol {
        Trend::Flat
    } else if min_inc >= -tol {
        Trend::Nondecreasing
    } else if max_inc <= tol {
        Trend::Nonincreasing
    } else {
        Trend::Mixed
    };
    let min_laplacian = window
        .iter()
        .filter_map(|&i| u.laplacian_at(i))
        .fold(f64::INFINITY, f64::min);
    Ok(MonotonicityTrace {
        t,
        window_nodes: window.len(),
        mean_slopes,
        min_increment: min_inc,
        max_increment: max_inc,
        violations,
        trend,
        min_laplacian,
        subharmonic: min_laplacian >= -tol,
        mass_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_two_decades() {
        let g = default_t_grid();
        assert_eq!(g.len(), 12);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[11] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn paraboloid_moves_at_rate_2n() {
        let u = GridFunction::centered(&[0.0, 0.0], 3.0, 0.02, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        let r = subharmonic_monotonicity_check(&u, &[0.002, 0.01, 0.03], 1e-9).unwrap();
        assert_eq!(r.trend, Trend::Nondecreasing);
        assert!(r.subharmonic);
        for s in &r.mean_slopes {
            assert!((s - 4.0).abs() < 1e-5, "{s}");
        }
        let neg = u.map(|_, v| -v);
        let r = subharmonic_monotonicity_check(&neg, &[0.002, 0.01, 0.03], 1e-9).unwrap();
        assert_eq!(r.trend, Trend::Nonincreasing);
        assert!(!r.subharmonic);
    }

    #[test]
    fn jump_blows_up_like_inverse_sqrt_t() {
        let r = 1.0;
        let v = GridFunction::centered(&[0.0, 0.0], 2.0, 0.01, |x| {
            if x[0] > 0.0 && x[0] * x[0] + x[1] * x[1] < r * r { 1.0 } else { 0.0 }
        })
        .unwrap();
        let tr = smoothing_trace(&v, &[0.0, 0.0], r, &[4e-2, 1e-2, 2.5e-3, 1e-3]).unwrap();
        assert!(!tr.lipschitz());
        assert!((tr.gradient_exponent + 0.5).abs() < 0.05, "{}", tr.gradient_exponent);
    }
}
