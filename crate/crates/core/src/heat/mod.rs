//! Heat semigroup on uniform Euclidean grids: Gaussian convolution, kernel envelopes, the
//! heat-flow cutoff, the smoothing pipeline for very weak solutions and the monotonicity of
//! P_t u for subharmonic u.

mod cutoff;
mod grid;
mod kernel;
mod pipeline;

pub use cutoff::{build_cutoff, ramp, CutoffReport, CutoffTime};
pub use grid::GridFunction;
pub use kernel::{kernel_bounds_check, sample_pairs, HeatKernel, KernelBoundsReport};
pub use pipeline::{
    default_t_grid, smoothing_pipeline, smoothing_trace, subharmonic_monotonicity_check,
    MonotonicityTrace, PipelineReport, SmoothingTrace, Trend,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Kernel truncation radius in standard deviations √(2t).
pub const KERNEL_RADIUS_SIGMAS: f64 = 6.0;

/// Smallest admissible time on a grid of spacing h (√t ≥ 2h).
pub fn min_time(h: f64) -> f64 {
    4.0 * h * h
}

/// Reach of the truncated kernel.
pub fn kernel_radius(t: f64) -> f64 {
    KERNEL_RADIUS_SIGMAS * (2.0 * t).sqrt()
}

/// Nodes farther than this from the box faces see no zero padding at time t.
pub fn trust_margin(t: f64, h: f64) -> f64 {
    kernel_radius(t) + h
}

fn kernel_weights(t: f64, h: f64) -> Vec<f64> {
    let reach = (kernel_radius(t) / h).ceil() as i64;
    let mut w: Vec<f64> = (-reach..=reach)
        .map(|j| {
            let x = j as f64 * h;
            (-x * x / (4.0 * t)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// P_t v by separable passes of the sampled Gaussian, renormalized to unit mass; values
/// outside the box are taken as zero.
pub fn heat_apply(v: &GridFunction, t: f64) -> Result<GridFunction> {
    if !(t > 0.0) {
        return Err(LabError::param("t", "heat time must be positive"));
    }
    if t.sqrt() < 2.0 * v.h {
        return Err(LabError::Resolution {
            what: format!("heat time {t} on a grid of spacing {}", v.h),
            min: min_time(v.h),
        });
    }
    let w = kernel_weights(t, v.h);
    let reach = (w.len() / 2) as i64;
    let strides = v.strides();
    let mut cur = v.values.clone();
    for axis in 0..v.dim() {
        let s = strides[axis];
        let len = v.shape[axis] as i64;
        let src = &cur;
        let next: Vec<f64> = (0..cur.len())
            .into_par_iter()
            .with_min_len(1024)
            .map(|i| {
                let k = ((i / s) % len as usize) as i64;
                let lo = (-reach).max(-k);
                let hi = reach.min(len - 1 - k);
                let mut acc = 0.0;
                for j in lo..=hi {
                    acc += w[(j + reach) as usize] * src[(i as i64 + j * s as i64) as usize];
                }
                acc
            })
            .collect();
        cur = next;
    }
    Ok(v.with_values(cur))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub l1: (f64, f64),
    pub l2: (f64, f64),
    pub linf: (f64, f64),
    /// (4πt)^{−n/2}‖v‖₁, the L¹ → L∞ bound for P_t.
    pub ultracontractive_bound: f64,
}

impl ContractionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.l1.1 <= self.l1.0 + tol
            && self.l2.1 <= self.l2.0 + tol
            && self.linf.1 <= self.linf.0 + tol
            && self.linf.1 <= self.ultracontractive_bound + tol
    }
}

/// Norms of v and P_t v.
pub fn contraction_report(v: &GridFunction, vt: &GridFunction, t: f64) -> ContractionReport {
    let n = v.dim() as f64;
    ContractionReport {
        l1: (v.l1_norm(), vt.l1_norm()),
        l2: (v.l2_norm(), vt.l2_norm()),
        linf: (v.linf_norm(), vt.linf_norm()),
        ultracontractive_bound: (4.0 * std::f64::consts::PI * t).powf(-n / 2.0) * v.l1_norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(var: f64, n: usize) -> impl Fn(&[f64]) -> f64 {
        move |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (2.0 * std::f64::consts::PI * var).powf(-(n as f64) / 2.0) * (-r2 / (2.0 * var)).exp()
        }
    }

    #[test]
    fn zero_stays_zero() {
        let v = GridFunction::centered(&[0.0, 0.0], 1.0, 0.05, |_| 0.0).unwrap();
        assert!(heat_apply(&v, 0.02).unwrap().values.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn gaussian_variance_adds_two_t() {
        let (var, t) = (0.02, 0.01);
        let v = GridFunction::centered(&[0.0, 0.0], 2.0, 0.02, gaussian(var, 2)).unwrap();
        let vt = heat_apply(&v, t).unwrap();
        let exact = gaussian(var + 2.0 * t, 2);
        let err = (0..vt.len())
            .map(|i| (vt.values[i] - exact(&vt.coords(i))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6 * exact(&[0.0, 0.0]), "{err}");
    }

    #[test]
    fn linear_data_is_invariant_in_the_window() {
        let v = GridFunction::centered(&[0.0, 0.0, 0.0], 1.6, 0.04, |x| x[0] - 0.5 * x[2]).unwrap();
        let t = 0.01;
        let vt = heat_apply(&v, t).unwrap();
        let margin = trust_margin(t, v.h);
        for i in 0..v.len() {
            if v.boundary_distance(i) > margin {
                assert!((vt.values[i] - v.values[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unresolved_time_is_refused() {
        let v = GridFunction::centered(&[0.0], 1.0, 0.1, |_| 1.0).unwrap();
        match heat_apply(&v, 0.01) {
            Err(LabError::Resolution { min, .. }) => assert!((min - 0.04).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(heat_apply(&v, 0.04).is_ok());
    }

    #[test]
    fn semigroup_on_grids() {
        let v = GridFunction::centered(&[0.0, 0.0], 2.0, 0.02, |x| {
            if x[0].abs() < 0.5 && x[1].abs() < 0.3 { 1.0 } else { 0.0 }
        })
        .unwrap();
        let a = heat_apply(&heat_apply(&v, 0.01).unwrap(), 0.02).unwrap();
        let b = heat_apply(&v, 0.03).unwrap();
        let d = a.l1_distance_where(&b, |_| true);
        assert!(d < 1e-6 * b.l1_norm(), "{d}");
    }

    #[test]
    fn contraction_and_ultracontractivity() {
        let v = GridFunction::centered(&[0.0, 0.0], 1.5, 0.02, |x| (7.0 * x[0]).sin() * (1.0 - x[1].abs()).max(0.0)).unwrap();
        for t in [0.002, 0.01, 0.05] {
            let vt = heat_apply(&v, t).unwrap();
            assert!(contraction_report(&v, &vt, t).holds(1e-9));
        }
    }
}
