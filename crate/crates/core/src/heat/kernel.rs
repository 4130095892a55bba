use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::dist;
use crate::error::{LabError, Result};
use crate::linalg::unit_ball_volume;

/// Euclidean heat kernel p_t(x, y) = (4πt)^{−n/2} exp(−|x−y|²/4t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatKernel {
    pub dim: usize,
}

impl HeatKernel {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Dimension {
                dim,
                reason: "kernel dimension must be positive",
            });
        }
        Ok(HeatKernel { dim })
    }

    pub fn density(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        let d = dist(x, y);
        (4.0 * PI * t).powf(-0.5 * self.dim as f64) * (-d * d / (4.0 * t)).exp()
    }

    /// ∇ₓ p_t(x, y) = −p (x − y)/2t
    pub fn gradient(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        let p = self.density(t, x, y);
        x.iter().zip(y).map(|(a, b)| -p * (a - b) / (2.0 * t)).collect()
    }

    /// ∂ₜp = Δ_y p = p(|x−y|²/4t² − n/2t)
    pub fn time_derivative(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        let d = dist(x, y);
        self.density(t, x, y) * (d * d / (4.0 * t * t) - 0.5 * self.dim as f64 / t)
    }

    /// Lebesgue measure of B_√t.
    pub fn ball_volume(&self, t: f64) -> f64 {
        unit_ball_volume(self.dim) * t.powf(0.5 * self.dim as f64)
    }

    /// Smallest C with the two-sided envelope C⁻¹V⁻¹e^{−d²/3t} ≤ p ≤ CV⁻¹e^{−d²/5t}, V = |B_√t|.
    /// With u = d²/t, pV = κe^{−u/4} for κ = ω_n(4π)^{−n/2}; the upper side needs κ and the
    /// lower side 1/κ, both attained at u = 0.
    pub fn envelope_constant(&self) -> f64 {
        let k = self.kappa();
        k.max(1.0 / k)
    }

    /// Smallest C with |∇p| ≤ C t^{−1/2}V⁻¹e^{−d²/5t}: κ sup √u/2·e^{−u/20}, attained at u = 10.
    pub fn gradient_constant(&self) -> f64 {
        self.kappa() * 10f64.sqrt() / 2.0 * (-0.5f64).exp()
    }

    /// Smallest C with |∂ₜp| ≤ C t^{−1}V⁻¹e^{−d²/5t}: κ sup e^{−u/20}|u/4 − n/2|.
    pub fn time_constant(&self) -> f64 {
        let n = self.dim as f64;
        self.kappa() * (0.5 * n).max(5.0 * (-1.0 - 0.1 * n).exp())
    }

    fn kappa(&self) -> f64 {
        unit_ball_volume(self.dim) * (4.0 * PI).powf(-0.5 * self.dim as f64)
    }

    /// ∫p_t(x, ·) by a tensor midpoint sum on [x − L, x + L]ⁿ, L = 14√t, spacing √t/8.
    pub fn mass(&self, t: f64, x: &[f64]) -> Result<f64> {
        if self.dim > 3 {
            return Err(LabError::Dimension {
                dim: self.dim,
                reason: "mass quadrature is implemented up to dimension 3",
            });
        }
        let s = t.sqrt();
        let h = s / 8.0;
        let k = (14.0 * s / h).ceil() as i64;
        let n = self.dim;
        let side = (2 * k + 1) as usize;
        let total = side.pow(n as u32);
        let sum: f64 = (0..total)
            .into_par_iter()
            .with_min_len(4096)
            .map(|mut i| {
                let mut y = [0.0; 3];
                for a in (0..n).rev() {
                    y[a] = x[a] + ((i % side) as i64 - k) as f64 * h;
                    i /= side;
                }
                self.density(t, x, &y[..n])
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        Ok(sum * h.powi(n as i32))
    }

    /// |∫p_s(x,z)p_t(z,y)dz − p_{s+t}(x,y)| relative to p_{s+t}(x,y), for n ≤ 2.
    pub fn semigroup_residual(&self, s: f64, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        if self.dim > 2 {
            return Err(LabError::Dimension {
                dim: self.dim,
                reason: "semigroup quadrature is implemented up to dimension 2",
            });
        }
        let scale = s.min(t).sqrt();
        let h = scale / 8.0;
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        let reach = dist(x, y) / 2.0 + 14.0 * s.max(t).sqrt();
        let k = (reach / h).ceil() as i64;
        let n = self.dim;
        let side = (2 * k + 1) as usize;
        let mut acc = 0.0;
        let mut z = [0.0; 2];
        for mut i in 0..side.pow(n as u32) {
            for a in (0..n).rev() {
                z[a] = mid[a] + ((i % side) as i64 - k) as f64 * h;
                i /= side;
            }
            acc += self.density(s, x, &z[..n]) * self.density(t, &z[..n], y);
        }
        acc *= h.powi(n as i32);
        let exact = self.density(s + t, x, y);
        Ok((acc - exact).abs() / exact)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundsReport {
    pub dim: usize,
    pub samples: usize,
    /// Closed-form smallest constants for the value, gradient and time-derivative envelopes.
    pub envelope_constant: f64,
    pub gradient_constant: f64,
    pub time_constant: f64,
    /// Largest constants the samples require (never above the closed forms).
    pub sampled_envelope: f64,
    pub sampled_gradient: f64,
    pub sampled_time: f64,
    /// Every sample sits inside all three envelopes with the closed-form constants.
    pub ordering_holds: bool,
    pub violations: usize,
    /// p_t(x,x)·|B_√t| at each t, equal to ω_n(4π)^{−n/2}.
    pub diagonal: Vec<f64>,
    /// |∫p_t − 1| at each t.
    pub mass_errors: Vec<f64>,
    pub t_grid: Vec<f64>,
}

/// Random pairs (x, y, t) with d²/t spread over [0, 40].
pub fn sample_pairs(dim: usize, count: usize, t_grid: &[f64], seed: u64) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t = t_grid[rng.gen_range(0..t_grid.len())];
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: f64 = rng.gen_range(0.0..40.0);
            let mut dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let d = (u * t).sqrt();
            dir.iter_mut().for_each(|v| *v *= d / l);
            let y = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
            (x, y, t)
        })
        .collect()
}

pub fn kernel_bounds_check(
    kernel: &HeatKernel,
    t_grid: &[f64],
    pairs: &[(Vec<f64>, Vec<f64>, f64)],
) -> Result<KernelBoundsReport> {
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(LabError::param("t", "times must be positive"));
    }
    let (ce, cg, ct) = (kernel.envelope_constant(), kernel.gradient_constant(), kernel.time_constant());
    let mut se: f64 = 0.0;
    let mut sg: f64 = 0.0;
    let mut st: f64 = 0.0;
    let mut violations = 0;
    for (x, y, t) in pairs {
        let t = *t;
        let d2 = dist(x, y).powi(2);
        let v = kernel.ball_volume(t);
        let p = kernel.density(t, x, y);
        let lower = (-d2 / (3.0 * t)).exp() / v;
        let upper = (-d2 / (5.0 * t)).exp() / v;
        let gnorm = kernel.gradient(t, x, y).iter().map(|g| g * g).sum::<f64>().sqrt();
        let dt = kernel.time_derivative(t, x, y).abs();
        let need_e = (p / upper).max(lower / p);
        let need_g = gnorm * t.sqrt() / upper;
        let need_t = dt * t / upper;
        se = se.max(need_e);
        sg = sg.max(need_g);
        st = st.max(need_t);
        let ok = lower / ce <= p && p <= ce * upper && need_g <= cg * (1.0 + 1e-12) && need_t <= ct * (1.0 + 1e-12);
        if !ok {
            violations += 1;
        }
    }
    let origin = vec![0.0; kernel.dim];
    let diagonal = t_grid
        .iter()
        .map(|t| kernel.density(*t, &origin, &origin) * kernel.ball_volume(*t))
        .collect();
    let mass_errors = t_grid
        .iter()
        .map(|t| kernel.mass(*t, &origin).map(|m| (m - 1.0).abs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelBoundsReport {
        dim: kernel.dim,
        samples: pairs.len(),
        envelope_constant: ce,
        gradient_constant: cg,
        time_constant: ct,
        sampled_envelope: se,
        sampled_gradient: sg,
        sampled_time: st,
        ordering_holds: violations == 0,
        violations,
        diagonal,
        mass_errors,
        t_grid: t_grid.to_vec(),
    })
}
