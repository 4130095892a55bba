use serde::{Deserialize, Serialize};

use super::{CoefficientField, DEFAULT_SAMPLES};
use crate::error::{LabError, Result};
use crate::linalg::halton_ball;

/// Sampled nondecreasing modulus t ↦ ω(t) on an increasing grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiniModulus {
    t: Vec<f64>,
    omega: Vec<f64>,
}

impl DiniModulus {
    /// Validates the samples: increasing positive grid, values ≥ 0 and nondecreasing.
    pub fn new(t: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if t.len() != omega.len() || t.is_empty() {
            return Err(LabError::InsufficientData(
                "modulus needs matching nonempty grid and values".into(),
            ));
        }
        if t[0] <= 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::param("t", "grid must be positive and increasing"));
        }
        if omega.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(LabError::param("omega", "values must be finite and nonnegative"));
        }
        if omega.windows(2).any(|w| w[1] < w[0]) {
            return Err(LabError::param("omega", "values must be nondecreasing"));
        }
        Ok(DiniModulus { t, omega })
    }

    /// Replaces the values by their running maximum, then validates.
    pub fn monotone_envelope(t: Vec<f64>, mut omega: Vec<f64>) -> Result<Self> {
        for k in 1..omega.len() {
            omega[k] = omega[k].max(omega[k - 1]);
        }
        Self::new(t, omega)
    }

    /// Samples an analytic modulus on `grid` (running maximum applied).
    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::monotone_envelope(grid.to_vec(), grid.iter().map(|&t| f(t)).collect())
    }

    /// `per_decade` log-spaced radii per decade over `decades` decades ending at `t_max`.
    pub fn log_grid(t_max: f64, decades: usize, per_decade: usize) -> Vec<f64> {
        let m = decades * per_decade;
        (0..=m)
            .map(|k| t_max * 10f64.powf(k as f64 / per_decade as f64 - decades as f64))
            .collect()
    }

    /// Default grid: 40 per decade, two decades below `t_max`.
    pub fn default_grid(t_max: f64) -> Vec<f64> {
        Self::log_grid(t_max, 2, 40)
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    pub fn is_zero(&self) -> bool {
        self.omega.iter().all(|w| *w == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        DiniModulus {
            t: self.t.clone(),
            omega: self.omega.iter().map(|w| w * c.abs()).collect(),
        }
    }

    /// ω(t): geometric interpolation inside the grid, ω(t₀) below it, ω(t_max) above it.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.omega[0];
        }
        if t >= self.t[n - 1] {
            return self.omega[n - 1];
        }
        let k = self.t.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let (w0, w1) = (self.omega[k], self.omega[k + 1]);
        if w0 > 0.0 {
            let s = (t / t0).ln() / (t1 / t0).ln();
            w0 * (w1 / w0).powf(s)
        } else {
            w1 * (t - t0) / (t1 - t0)
        }
    }

    /// ∫ ω/t over [t₀, s] of the interpolant.
    fn body_upto(&self, s: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.t.len() - 1 {
            let (t0, t1) = (self.t[k], self.t[k + 1]);
            if t0 >= s {
                break;
            }
            let t1c = t1.min(s);
            total += segment_integral(t0, t1c, self.omega[k], self.value_at(t1c));
        }
        total
    }
}

fn segment_integral(t0: f64, t1: f64, w0: f64, w1: f64) -> f64 {
    let d = (t1 / t0).ln();
    if w0 > 0.0 {
        if (w1 - w0).abs() <= 1e-15 * w0 {
            w0 * d
        } else {
            let p = (w1 / w0).ln() / d;
            (w1 - w0) / p
        }
    } else {
        // linear in t from 0
        w1 / (t1 - t0) * ((t1 - t0) - t0 * d)
    }
}

/// Model used for ∫₀^{t₀} ω/t below the sampled grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// ω vanishes at the bottom of the grid.
    Zero,
    /// ω ≈ c·t^p
    Power { coefficient: f64, exponent: f64 },
    /// ω ≈ c·log(e/t)^{−β}
    Logarithmic { coefficient: f64, exponent: f64 },
}

/// Logarithmic tails with exponent at most this are treated as the divergent harmonic tail.
pub const LOG_EXPONENT_THRESHOLD: f64 = 1.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DiniIntegral {
    Finite {
        value: f64,
        body: f64,
        tail: f64,
        model: TailModel,
    },
    Divergent {
        model: TailModel,
    },
}

impl DiniIntegral {
    pub fn value(&self) -> Option<f64> {
        match self {
            DiniIntegral::Finite { value, .. } => Some(*value),
            DiniIntegral::Divergent { .. } => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, DiniIntegral::Divergent { .. })
    }
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let slope = crate::linalg::fit_slope(x, y);
    let n = x.len() as f64;
    let icpt = (y.iter().sum::<f64>() - slope * x.iter().sum::<f64>()) / n;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, icpt, rms)
}

fn fit_tail(w: &DiniModulus) -> TailModel {
    if w.omega[0] == 0.0 {
        return TailModel::Zero;
    }
    // first decade of the grid, or everything when the grid is shorter
    let t0 = w.t[0];
    let m = w.t.iter().take_while(|&&t| t <= 10.0 * t0 * (1.0 + 1e-12)).count().max(2);
    let m = m.min(w.t.len());
    if m < 2 {
        return TailModel::Power {
            coefficient: w.omega[0],
            exponent: 0.0,
        };
    }
    let ly: Vec<f64> = w.omega[..m].iter().map(|v| v.ln()).collect();
    let lt: Vec<f64> = w.t[..m].iter().map(|t| t.ln()).collect();
    let ll: Vec<f64> = w.t[..m].iter().map(|t| (1.0 - t.ln()).ln()).collect();
    let (p, cp, rp) = least_squares(&lt, &ly);
    let (mb, cl, rl) = least_squares(&ll, &ly);
    if rl < rp {
        TailModel::Logarithmic {
            coefficient: cl.exp(),
            exponent: -mb,
        }
    } else {
        TailModel::Power {
            coefficient: cp.exp(),
            exponent: p,
        }
    }
}

fn tail_value(model: TailModel, t0: f64, w0: f64) -> Option<f64> {
    match model {
        TailModel::Zero => Some(0.0),
        TailModel::Power { exponent, .. } => (exponent > 1e-9).then(|| w0 / exponent),
        TailModel::Logarithmic { exponent, .. } => {
            (exponent > LOG_EXPONENT_THRESHOLD).then(|| w0 * (1.0 - t0.ln()) / (exponent - 1.0))
        }
    }
}

/// ∫₀^{t_max} ω(t)/t dt: exact integral of the geometric interpolant on the grid plus a fitted tail.
pub fn dini_integral(w: &DiniModulus) -> DiniIntegral {
    dini_integral_upto(w, *w.t.last().unwrap())
}

/// ∫₀^s ω(t)/t dt.
pub fn dini_integral_upto(w: &DiniModulus, s: f64) -> DiniIntegral {
    let model = fit_tail(w);
    match tail_value(model, w.t[0], w.omega[0]) {
        None => DiniIntegral::Divergent { model },
        Some(tail) => {
            if s <= w.t[0] {
                let tail_s = match model {
                    TailModel::Zero => 0.0,
                    _ => tail_value(model, s, w.omega[0] * tail_ratio(model, s, w.t[0])).unwrap(),
                };
                return DiniIntegral::Finite {
                    value: tail_s,
                    body: 0.0,
                    tail: tail_s,
                    model,
                };
            }
            let body = w.body_upto(s);
            DiniIntegral::Finite {
                value: body + tail,
                body,
                tail,
                model,
            }
        }
    }
}

fn tail_ratio(model: TailModel, s: f64, t0: f64) -> f64 {
    match model {
        TailModel::Zero => 0.0,
        TailModel::Power { exponent, .. } => (s / t0).powf(exponent),
        TailModel::Logarithmic { exponent, .. } => ((1.0 - s.ln()) / (1.0 - t0.ln())).powf(-exponent),
    }
}

/// ω(t) = max over quasi-random samples of B_t(0) of the spectral norm of A − Ā,
/// made nondecreasing by a running maximum.
pub fn estimate_modulus(
    a: &CoefficientField,
    abar: &CoefficientField,
    grid: &[f64],
) -> Result<DiniModulus> {
    estimate_modulus_with(a, abar, grid, DEFAULT_SAMPLES)
}

pub fn estimate_modulus_with(
    a: &CoefficientField,
    abar: &CoefficientField,
    grid: &[f64],
    samples: usize,
) -> Result<DiniModulus> {
    if a.dim() != abar.dim() {
        return Err(LabError::Dimension {
            dim: abar.dim(),
            reason: "fields must share a dimension",
        });
    }
    if grid.is_empty() || samples == 0 {
        return Err(LabError::EmptySample(grid.first().copied().unwrap_or(0.0)));
    }
    let pts = halton_ball(a.dim(), samples);
    let mut x = vec![0.0; a.dim()];
    let omega = grid
        .iter()
        .map(|&t| {
            pts.iter()
                .map(|p| {
                    for (xi, pi) in x.iter_mut().zip(p) {
                        *xi = pi * t;
                    }
                    a.at(&x).sub(&abar.at(&x)).sym_op_norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    DiniModulus::monotone_envelope(grid.to_vec(), omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{Perturbation, Perturbed};
    use std::sync::Arc;

    fn grid() -> Vec<f64> {
        DiniModulus::default_grid(1.0)
    }

    #[test]
    fn linear_modulus_integrates_to_one() {
        let w = DiniModulus::from_fn(&grid(), |t| t).unwrap();
        let v = dini_integral(&w).value().unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn square_root_modulus_integrates_to_two() {
        let w = DiniModulus::from_fn(&grid(), |t| t.sqrt()).unwrap();
        let v = dini_integral(&w).value().unwrap();
        assert!((v - 2.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn log_modulus_diverges() {
        let w = DiniModulus::from_fn(&grid(), |t| 1.0 / (1.0 - t.ln())).unwrap();
        assert!(dini_integral(&w).is_divergent());
        let w2 = DiniModulus::from_fn(&grid(), |t| (1.0 - t.ln()).powf(-2.0)).unwrap();
        // ∫₀¹ log(e/t)^{-2} dt/t = 1
        let v = dini_integral(&w2).value().unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn constant_modulus_diverges() {
        let w = DiniModulus::from_fn(&grid(), |_| 0.3).unwrap();
        assert!(dini_integral(&w).is_divergent());
    }

    #[test]
    fn zero_modulus() {
        let w = DiniModulus::from_fn(&grid(), |_| 0.0).unwrap();
        assert_eq!(dini_integral(&w).value(), Some(0.0));
    }

    #[test]
    fn partial_integral() {
        let w = DiniModulus::from_fn(&grid(), |t| t.sqrt()).unwrap();
        let v = dini_integral_upto(&w, 0.25).value().unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        let v = dini_integral_upto(&w, 0.0025).value().unwrap();
        assert!((v - 0.1).abs() < 1e-9, "{v}");
    }

    #[test]
    fn rejects_decreasing_values() {
        assert!(DiniModulus::new(vec![0.1, 1.0], vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn modulus_of_identical_fields_vanishes() {
        let a = CoefficientField::convex_graph(&[1.0, 1.0, 1.0]).unwrap();
        let w = estimate_modulus(&a, &a, &grid()).unwrap();
        assert!(w.is_zero());
    }

    #[test]
    fn constant_offset_modulus() {
        let base = CoefficientField::convex_graph(&[1.0, 2.0, 3.0]).unwrap();
        let a = CoefficientField::from_model(
            Perturbed {
                base: base.model().clone(),
                kind: Perturbation::OffsetFirst { eps: 0.05 },
            },
            1.0,
        )
        .unwrap();
        let w = estimate_modulus(&a, &base, &grid()).unwrap();
        assert!(w.values().iter().all(|v| (v - 0.05).abs() < 1e-12));
    }

    #[test]
    fn holder_modulus_matches_envelope() {
        let base = CoefficientField::convex_graph(&[1.0, 1.0, 1.0]).unwrap();
        let kind = Perturbation::Holder { eps: 0.2, beta: 0.5 };
        let a = CoefficientField::new(
            Arc::new(Perturbed {
                base: base.model().clone(),
                kind,
            }),
            1.0,
        )
        .unwrap();
        let w = estimate_modulus(&a, &base, &grid()).unwrap();
        let (_, big) = base.ellipticity();
        for (t, v) in w.grid().iter().zip(w.values()) {
            let env = kind.envelope(*t, big);
            assert!((v - env).abs() <= 0.1 * env, "t={t} {v} vs {env}");
        }
    }
}
