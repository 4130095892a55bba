//! Harmonic functions on metric cones by separation of variables.
//!
//! A cone over a cross-section Σ carries the measure r^{N−1}dr d𝔪_Σ. Eigenfunctions
//! −Δ_Σφᵢ = λᵢφᵢ give harmonic functions r^{αᵢ}φᵢ with λᵢ = αᵢ(N + αᵢ − 2).

mod harmonics;

pub use harmonics::real_spherical_harmonic;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::linalg::gauss_legendre;

/// Default truncation.
pub const DEFAULT_MODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossSection {
    /// Circle of length θ; N = 2.
    Circle { theta: f64 },
    /// Round 2-sphere of radius s; N = 3.
    Sphere { s: f64 },
}

/// One eigenfunction of the cross-section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub eigenvalue: f64,
    /// Frequency k on circles, degree l on spheres.
    pub degree: usize,
    /// Cosine (≥ 0) / sine (< 0) on circles; order m on spheres.
    pub order: i32,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionSpectrum {
    pub section: CrossSection,
    pub cone_dim: f64,
    pub modes: Vec<Mode>,
    pub total_measure: f64,
}

/// Circle of length θ ∈ (0, 2π]: λ_k = (2πk/θ)², cosine and sine modes for k ≥ 1.
pub fn circle_spectrum(theta: f64, modes: usize) -> Result<CrossSectionSpectrum> {
    if !(theta > 0.0) || theta > 2.0 * PI + 1e-12 {
        return Err(LabError::param("theta", "circle length must lie in (0, 2π]"));
    }
    if modes == 0 {
        return Err(LabError::param("modes", "need at least one mode"));
    }
    let mut list = vec![Mode {
        eigenvalue: 0.0,
        degree: 0,
        order: 0,
        multiplicity: 1,
    }];
    let mut k = 1;
    while list.len() < modes {
        let lam = (2.0 * PI * k as f64 / theta).powi(2);
        for order in [1, -1] {
            if list.len() < modes {
                list.push(Mode {
                    eigenvalue: lam,
                    degree: k,
                    order,
                    multiplicity: 2,
                });
            }
        }
        k += 1;
    }
    Ok(CrossSectionSpectrum {
        section: CrossSection::Circle { theta },
        cone_dim: 2.0,
        modes: list,
        total_measure: theta,
    })
}

/// Round sphere of radius s ∈ (0, 1] (N = 3): λ_l = l(l+1)/s² with multiplicity 2l+1.
/// Degrees up to 3 are available.
pub fn sphere_spectrum(s: f64, modes: usize) -> Result<CrossSectionSpectrum> {
    if !(s > 0.0) || s > 1.0 + 1e-12 {
        return Err(LabError::param("s", "sphere radius must lie in (0, 1]"));
    }
    if modes == 0 || modes > 16 {
        return Err(LabError::param("modes", "sphere spectra carry 1 to 16 modes"));
    }
    let mut list = Vec::new();
    'outer: for l in 0..=3usize {
        for m in -(l as i32)..=(l as i32) {
            if list.len() == modes {
                break 'outer;
            }
            list.push(Mode {
                eigenvalue: (l * (l + 1)) as f64 / (s * s),
                degree: l,
                order: m,
                multiplicity: 2 * l + 1,
            });
        }
    }
    Ok(CrossSectionSpectrum {
        section: CrossSection::Sphere { s },
        cone_dim: 3.0,
        modes: list,
        total_measure: 4.0 * PI * s * s,
    })
}

/// Parses `cone:circle:theta=<v>` or `cone:sphere:s=<v>`.
pub fn parse_cone(spec: &str, modes: usize) -> Result<CrossSectionSpectrum> {
    let bad = |r: &str| LabError::parse(spec, r);
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let value = |kv: &str, key: &str| -> Result<f64> {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        if k.trim() != key {
            return Err(bad(&format!("unknown key `{}`", k.trim())));
        }
        v.trim().parse::<f64>().map_err(|_| bad("value is not a number"))
    };
    match parts.as_slice() {
        ["cone", "circle", kv] => circle_spectrum(value(kv, "theta")?, modes),
        ["cone", "sphere", kv] => sphere_spectrum(value(kv, "s")?, modes),
        _ => Err(bad("expected cone:circle:theta=<v> or cone:sphere:s=<v>")),
    }
}

/// α ≥ 0 solving α(N + α − 2) = λ, in cancellation-free form.
pub fn exponent_from_eigenvalue(lambda: f64, n: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(LabError::param("lambda", "eigenvalue must be nonnegative"));
    }
    if !(n >= 2.0) {
        return Err(LabError::param("N", "cone dimension must be at least 2"));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let b = n - 2.0;
    Ok(2.0 * lambda / (b + (b * b + 4.0 * lambda).sqrt()))
}

/// Point on a cross-section: an angle on circles, a unit vector on spheres.
#[derive(Clone, Copy, Debug)]
pub enum SectionPoint {
    Angle(f64),
    Direction([f64; 3]),
}

impl CrossSectionSpectrum {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// φᵢ at p, normalized in L²(Σ, 𝔪_Σ).
    pub fn eval_mode(&self, i: usize, p: SectionPoint) -> f64 {
        let mode = &self.modes[i];
        match (self.section, p) {
            (CrossSection::Circle { theta }, SectionPoint::Angle(psi)) => {
                if mode.degree == 0 {
                    return 1.0 / theta.sqrt();
                }
                let w = 2.0 * PI * mode.degree as f64 / theta;
                let amp = (2.0 / theta).sqrt();
                if mode.order >= 0 {
                    amp * (w * psi).cos()
                } else {
                    amp * (w * psi).sin()
                }
            }
            (CrossSection::Sphere { s }, SectionPoint::Direction(u)) => {
                real_spherical_harmonic(mode.degree, mode.order, &u) / s
            }
            _ => panic!("section point does not match the cross-section"),
        }
    }

    /// |∇_Σ φᵢ|-component: derivative along the circle, or the tangential gradient on the sphere.
    pub fn tangential_gradient(&self, i: usize, p: SectionPoint) -> [f64; 3] {
        let mode = &self.modes[i];
        match (self.section, p) {
            (CrossSection::Circle { theta }, SectionPoint::Angle(psi)) => {
                if mode.degree == 0 {
                    return [0.0; 3];
                }
                let w = 2.0 * PI * mode.degree as f64 / theta;
                let amp = (2.0 / theta).sqrt();
                let d = if mode.order >= 0 {
                    -amp * w * (w * psi).sin()
                } else {
                    amp * w * (w * psi).cos()
                };
                [d, 0.0, 0.0]
            }
            (CrossSection::Sphere { s }, SectionPoint::Direction(u)) => {
                // gradient of the homogeneous extension minus its radial part, scaled to radius s
                let l = mode.degree;
                let h = 1e-4;
                let mut g = [0.0; 3];
                for (k, gk) in g.iter_mut().enumerate() {
                    let mut a = u;
                    let mut b = u;
                    a[k] += h;
                    b[k] -= h;
                    *gk = (real_spherical_harmonic(l, mode.order, &a)
                        - real_spherical_harmonic(l, mode.order, &b))
                        / (2.0 * h);
                }
                let y = real_spherical_harmonic(l, mode.order, &u);
                [0, 1, 2].map(|k| (g[k] - l as f64 * y * u[k]) / (s * s))
            }
            _ => panic!("section point does not match the cross-section"),
        }
    }

    /// Quadrature rule on Σ with roughly `q` points per direction: (points, weights).
    pub fn quadrature(&self, q: usize) -> (Vec<SectionPoint>, Vec<f64>) {
        match self.section {
            CrossSection::Circle { theta } => {
                let w = theta / q as f64;
                (
                    (0..q).map(|j| SectionPoint::Angle(j as f64 * w)).collect(),
                    vec![w; q],
                )
            }
            CrossSection::Sphere { s } => {
                let (z, wz) = gauss_legendre(q);
                let m = 2 * q;
                let mut pts = Vec::with_capacity(q * m);
                let mut wts = Vec::with_capacity(q * m);
                for (zi, wi) in z.iter().zip(&wz) {
                    let rho = (1.0 - zi * zi).sqrt();
                    for j in 0..m {
                        let phi = 2.0 * PI * j as f64 / m as f64;
                        pts.push(SectionPoint::Direction([rho * phi.cos(), rho * phi.sin(), *zi]));
                        wts.push(wi * 2.0 * PI / m as f64 * s * s);
                    }
                }
                (pts, wts)
            }
        }
    }

    /// Largest deviation of the quadrature Gram matrix from the identity.
    pub fn gram_residual(&self, q: usize) -> f64 {
        let (pts, wts) = self.quadrature(q);
        let m = self.len();
        let vals: Vec<Vec<f64>> = (0..m)
            .map(|i| pts.iter().map(|p| self.eval_mode(i, *p)).collect())
            .collect();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..=i {
                let g: f64 = (0..pts.len()).map(|k| wts[k] * vals[i][k] * vals[j][k]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// First nonzero eigenvalue.
    pub fn first_eigenvalue(&self) -> Option<f64> {
        self.modes.iter().map(|m| m.eigenvalue).find(|l| *l > 0.0)
    }
}

/// Truncated expansion u(r, ξ) = Σ cᵢ r^{αᵢ} φᵢ(ξ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeHarmonic {
    pub spectrum: CrossSectionSpectrum,
    pub coefficients: Vec<f64>,
    pub exponents: Vec<f64>,
    /// Estimate of Σ_{i>M} cᵢ² (L² norm of the data not captured by the retained modes).
    pub tail: f64,
}

impl ConeHarmonic {
    /// Exponents from the spectrum; `coefficients` may be shorter than the spectrum.
    pub fn new(spectrum: CrossSectionSpectrum, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() > spectrum.len() {
            return Err(LabError::param("coefficients", "more coefficients than modes"));
        }
        let exponents = spectrum.modes[..coefficients.len()]
            .iter()
            .map(|m| exponent_from_eigenvalue(m.eigenvalue, spectrum.cone_dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConeHarmonic {
            spectrum,
            coefficients,
            exponents,
            tail: 0.0,
        })
    }

    /// Arbitrary exponents, bypassing the eigenvalue relation (used for negative controls).
    pub fn with_exponents(spectrum: CrossSectionSpectrum, coefficients: Vec<f64>, exponents: Vec<f64>) -> Self {
        assert_eq!(coefficients.len(), exponents.len());
        ConeHarmonic {
            spectrum,
            coefficients,
            exponents,
            tail: 0.0,
        }
    }

    /// Single mode cᵢ = 1.
    pub fn mode(spectrum: CrossSectionSpectrum, i: usize) -> Result<Self> {
        let mut c = vec![0.0; i + 1];
        c[i] = 1.0;
        Self::new(spectrum, c)
    }

    pub fn truncation(&self) -> usize {
        self.coefficients.len()
    }

    /// max |αᵢ(N + αᵢ − 2) − λᵢ|
    pub fn exponent_residual(&self) -> f64 {
        let n = self.spectrum.cone_dim;
        self.exponents
            .iter()
            .zip(&self.spectrum.modes)
            .map(|(a, m)| (a * (n + a - 2.0) - m.eigenvalue).abs())
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, r: f64, p: SectionPoint) -> f64 {
        self.coefficients
            .iter()
            .zip(&self.exponents)
            .enumerate()
            .map(|(i, (c, a))| c * r.powf(*a) * self.spectrum.eval_mode(i, p))
            .sum()
    }

    /// |∇u|² = |∂_r u|² + r⁻²|∇_Σ u|² at (r, p).
    pub fn gradient_sq(&self, r: f64, p: SectionPoint) -> f64 {
        let mut ur = 0.0;
        let mut ut = [0.0; 3];
        for (i, (c, a)) in self.coefficients.iter().zip(&self.exponents).enumerate() {
            if *c == 0.0 {
                continue;
            }
            ur += c * a * r.powf(a - 1.0) * self.spectrum.eval_mode(i, p);
            let g = self.spectrum.tangential_gradient(i, p);
            for k in 0..3 {
                ut[k] += c * r.powf(*a) * g[k];
            }
        }
        ur * ur + (ut[0] * ut[0] + ut[1] * ut[1] + ut[2] * ut[2]) / (r * r)
    }
}

/// cᵢ = ∫_Σ g φᵢ d𝔪_Σ by quadrature at q and 2q points; the tail records ‖g‖² − Σcᵢ².
pub fn expand_boundary_data(
    g: impl Fn(SectionPoint) -> f64,
    spectrum: &CrossSectionSpectrum,
    modes: usize,
    tol: f64,
) -> Result<ConeHarmonic> {
    let modes = modes.min(spectrum.len());
    let project = |q: usize| -> (Vec<f64>, f64) {
        let (pts, wts) = spectrum.quadrature(q);
        let gv: Vec<f64> = pts.iter().map(|p| g(*p)).collect();
        let c = (0..modes)
            .map(|i| {
                pts.iter()
                    .zip(&wts)
                    .zip(&gv)
                    .map(|((p, w), v)| w * v * spectrum.eval_mode(i, *p))
                    .sum()
            })
            .collect();
        let norm2 = wts.iter().zip(&gv).map(|(w, v)| w * v * v).sum();
        (c, norm2)
    };
    let q = 64;
    let (c1, _) = project(q);
    let (c2, norm2) = project(2 * q);
    let drift = c1
        .iter()
        .zip(&c2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift > tol {
        return Err(LabError::Quadrature(format!(
            "projection changed by {drift:e} between {q} and {} points",
            2 * q
        )));
    }
    let captured: f64 = c2.iter().map(|c| c * c).sum();
    let mut h = ConeHarmonic::new(spectrum.clone(), c2)?;
    h.tail = (norm2 - captured).max(0.0);
    Ok(h)
}

/// 𝔪_c(B_r(o)) = r^N/N·𝔪_Σ(Σ)
pub fn cone_ball_volume(r: f64, n: f64, total_measure: f64) -> f64 {
    r.powf(n) / n * total_measure
}

/// Mean of |∇u|² over B_r(o): (N/𝔪_Σ)·Σ_{αᵢ>0} cᵢ²αᵢ r^{2αᵢ−2}.
pub fn energy_average(h: &ConeHarmonic, r: f64) -> f64 {
    let s = &h.spectrum;
    let sum: f64 = h
        .coefficients
        .iter()
        .zip(&h.exponents)
        .filter(|(_, a)| **a > 0.0)
        .map(|(c, a)| c * c * a * r.powf(2.0 * a - 2.0))
        .sum();
    s.cone_dim / s.total_measure * sum
}

/// Same average by direct quadrature of |∂_r u|² + r⁻²|∇_Σ u|² over the cone ball.
pub fn energy_average_quadrature(h: &ConeHarmonic, r: f64, radial: usize, q: usize) -> f64 {
    let s = &h.spectrum;
    let (x, w) = gauss_legendre(radial);
    let (pts, wts) = s.quadrature(q);
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let rho = 0.5 * r * (xi + 1.0);
        let jac = 0.5 * r * wi * rho.powf(s.cone_dim - 1.0);
        let inner: f64 = pts.iter().zip(&wts).map(|(p, wp)| wp * h.gradient_sq(rho, *p)).sum();
        total += jac * inner;
    }
    total / cone_ball_volume(r, s.cone_dim, s.total_measure)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub r_inner: f64,
    pub r_outer: f64,
    pub inner_average: f64,
    pub outer_average: f64,
    /// Modes with 0 < α < 1, whose terms decrease in r.
    pub sub_linear_modes: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub radii: Vec<f64>,
    pub averages: Vec<f64>,
    pub violations: Vec<MonotonicityViolation>,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the energy average is nondecreasing over consecutive radii (tolerance 1e−10).
pub fn check_monotonicity(h: &ConeHarmonic, radii: &[f64]) -> Result<MonotonicityReport> {
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::param("radii", "must be positive and strictly increasing"));
    }
    let averages: Vec<f64> = radii.iter().map(|r| energy_average(h, *r)).collect();
    let sub_linear: Vec<(usize, f64)> = h
        .exponents
        .iter()
        .enumerate()
        .filter(|(i, a)| **a > 0.0 && **a < 1.0 && h.coefficients[*i] != 0.0)
        .map(|(i, a)| (i, *a))
        .collect();
    let violations = (1..radii.len())
        .filter(|&k| averages[k] < averages[k - 1] - 1e-10 * averages[k - 1].abs().max(1.0))
        .map(|k| MonotonicityViolation {
            r_inner: radii[k - 1],
            r_outer: radii[k],
            inner_average: averages[k - 1],
            outer_average: averages[k],
            sub_linear_modes: sub_linear.clone(),
        })
        .collect();
    Ok(MonotonicityReport {
        radii: radii.to_vec(),
        averages,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_examples() {
        let flat = circle_spectrum(2.0 * PI, 16).unwrap();
        for m in &flat.modes {
            assert!((m.eigenvalue - (m.degree * m.degree) as f64).abs() < 1e-12);
        }
        let half = circle_spectrum(PI, 16).unwrap();
        assert!((half.modes[1].eigenvalue - 4.0).abs() < 1e-12);
        assert_eq!(exponent_from_eigenvalue(4.0, 2.0).unwrap(), 2.0);
        let s = circle_spectrum(1.5 * PI, 4).unwrap();
        let a = exponent_from_eigenvalue(s.modes[1].eigenvalue, 2.0).unwrap();
        assert!((a - 4.0 / 3.0).abs() < 1e-12);
        assert!(circle_spectrum(7.0, 4).is_err());
        assert_eq!(flat.len(), 16);
        assert_eq!(flat.modes[15].degree, 8);
    }

    #[test]
    fn sphere_examples() {
        let unit = sphere_spectrum(1.0, 16).unwrap();
        assert_eq!(exponent_from_eigenvalue(unit.modes[1].eigenvalue, 3.0).unwrap(), 1.0);
        let s = sphere_spectrum(std::f64::consts::FRAC_1_SQRT_2, 16).unwrap();
        let a = exponent_from_eigenvalue(s.modes[1].eigenvalue, 3.0).unwrap();
        assert!((s.modes[1].eigenvalue - 4.0).abs() < 1e-12);
        assert!((a - (17f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
        assert!((sphere_spectrum(0.5, 4).unwrap().modes[1].eigenvalue - 8.0).abs() < 1e-12);
        assert!(sphere_spectrum(1.5, 4).is_err());
    }

    #[test]
    fn exponent_edge_cases() {
        assert_eq!(exponent_from_eigenvalue(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(exponent_from_eigenvalue(2.0, 3.0).unwrap(), 1.0);
        assert!(exponent_from_eigenvalue(-1.0, 3.0).is_err());
    }

    #[test]
    fn orthonormal_modes() {
        assert!(circle_spectrum(1.3, 16).unwrap().gram_residual(64) < 1e-12);
        assert!(sphere_spectrum(0.6, 16).unwrap().gram_residual(16) < 1e-12);
    }

    #[test]
    fn expansion_of_cosine() {
        let s = circle_spectrum(2.0 * PI, 16).unwrap();
        let h = expand_boundary_data(
            |p| match p {
                SectionPoint::Angle(x) => x.cos(),
                _ => unreachable!(),
            },
            &s,
            16,
            1e-10,
        )
        .unwrap();
        assert!((h.coefficients[1] - PI.sqrt()).abs() < 1e-12);
        assert!(h.coefficients.iter().enumerate().all(|(i, c)| i == 1 || c.abs() < 1e-12));
        assert!((energy_average(&h, 0.37) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expansion_of_a_mode() {
        let s = sphere_spectrum(0.8, 16).unwrap();
        let h = expand_boundary_data(
            |p| s.eval_mode(5, p),
            &s,
            16,
            1e-10,
        )
        .unwrap();
        for (i, c) in h.coefficients.iter().enumerate() {
            assert!((c - if i == 5 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn volumes() {
        assert!((cone_ball_volume(1.0, 2.0, 2.0 * PI) - PI).abs() < 1e-15);
        assert!((cone_ball_volume(2.0, 3.0, 4.0 * PI) - 32.0 * PI / 3.0).abs() < 1e-12);
        let v = |r: f64| cone_ball_volume(r, 3.0, 1.7);
        assert!((v(0.6) / v(0.3) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn constants_carry_no_energy() {
        let h = ConeHarmonic::new(circle_spectrum(PI, 4).unwrap(), vec![3.0]).unwrap();
        assert_eq!(energy_average(&h, 0.5), 0.0);
    }

    #[test]
    fn monotonicity_and_negative_control() {
        let s = circle_spectrum(PI, 16).unwrap();
        let mut c = vec![0.0; 4];
        c[1] = 1.0;
        c[3] = 0.3;
        let h = ConeHarmonic::new(s.clone(), c).unwrap();
        let radii: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
        let rep = check_monotonicity(&h, &radii).unwrap();
        assert!(rep.holds());
        assert!(rep.averages.windows(2).all(|w| w[1] > w[0]));

        let bad = ConeHarmonic::with_exponents(s, vec![0.0, 1.0], vec![0.0, 0.5]);
        let rep = check_monotonicity(&bad, &radii).unwrap();
        assert!(!rep.holds());
        assert_eq!(rep.violations[0].sub_linear_modes, vec![(1, 0.5)]);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let s = sphere_spectrum(std::f64::consts::FRAC_1_SQRT_2, 16).unwrap();
        let c: Vec<f64> = (0..8).map(|i| 0.3 + 0.1 * i as f64).collect();
        let h = ConeHarmonic::new(s, c).unwrap();
        let a = energy_average(&h, 0.7);
        let b = energy_average_quadrature(&h, 0.7, 48, 16);
        assert!((a - b).abs() < 1e-4 * a, "{a} {b}");
    }

    #[test]
    fn parses_cone_specs() {
        let s = parse_cone("cone:circle:theta=3.14159", 16).unwrap();
        assert_eq!(s.cone_dim, 2.0);
        assert!(parse_cone("cone:sphere:s=0.5", 16).is_ok());
        assert!(parse_cone("cone:circle:thetta=1", 16).is_err());
    }
}
