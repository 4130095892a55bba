//! Distributional Laplacian pairings φ ↦ ∫uΔφ against radial bumps, very-weak (sub)harmonicity
//! certificates, and the end-to-end regularity demonstration (cutoff, heat smoothing, recovery).

mod bump;

pub use bump::{Geometry, TestFunction};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fem::DiscreteField;
use crate::heat::{default_t_grid, smoothing_pipeline, trust_margin, GridFunction, PipelineReport};
use crate::linalg::{gauss_legendre, halton_ball, MAX_DIM};

/// Red-refinement depth for pairings of mesh fields.
const PAIRING_DEPTH: usize = 3;

/// Sampled data must put at least 16 nodes across a support diameter: ρ ≥ 8h.
pub const MIN_POINTS_ACROSS: f64 = 16.0;

/// ∫uΔφ dm together with ∫_{supp φ}|u| dm from the same quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub value: f64,
    pub u_l1: f64,
}

/// A function that can be paired with test functions.
pub trait Sampled: Sync {
    fn geometry(&self) -> Geometry;
    /// Sampling spacing, `None` for closed forms.
    fn spacing(&self) -> Option<f64>;
    fn pair(&self, phi: &TestFunction) -> Result<Pairing>;
}

fn check_geometry(u: Geometry, phi: &TestFunction) -> Result<()> {
    if u != phi.geometry {
        return Err(LabError::param("geometry", format!("{u:?} data paired with a {:?} bump", phi.geometry)));
    }
    Ok(())
}

fn check_resolution(h: f64, phi: &TestFunction) -> Result<()> {
    let min = MIN_POINTS_ACROSS * h / 2.0;
    if phi.radius < min {
        return Err(LabError::Resolution {
            what: format!("bump of radius {} on data of spacing {h}", phi.radius),
            min,
        });
    }
    Ok(())
}

const RADIAL_PANELS: usize = 12;
const RADIAL_ORDER: usize = 16;
const ANGLES_2D: usize = 96;
const POLAR_3D: usize = 24;
const AZIMUTH_3D: usize = 48;

/// Nodes and weights on [0, ρ] graded geometrically toward 0, Gauss-Legendre on each panel.
fn radial_rule(rho: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(RADIAL_ORDER);
    let mut out = Vec::with_capacity((RADIAL_PANELS + 1) * RADIAL_ORDER);
    let mut edges: Vec<f64> = (0..=RADIAL_PANELS).map(|k| rho * 0.5f64.powi(k as i32)).collect();
    edges.push(0.0);
    for p in edges.windows(2) {
        let (b, a) = (p[0], p[1]);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * xi, 0.5 * (b - a) * wi));
        }
    }
    out
}

/// Quadrature on the support of φ: points (in the geometry's coordinates), weights for dm,
/// and the distance to the bump center.
pub fn support_rule(phi: &TestFunction) -> Result<Vec<([f64; 3], f64, f64)>> {
    let radial = radial_rule(phi.radius);
    let mut out = Vec::new();
    match phi.geometry {
        Geometry::Flat(1) => {
            for &(s, w) in &radial {
                out.push(([phi.center[0] + s, 0.0, 0.0], w, s));
                out.push(([phi.center[0] - s, 0.0, 0.0], w, s));
            }
        }
        Geometry::Flat(2) => {
            let dw = 2.0 * PI / ANGLES_2D as f64;
            for &(s, w) in &radial {
                for j in 0..ANGLES_2D {
                    let b = dw * j as f64;
                    out.push(([phi.center[0] + s * b.cos(), phi.center[1] + s * b.sin(), 0.0], w * s * dw, s));
                }
            }
        }
        Geometry::Flat(3) => {
            let (mu, wmu) = gauss_legendre(POLAR_3D);
            let dw = 2.0 * PI / AZIMUTH_3D as f64;
            for &(s, w) in &radial {
                for (m, wm) in mu.iter().zip(&wmu) {
                    let st = (1.0 - m * m).sqrt();
                    for j in 0..AZIMUTH_3D {
                        let b = dw * j as f64;
                        let x = [
                            phi.center[0] + s * st * b.cos(),
                            phi.center[1] + s * st * b.sin(),
                            phi.center[2] + s * m,
                        ];
                        out.push((x, w * s * s * wm * dw, s));
                    }
                }
            }
        }
        Geometry::Flat(n) => {
            return Err(LabError::Dimension {
                dim: n,
                reason: "closed-form pairings are implemented up to dimension 3",
            })
        }
        Geometry::Cone { theta } => {
            let c = theta / (2.0 * PI);
            let dw = 2.0 * PI / ANGLES_2D as f64;
            if phi.is_vertex_bump() {
                for &(s, w) in &radial {
                    for j in 0..ANGLES_2D {
                        out.push(([s, dw * j as f64, 0.0], c * w * s * dw, s));
                    }
                }
            } else {
                // flat polar rule in the developed sector, center on the positive axis
                let (r0, xi0) = (phi.center[0], phi.center[1]);
                for &(s, w) in &radial {
                    for j in 0..ANGLES_2D {
                        let b = dw * j as f64;
                        let (px, py) = (r0 + s * b.cos(), s * b.sin());
                        let r = (px * px + py * py).sqrt();
                        let xi = (xi0 + py.atan2(px) / c).rem_euclid(2.0 * PI);
                        out.push(([r, xi, 0.0], w * s * dw, s));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Closed-form function on flat space.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

fn pair_closed_form(phi: &TestFunction, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Pairing> {
    let mut value = 0.0;
    let mut u_l1 = 0.0;
    for (x, w, s) in support_rule(phi)? {
        let u = f(&x[..n]);
        value += w * u * phi.profile_laplacian(s);
        u_l1 += w * u.abs();
    }
    Ok(Pairing { value, u_l1 })
}

impl<F: Fn(&[f64]) -> f64 + Sync> Sampled for FnField<F> {
    fn geometry(&self) -> Geometry {
        Geometry::Flat(self.dim)
    }

    fn spacing(&self) -> Option<f64> {
        None
    }

    fn pair(&self, phi: &TestFunction) -> Result<Pairing> {
        check_geometry(self.geometry(), phi)?;
        pair_closed_form(phi, self.dim, &self.f)
    }
}

/// Closed-form function u(r, ξ) on the planar cone of total angle θ.
pub struct ConeField<F> {
    pub theta: f64,
    pub f: F,
}

impl<F: Fn(f64, f64) -> f64 + Sync> ConeField<F> {
    pub fn new(theta: f64, f: F) -> Self {
        ConeField { theta, f }
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Sampled for ConeField<F> {
    fn geometry(&self) -> Geometry {
        Geometry::Cone { theta: self.theta }
    }

    fn spacing(&self) -> Option<f64> {
        None
    }

    fn pair(&self, phi: &TestFunction) -> Result<Pairing> {
        check_geometry(self.geometry(), phi)?;
        pair_closed_form(phi, 2, |x| (self.f)(x[0], x[1]))
    }
}

impl Sampled for GridFunction {
    fn geometry(&self) -> Geometry {
        Geometry::Flat(self.dim())
    }

    fn spacing(&self) -> Option<f64> {
        Some(self.h)
    }

    /// Multilinear interpolant against Δφ, sampled at the midpoints of a k-fold
    /// subdivision of every grid cell (k = 8 up to two dimensions, 4 in three).
    fn pair(&self, phi: &TestFunction) -> Result<Pairing> {
        check_geometry(self.geometry(), phi)?;
        check_resolution(self.h, phi)?;
        let n = self.dim();
        for a in 0..n {
            let lo = self.origin[a];
            let hi = lo + (self.shape[a] - 1) as f64 * self.h;
            if phi.center[a] - phi.radius < lo || phi.center[a] + phi.radius > hi {
                return Err(LabError::param("bump", "support leaves the grid box"));
            }
        }
        let sub: usize = if n <= 2 { 8 } else { 4 };
        let s = self.strides();
        let mut lo = [0usize; 3];
        let mut count = [1usize; 3];
        for a in 0..n {
            lo[a] = ((phi.center[a] - phi.radius - self.origin[a]) / self.h).floor().max(0.0) as usize;
            let hi = (((phi.center[a] + phi.radius - self.origin[a]) / self.h).ceil() as usize).min(self.shape[a] - 1);
            count[a] = hi - lo[a];
        }
        let cells = count[..n].iter().product::<usize>();
        let samples = sub.pow(n as u32);
        let (value, u_l1) = (0..cells)
            .into_par_iter()
            .map(|c| {
                let mut m = [0usize; 3];
                let mut rest = c;
                for a in (0..n).rev() {
                    m[a] = lo[a] + rest % count[a];
                    rest /= count[a];
                }
                let base: usize = (0..n).map(|a| m[a] * s[a]).sum();
                let corner: Vec<f64> = (0..1usize << n)
                    .map(|k| {
                        let off: usize = (0..n).map(|a| ((k >> a) & 1) * s[a]).sum();
                        self.values[base + off]
                    })
                    .collect();
                let mut acc = (0.0, 0.0);
                let mut x = [0.0; 3];
                let mut t = [0.0; 3];
                for q in 0..samples {
                    let mut r = q;
                    for a in 0..n {
                        t[a] = ((r % sub) as f64 + 0.5) / sub as f64;
                        r /= sub;
                        x[a] = self.origin[a] + (m[a] as f64 + t[a]) * self.h;
                    }
                    let d = phi.distance(&x[..n]);
                    if d >= phi.radius {
                        continue;
                    }
                    let u: f64 = corner
                        .iter()
                        .enumerate()
                        .map(|(k, v)| {
                            (0..n).fold(*v, |w, a| w * if (k >> a) & 1 == 1 { t[a] } else { 1.0 - t[a] })
                        })
                        .sum();
                    acc.0 += u * phi.profile_laplacian(d);
                    acc.1 += u.abs();
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let w = self.cell_volume() / samples as f64;
        Ok(Pairing {
            value: value * w,
            u_l1: u_l1 * w,
        })
    }
}

impl Sampled for DiscreteField {
    fn geometry(&self) -> Geometry {
        Geometry::Flat(self.mesh.dim)
    }

    fn spacing(&self) -> Option<f64> {
        Some(self.mesh.h)
    }

    /// Sub-cell sampling of the P1 interpolant against Δφ: every cell is red-refined
    /// three times and sampled at the children's centroids, which resolves both the
    /// quartic Δφ and its kink at the support boundary.
    fn pair(&self, phi: &TestFunction) -> Result<Pairing> {
        check_geometry(self.geometry(), phi)?;
        check_resolution(self.mesh.h, phi)?;
        let mesh = &self.mesh;
        let n = mesh.dim;
        if n > 3 {
            return Err(LabError::Dimension {
                dim: n,
                reason: "pairings are implemented up to dimension 3",
            });
        }
        let fine = crate::fem::refined_centroids(n, PAIRING_DEPTH);
        let weight = 1.0 / fine.len() as f64;
        let reach = phi.radius + 2.0 * mesh.h;
        let (value, u_l1) = (0..mesh.num_cells())
            .into_par_iter()
            .with_min_len(4096)
            .map(|c| {
                let v = mesh.cell(c);
                if phi.distance(mesh.node(v[0] as usize)) > reach {
                    return (0.0, 0.0);
                }
                let vol = mesh.cell_geometry(c).volume * weight;
                let mut acc = (0.0, 0.0);
                let mut x = [0.0; MAX_DIM];
                for b in &fine {
                    x[..n].fill(0.0);
                    for (k, vi) in v.iter().enumerate() {
                        let node = mesh.node(*vi as usize);
                        for j in 0..n {
                            x[j] += b[k] * node[j];
                        }
                    }
                    let d = phi.distance(&x[..n]);
                    if d >= phi.radius {
                        continue;
                    }
                    let u: f64 = v.iter().enumerate().map(|(k, i)| b[k] * self.values[*i as usize]).sum();
                    acc.0 += vol * u * phi.profile_laplacian(d);
                    acc.1 += vol * u.abs();
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        Ok(Pairing { value, u_l1 })
    }
}

/// Δ_𝒟u(φ) = ∫uΔφ dm.
pub fn distributional_laplacian(u: &dyn Sampled, phi: &TestFunction) -> Result<f64> {
    Ok(u.pair(phi)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Harmonic,
    Sub,
    Super,
}

/// How the bump family is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    pub size: usize,
    pub seed: u64,
    /// Radius range; defaults to [8h, R/4] for sampled data and [R/16, R/4] otherwise.
    pub radii: Option<(f64, f64)>,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            size: 64,
            seed: 1,
            radii: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub center: Vec<f64>,
    pub radius: f64,
    pub pairing: f64,
    pub u_l1: f64,
    pub e_norm: f64,
    /// pairing/(‖u‖_{L¹(supp φ)}·‖φ‖_E)
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub sign: Sign,
    pub passed: bool,
    pub tol: f64,
    /// Region B_R(center); for cones the center is the vertex.
    pub center: Vec<f64>,
    pub radius: f64,
    pub family_size: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Most adverse bump for the requested sign.
    pub worst: Witness,
    /// Bumps whose ratio breaks the requested sign.
    pub failures: usize,
}

impl Certificate {
    /// Verdicts for the other signs from the same family.
    pub fn holds_as(&self, sign: Sign) -> bool {
        match sign {
            Sign::Harmonic => self.min_ratio >= -self.tol && self.max_ratio <= self.tol,
            Sign::Sub => self.min_ratio >= -self.tol,
            Sign::Super => self.max_ratio <= self.tol,
        }
    }
}

/// Random family of nonnegative bumps with supports inside the region.
pub fn bump_family(
    geometry: Geometry,
    center: &[f64],
    radius: f64,
    spacing: Option<f64>,
    opts: FamilyOptions,
) -> Result<Vec<TestFunction>> {
    let (rmin, rmax) = match (opts.radii, spacing) {
        (Some(r), _) => r,
        (None, Some(h)) => (MIN_POINTS_ACROSS * h / 2.0, radius / 4.0),
        (None, None) => (radius / 16.0, radius / 4.0),
    };
    if !(rmin > 0.0 && rmin <= rmax) {
        return Err(LabError::Resolution {
            what: format!("bump family in a region of radius {radius}"),
            min: 4.0 * rmin,
        });
    }
    if opts.size == 0 {
        return Err(LabError::param("family_size", "need at least one bump"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(opts.size);
    match geometry {
        Geometry::Flat(n) => {
            let pts = halton_ball(n, opts.size);
            for p in pts {
                let rho = rmin * (rmax / rmin).powf(rng.gen::<f64>());
                let c: Vec<f64> = (0..n).map(|a| center[a] + (radius - rho) * p[a]).collect();
                out.push(TestFunction::bump(&c, rho, geometry)?);
            }
        }
        Geometry::Cone { theta } => {
            let reach = if theta < PI { (theta / 2.0).sin() } else { 1.0 };
            let pts = halton_ball(2, opts.size);
            for (k, p) in pts.iter().enumerate() {
                let rho = rmin * (rmax / rmin).powf(rng.gen::<f64>());
                // every eighth bump sits on the vertex
                if k % 8 == 0 {
                    out.push(TestFunction::bump(&[0.0, 0.0], rho, geometry)?);
                    continue;
                }
                let lo = rho / reach * 1.01;
                let hi = radius - rho;
                if lo >= hi {
                    out.push(TestFunction::bump(&[0.0, 0.0], rho, geometry)?);
                    continue;
                }
                let r0 = lo + (hi - lo) * (p[0] * 0.5 + 0.5);
                let xi = (p[1] * 0.5 + 0.5) * 2.0 * PI;
                out.push(TestFunction::bump(&[r0, xi], rho, geometry)?);
            }
        }
    }
    Ok(out)
}

/// Pairs u with a bump family in B_R(center) and certifies the requested sign relative to
/// ‖u‖_{L¹(supp φ)}·‖φ‖_E. Failures come back as certificates with a witness.
pub fn certify_very_weak(
    u: &dyn Sampled,
    center: &[f64],
    radius: f64,
    sign: Sign,
    opts: FamilyOptions,
    tol: f64,
) -> Result<Certificate> {
    let family = bump_family(u.geometry(), center, radius, u.spacing(), opts)?;
    for phi in &family {
        phi.check_inside(center, radius)?;
    }
    let rows = family
        .par_iter()
        .map(|phi| {
            let p = u.pair(phi)?;
            let e = phi.e_norm();
            let ratio = if p.u_l1 > 0.0 { p.value / (p.u_l1 * e) } else { 0.0 };
            Ok(Witness {
                center: phi.center.clone(),
                radius: phi.radius,
                pairing: p.value,
                u_l1: p.u_l1,
                e_norm: e,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_ratio = rows.iter().map(|w| w.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|w| w.ratio).fold(f64::NEG_INFINITY, f64::max);
    let badness = |w: &Witness| match sign {
        Sign::Harmonic => w.ratio.abs(),
        Sign::Sub => -w.ratio,
        Sign::Super => w.ratio,
    };
    let failures = rows.iter().filter(|w| badness(w) > tol).count();
    let worst = rows
        .iter()
        .max_by(|a, b| badness(a).total_cmp(&badness(b)))
        .cloned()
        .unwrap();
    Ok(Certificate {
        sign,
        passed: failures == 0,
        tol,
        center: center.to_vec(),
        radius,
        family_size: rows.len(),
        min_ratio,
        max_ratio,
        worst,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    pub certificate: Certificate,
    pub pipeline: PipelineReport,
    /// sup_{B_{R/8}}|∇| of the smoothed field at the smallest time.
    pub lipschitz_constant: f64,
    /// max_{B_{R/8}}|recovered − truth| when a ground truth is given.
    pub recovery_error: Option<f64>,
}

/// Certifies u on B_{R/2}(x₀), multiplies by the Lipschitz cutoff χ (1 on B_{R/2}, 0 off
/// B_R), smooths, and returns the recovered representative on B_{R/8}(x₀).
/// Pointwise closed form of a field, when one is known.
pub type PointFn<'a> = &'a dyn Fn(&[f64]) -> f64;

pub fn weyl_demo(
    u: &GridFunction,
    center: &[f64],
    radius: f64,
    tol: f64,
    t_grid: Option<&[f64]>,
    truth: Option<PointFn>,
) -> Result<WeylReport> {
    let certificate = certify_very_weak(u, center, radius / 2.0, Sign::Harmonic, FamilyOptions::default(), tol)?;
    if !certificate.passed {
        return Err(LabError::Certification(format!(
            "not very weakly harmonic on B_{}: worst ratio {:e} at bump {:?} of radius {}",
            radius / 2.0,
            certificate.worst.ratio,
            certificate.worst.center,
            certificate.worst.radius
        )));
    }
    let default = default_t_grid();
    let t_grid = t_grid.unwrap_or(&default);
    let tmax = t_grid.iter().cloned().fold(0.0, f64::max);
    let half = radius + trust_margin(tmax, u.h) + 2.0 * u.h;
    let geo = Geometry::Flat(u.dim());
    let missing = std::cell::Cell::new(false);
    let v = GridFunction::centered(center, half, u.h, |x| {
        let d = geo.distance(x, center);
        if d >= radius {
            return 0.0;
        }
        let chi = ((radius - d) / (radius / 2.0)).min(1.0);
        match u.interpolate(x) {
            Some(val) => chi * val,
            None => {
                missing.set(true);
                0.0
            }
        }
    })?;
    if missing.get() {
        return Err(LabError::param("grid", "data does not cover B_R(x0)"));
    }
    let pipeline = smoothing_pipeline(&v, center, radius, t_grid, &certificate)?;
    let rep = pipeline.representative.as_ref().unwrap();
    let inner = rep.nodes_in_ball(center, radius / 8.0);
    let lipschitz_constant = inner
        .iter()
        .filter_map(|&i| rep.gradient_at(i))
        .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let recovery_error = truth.map(|f| {
        inner
            .iter()
            .map(|&i| (rep.values[i] - f(&rep.coords(i))).abs())
            .fold(0.0, f64::max)
    });
    Ok(WeylReport {
        certificate,
        pipeline,
        lipschitz_constant,
        recovery_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_of_bump_integrates_to_zero() {
        for (c, r, g) in [
            (vec![0.3], 0.5, Geometry::Flat(1)),
            (vec![0.1, 0.2], 0.7, Geometry::Flat(2)),
            (vec![0.0, 0.1, -0.2], 0.4, Geometry::Flat(3)),
        ] {
            let phi = TestFunction::bump(&c, r, g).unwrap();
            let p = FnField::new(c.len(), |_: &[f64]| 1.0).pair(&phi).unwrap();
            assert!(p.value.abs() < 1e-8, "{}", p.value);
        }
        for theta in [PI / 2.0, PI, 1.5 * PI] {
            let u = ConeField::new(theta, |_, _| 1.0);
            let vertex = TestFunction::bump(&[0.0, 0.0], 0.6, Geometry::Cone { theta }).unwrap();
            assert!(u.pair(&vertex).unwrap().value.abs() < 1e-8);
            // measure c·r dr dξ: ∫φ = θ·ρ²/8
            let area: f64 = support_rule(&vertex).unwrap().iter().map(|(_, w, s)| w * vertex.profile(*s)).sum();
            assert!((area - theta * 0.36 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_and_quadratic_pairings() {
        let phi = TestFunction::bump(&[0.2, -0.1], 0.5, Geometry::Flat(2)).unwrap();
        assert!(distributional_laplacian(&FnField::new(2, |x: &[f64]| x[0]), &phi).unwrap().abs() < 1e-8);
        let q = distributional_laplacian(&FnField::new(2, |x: &[f64]| x[0] * x[0] + x[1] * x[1]), &phi).unwrap();
        let mass: f64 = support_rule(&phi).unwrap().iter().map(|(_, w, s)| w * phi.profile(*s)).sum();
        assert!((q - 4.0 * mass).abs() < 1e-6);
        // ∫(1−s²/ρ²)³ over the disc is πρ²/4
        assert!((mass - PI * 0.25 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn cone_harmonic_pairs_to_zero_off_the_vertex() {
        // θ = π: r^{1/c}cos ξ = r²cos ξ, the first nonconstant mode
        let theta = PI;
        let u = ConeField::new(theta, |r: f64, xi: f64| r * r * xi.cos());
        let phi = TestFunction::bump(&[1.0, 0.4], 0.4, Geometry::Cone { theta }).unwrap();
        assert!(u.pair(&phi).unwrap().value.abs() < 1e-6);
        let not = ConeField::new(theta, |r: f64, xi: f64| r * xi.cos());
        assert!(not.pair(&phi).unwrap().value.abs() > 1e-3);
    }

    #[test]
    fn certificates() {
        let lin = FnField::new(2, |x: &[f64]| x[0]);
        let c = certify_very_weak(&lin, &[0.0, 0.0], 1.0, Sign::Harmonic, FamilyOptions::default(), 1e-6).unwrap();
        assert!(c.passed, "{c:?}");
        let par = FnField::new(2, |x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let h = certify_very_weak(&par, &[0.0, 0.0], 1.0, Sign::Harmonic, FamilyOptions::default(), 1e-6).unwrap();
        assert!(!h.passed && h.worst.ratio > 1e-3);
        assert!(h.holds_as(Sign::Sub) && !h.holds_as(Sign::Super));
    }

    #[test]
    fn grid_and_fem_pairings_agree_with_closed_forms() {
        let f = |x: &[f64]| x[0] * x[0] - 0.5 * x[1] + 0.3;
        let phi = TestFunction::bump(&[0.1, 0.05], 0.4, Geometry::Flat(2)).unwrap();
        let exact = FnField::new(2, f).pair(&phi).unwrap().value;
        let g = GridFunction::centered(&[0.0, 0.0], 1.0, 1.0 / 128.0, f).unwrap();
        assert!((g.pair(&phi).unwrap().value - exact).abs() < 1e-3 * exact.abs());
        let mesh = std::sync::Arc::new(crate::fem::Mesh::ring_disc(1.0, 1.0 / 64.0).unwrap());
        let u = DiscreteField::interpolate(mesh, f);
        assert!((u.pair(&phi).unwrap().value - exact).abs() < 1e-2 * exact.abs());
        let tiny = TestFunction::bump(&[0.0, 0.0], 0.07, Geometry::Flat(2)).unwrap();
        assert!(g.pair(&tiny).is_ok());
        let coarse = GridFunction::centered(&[0.0, 0.0], 1.0, 0.05, f).unwrap();
        assert!(matches!(coarse.pair(&tiny), Err(LabError::Resolution { .. })));
    }
}
