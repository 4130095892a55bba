use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Where test functions live. Cone points are (r, ξ) with ξ ∈ [0, 2π) and metric
/// dr² + c²r²dξ², c = θ/2π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Flat(usize),
    Cone { theta: f64 },
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Flat(n) => *n,
            Geometry::Cone { .. } => 2,
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Geometry::Flat(_) => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            Geometry::Cone { theta } => {
                let c = theta / (2.0 * PI);
                let mut dx = (x[1] - y[1]).rem_euclid(2.0 * PI);
                dx = dx.min(2.0 * PI - dx);
                let psi = c * dx;
                if psi >= PI {
                    x[0] + y[0]
                } else {
                    (x[0] * x[0] + y[0] * y[0] - 2.0 * x[0] * y[0] * psi.cos()).max(0.0).sqrt()
                }
            }
        }
    }
}

/// φ = (1 − d²/ρ²)³ on the ball of radius ρ, zero outside; C² across the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    pub geometry: Geometry,
}

impl TestFunction {
    /// Cone bumps are either centered at the vertex (r = 0) or small enough that their
    /// support is a flat disc in the developed sector.
    pub fn bump(center: &[f64], radius: f64, geometry: Geometry) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::param("radius", "support radius must be positive"));
        }
        match geometry {
            Geometry::Flat(n) => {
                if n == 0 || center.len() != n {
                    return Err(LabError::Dimension {
                        dim: center.len(),
                        reason: "bump center does not match the flat dimension",
                    });
                }
            }
            Geometry::Cone { theta } => {
                if !(theta > 0.0 && theta <= 2.0 * PI) || center.len() != 2 || center[0] < 0.0 {
                    return Err(LabError::param("cone bump", "need θ in (0, 2π] and a point (r, ξ) with r ≥ 0"));
                }
                let r0 = center[0];
                let reach = if theta < PI { (theta / 2.0).sin() } else { 1.0 };
                if r0 > 0.0 && radius >= r0 * reach {
                    return Err(LabError::param(
                        "cone bump",
                        format!("support of radius {radius} about r = {r0} wraps around or meets the vertex"),
                    ));
                }
            }
        }
        Ok(TestFunction {
            center: center.to_vec(),
            radius,
            geometry,
        })
    }

    /// Rejects supports leaving B_R(c) (flat) or the cone ball of radius R about the vertex.
    pub fn check_inside(&self, center: &[f64], radius: f64) -> Result<()> {
        let d = match self.geometry {
            Geometry::Flat(_) => self.geometry.distance(&self.center, center),
            Geometry::Cone { .. } => self.center[0],
        };
        if d + self.radius > radius * (1.0 + 1e-12) {
            return Err(LabError::param(
                "bump",
                format!("support B_{}({:?}) exits the domain of radius {radius}", self.radius, self.center),
            ));
        }
        Ok(())
    }

    /// Dimension entering the radial Laplacian.
    pub fn radial_dim(&self) -> f64 {
        self.geometry.dim() as f64
    }

    pub fn is_vertex_bump(&self) -> bool {
        matches!(self.geometry, Geometry::Cone { .. }) && self.center[0] == 0.0
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.geometry.distance(x, &self.center)
    }

    pub fn profile(&self, d: f64) -> f64 {
        if d >= self.radius {
            return 0.0;
        }
        let q = 1.0 - (d / self.radius).powi(2);
        q * q * q
    }

    /// dφ/dd
    pub fn profile_slope(&self, d: f64) -> f64 {
        if d >= self.radius {
            return 0.0;
        }
        let q = 1.0 - (d / self.radius).powi(2);
        -6.0 * d * q * q / (self.radius * self.radius)
    }

    /// φ'' + (N−1)/d·φ' = (24σq − 6Nq²)/ρ², σ = d²/ρ², q = 1 − σ.
    pub fn profile_laplacian(&self, d: f64) -> f64 {
        if d >= self.radius {
            return 0.0;
        }
        let s = (d / self.radius).powi(2);
        let q = 1.0 - s;
        (24.0 * s * q - 6.0 * self.radial_dim() * q * q) / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.profile(self.distance(x))
    }

    pub fn gradient_norm(&self, x: &[f64]) -> f64 {
        self.profile_slope(self.distance(x)).abs()
    }

    /// Flat gradient; `None` on cones.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if let Geometry::Cone { .. } = self.geometry {
            return None;
        }
        let q = 1.0 - self.geometry.distance(x, &self.center).powi(2) / (self.radius * self.radius);
        if q <= 0.0 {
            return Some(vec![0.0; x.len()]);
        }
        let k = -6.0 * q * q / (self.radius * self.radius);
        Some(x.iter().zip(&self.center).map(|(a, c)| k * (a - c)).collect())
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.profile_laplacian(self.distance(x))
    }

    /// ‖φ‖_∞ + ‖∇φ‖_∞ + ‖Δφ‖_∞ = 1 + 96/(25√5ρ) + 6N/ρ².
    pub fn e_norm(&self) -> f64 {
        let r = self.radius;
        1.0 + 96.0 / (25.0 * 5f64.sqrt() * r) + 6.0 * self.radial_dim() / (r * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_laplacian_matches_symbolic() {
        let b = TestFunction::bump(&[0.0; 3], 1.0, Geometry::Flat(3)).unwrap();
        assert!((b.laplacian(&[0.0; 3]) + 18.0).abs() < 1e-14);
        let b = TestFunction::bump(&[1.0, 2.0], 0.5, Geometry::Flat(2)).unwrap();
        assert!((b.laplacian(&[1.0, 2.0]) + 48.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let b = TestFunction::bump(&[0.1, -0.2, 0.3], 0.8, Geometry::Flat(3)).unwrap();
        let x = [0.35, -0.1, 0.05];
        let h = 1e-4;
        let g = b.gradient(&x).unwrap();
        let mut lap = 0.0;
        for a in 0..3 {
            let mut p = x;
            let mut m = x;
            p[a] += h;
            m[a] -= h;
            let fd = (b.value(&p) - b.value(&m)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-7);
            lap += (b.value(&p) + b.value(&m) - 2.0 * b.value(&x)) / (h * h);
        }
        assert!((lap - b.laplacian(&x)).abs() < 1e-5);
        assert!(b.laplacian(&[2.0, 0.0, 0.0]) == 0.0);
    }

    #[test]
    fn e_norm_bounds_sampled_sups() {
        let b = TestFunction::bump(&[0.0, 0.0], 0.7, Geometry::Flat(2)).unwrap();
        let (mut g, mut l): (f64, f64) = (0.0, 0.0);
        for k in 0..=10000 {
            let d = 0.7 * k as f64 / 10000.0;
            g = g.max(b.profile_slope(d).abs());
            l = l.max(b.profile_laplacian(d).abs());
        }
        assert!((1.0 + g + l - b.e_norm()).abs() < 1e-6 * b.e_norm());
    }

    #[test]
    fn cone_bumps_must_fit_the_chart() {
        let g = Geometry::Cone { theta: PI / 2.0 };
        assert!(TestFunction::bump(&[1.0, 0.0], 0.5, g).is_ok());
        assert!(TestFunction::bump(&[1.0, 0.0], 0.8, g).is_err());
        assert!(TestFunction::bump(&[0.0, 0.0], 0.8, g).is_ok());
    }

    #[test]
    fn cone_distance_is_flat_in_the_development() {
        let g = Geometry::Cone { theta: PI };
        // ξ difference π/2 is a developed angle of π/4
        let d = g.distance(&[1.0, 0.0], &[1.0, PI / 2.0]);
        assert!((d - (2.0 - 2.0 * (PI / 4.0).cos()).sqrt()).abs() < 1e-14);
        assert!((g.distance(&[1.0, 0.0], &[2.0, PI]) - 5f64.sqrt()).abs() < 1e-14);
        let full = Geometry::Cone { theta: 2.0 * PI };
        assert_eq!(full.distance(&[1.0, 0.0], &[2.0, PI]), 3.0);
    }
}
