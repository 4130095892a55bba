use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CoefficientModel;
use crate::error::{LabError, Result};
use crate::linalg::{norm, SmallMat};

/// Coefficient induced by the convex graph x ↦ (Σ aᵢxᵢ²)^{1/2}.
///
/// With f the graph function and w = ∇f, the induced metric is I + wwᵀ and the
/// coefficient is √(1+|w|²)·(I + wwᵀ)⁻¹. Homogeneous of degree 0, so it has no
/// limit at the origin.
#[derive(Debug, Clone)]
pub struct ConvexGraph {
    weights: Vec<f64>,
}

impl ConvexGraph {
    pub fn new(a: &[f64]) -> Result<Self> {
        if a.len() < 3 {
            return Err(LabError::Dimension {
                dim: a.len(),
                reason: "the convex-graph family needs n ≥ 3",
            });
        }
        if a.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(LabError::param("convex_graph", "weights must be positive"));
        }
        Ok(ConvexGraph { weights: a.to_vec() })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Gradient of the graph function at x ≠ 0.
    pub fn slope(&self, x: &[f64], w: &mut [f64]) {
        let f = self
            .weights
            .iter()
            .zip(x)
            .map(|(a, v)| a * v * v)
            .sum::<f64>()
            .sqrt();
        for ((wi, a), v) in w.iter_mut().zip(&self.weights).zip(x) {
            *wi = a * v / f;
        }
    }

    /// Height of the graph over x.
    pub fn height(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(a, v)| a * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Eigenvalue range over x ≠ 0: √(1+|w|²) tangential and 1/√(1+|w|²) along w,
    /// with |w|² ranging over [min a, max a].
    pub fn exact_ellipticity(&self) -> (f64, f64) {
        let lo = self.weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.weights.iter().cloned().fold(0.0, f64::max);
        (1.0 / (1.0 + hi).sqrt(), (1.0 + hi).sqrt().max(1.0 / (1.0 + lo).sqrt()))
    }
}

impl CoefficientModel for ConvexGraph {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, x: &[f64]) -> SmallMat {
        let n = self.weights.len();
        let mut w = [0.0; crate::linalg::MAX_DIM];
        self.slope(x, &mut w[..n]);
        let s = 1.0 + w[..n].iter().map(|v| v * v).sum::<f64>();
        let rs = s.sqrt();
        SmallMat::from_fn(n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            rs * (d - w[i] * w[j] / s)
        })
    }

    fn singular_at_origin(&self) -> bool {
        true
    }

    fn vertex_distance(&self, x: &[f64]) -> Option<f64> {
        let f = self.height(x);
        Some((x.iter().map(|v| v * v).sum::<f64>() + f * f).sqrt())
    }

    fn describe(&self) -> String {
        let a: Vec<String> = self.weights.iter().map(|v| v.to_string()).collect();
        format!("convex_graph:{}", a.join(","))
    }
}

/// Planar coefficient whose energy is the Dirichlet energy of the cone with total angle θ.
///
/// a(x) = c·x̂x̂ᵀ + c⁻¹(I − x̂x̂ᵀ) with c = θ/2π; the functions r^{k/c}cos(kξ) solve div(a∇u) = 0.
#[derive(Debug, Clone)]
pub struct PlanarCone {
    theta: f64,
}

impl PlanarCone {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 2.0 * std::f64::consts::PI + 1e-12) {
            return Err(LabError::param("theta", "cone angle must lie in (0, 2π]"));
        }
        Ok(PlanarCone { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Ratio θ/2π.
    pub fn aperture(&self) -> f64 {
        self.theta / (2.0 * std::f64::consts::PI)
    }
}

impl CoefficientModel for PlanarCone {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> SmallMat {
        let c = self.aperture();
        let r = norm(x);
        let (ux, uy) = (x[0] / r, x[1] / r);
        let radial = SmallMat::from_row_slice(2, &[ux * ux, ux * uy, ux * uy, uy * uy]);
        let tangential = SmallMat::identity(2).sub(&radial);
        radial.scale(c).add(&tangential.scale(1.0 / c))
    }

    fn singular_at_origin(&self) -> bool {
        (self.aperture() - 1.0).abs() > 1e-15
    }

    fn describe(&self) -> String {
        format!("cone2d:{}", self.theta)
    }
}

/// Kind of deviation applied to a base field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// A = Ā·(1 + ε|x|^β)
    Holder { eps: f64, beta: f64 },
    /// A = Ā·(1 + ε/log(e/|x|)), not Dini continuous at 0.
    LogDini { eps: f64 },
    /// A = Ā + εI
    Offset { eps: f64 },
    /// A = Ā + ε·e₁e₁ᵀ
    OffsetFirst { eps: f64 },
}

impl Perturbation {
    /// Analytic value of ‖A − Ā‖ at |x| = t given the base operator norm bound.
    pub fn envelope(&self, t: f64, base_norm: f64) -> f64 {
        match *self {
            Perturbation::Holder { eps, beta } => eps.abs() * t.powf(beta) * base_norm,
            Perturbation::LogDini { eps } => {
                if t <= 0.0 {
                    0.0
                } else {
                    eps.abs() / (1.0 - t.ln()) * base_norm
                }
            }
            Perturbation::Offset { eps } | Perturbation::OffsetFirst { eps } => eps.abs(),
        }
    }

    fn describe(&self) -> String {
        match *self {
            Perturbation::Holder { eps, beta } => format!("holder:{eps}:{beta}"),
            Perturbation::LogDini { eps } => format!("log:{eps}"),
            Perturbation::Offset { eps } => format!("offset:{eps}"),
            Perturbation::OffsetFirst { eps } => format!("offset1:{eps}"),
        }
    }
}

/// A base coefficient with a prescribed deviation.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub base: Arc<dyn CoefficientModel>,
    pub kind: Perturbation,
}

impl CoefficientModel for Perturbed {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &[f64]) -> SmallMat {
        let a = self.base.eval(x);
        match self.kind {
            Perturbation::Holder { eps, beta } => a.scale(1.0 + eps * norm(x).powf(beta)),
            Perturbation::LogDini { eps } => {
                let r = norm(x);
                let f = if r == 0.0 { 0.0 } else { eps / (1.0 - r.ln()) };
                a.scale(1.0 + f)
            }
            Perturbation::Offset { eps } => a.add(&SmallMat::scalar(a.dim(), eps)),
            Perturbation::OffsetFirst { eps } => {
                let mut b = a;
                b.set(0, 0, b.get(0, 0) + eps);
                b
            }
        }
    }

    fn singular_at_origin(&self) -> bool {
        self.base.singular_at_origin()
    }

    fn describe(&self) -> String {
        format!("perturbed:{},{}", self.base.describe(), self.kind.describe())
    }
}

/// Smooth random SPD field M(x)M(x)ᵀ + δI with trigonometric entries, for property tests.
#[derive(Debug, Clone)]
pub struct RandomSmooth {
    n: usize,
    seed: u64,
    base: Vec<f64>,
    freq: Vec<f64>,
    phase: Vec<f64>,
}

impl RandomSmooth {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let freq = (0..n * n * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let phase = (0..n * n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        RandomSmooth {
            n,
            seed,
            base,
            freq,
            phase,
        }
    }
}

impl CoefficientModel for RandomSmooth {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64]) -> SmallMat {
        let n = self.n;
        let m = SmallMat::from_fn(n, |i, j| {
            let k = i * n + j;
            let arg: f64 = (0..n).map(|d| self.freq[k * n + d] * x[d]).sum::<f64>() + self.phase[k];
            self.base[k] + 0.3 * arg.sin()
        });
        let mut a = m.matmul(&m.transpose()).add(&SmallMat::scalar(n, 0.2));
        // exact symmetry
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (a.get(i, j) + a.get(j, i));
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        a
    }

    fn describe(&self) -> String {
        format!("random:{}:{}", self.n, self.seed)
    }
}

type MatFn = dyn Fn(&[f64]) -> SmallMat + Send + Sync;

/// Coefficient given by a closure.
#[derive(Clone)]
pub struct FnCoefficient {
    n: usize,
    singular: bool,
    label: String,
    f: Arc<MatFn>,
}

impl FnCoefficient {
    pub fn new(
        n: usize,
        singular: bool,
        label: &str,
        f: impl Fn(&[f64]) -> SmallMat + Send + Sync + 'static,
    ) -> Self {
        FnCoefficient {
            n,
            singular,
            label: label.to_string(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnCoefficient({})", self.label)
    }
}

impl CoefficientModel for FnCoefficient {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &[f64]) -> SmallMat {
        (self.f)(x)
    }
    fn singular_at_origin(&self) -> bool {
        self.singular
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}
