use std::fmt;
use std::sync::Arc;

use super::{CoefficientField, CoefficientModel, ConvexGraph, DEFAULT_SAMPLES};
use crate::error::{LabError, Result};
use crate::linalg::{halton_ball, norm, SmallMat};

/// A Riemannian metric on a ball, given by its lower-index components g_ij(x).
pub trait MetricModel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn lower(&self, x: &[f64]) -> SmallMat;

    /// Inverse components g^ij(x) and √det g_ij(x).
    fn upper_and_sqrt_det(&self, x: &[f64]) -> (SmallMat, f64) {
        let g = self.lower(x);
        let inv = g.inverse().unwrap_or_else(|| SmallMat::scalar(g.dim(), f64::NAN));
        (inv, g.det().sqrt())
    }

    /// Exact distance from the origin, when known in closed form.
    fn radial_distance(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn singular_at_origin(&self) -> bool {
        false
    }

    fn describe(&self) -> String;
}

#[derive(Clone, Debug)]
pub struct MetricField {
    model: Arc<dyn MetricModel>,
}

impl MetricField {
    pub fn new(model: Arc<dyn MetricModel>) -> Self {
        MetricField { model }
    }

    pub fn from_model(model: impl MetricModel + 'static) -> Self {
        Self::new(Arc::new(model))
    }

    /// Constant metric c·I.
    pub fn scalar(n: usize, c: f64) -> Self {
        Self::from_model(FnMetric::new(n, "scalar", move |_| SmallMat::scalar(n, c)))
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn model(&self) -> &Arc<dyn MetricModel> {
        &self.model
    }

    #[inline]
    pub fn lower(&self, x: &[f64]) -> SmallMat {
        self.model.lower(x)
    }

    #[inline]
    pub fn upper_and_sqrt_det(&self, x: &[f64]) -> (SmallMat, f64) {
        self.model.upper_and_sqrt_det(x)
    }

    pub fn upper(&self, x: &[f64]) -> SmallMat {
        self.model.upper_and_sqrt_det(x).0
    }

    /// G = det g_ij
    pub fn det(&self, x: &[f64]) -> f64 {
        self.model.lower(x).det()
    }

    pub fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        self.model.radial_distance(x)
    }

    pub fn singular_at_origin(&self) -> bool {
        self.model.singular_at_origin()
    }

    pub fn describe(&self) -> String {
        self.model.describe()
    }

    /// Largest |g_ij g^jk − δ| over the samples.
    pub fn inverse_residual(&self, radius: f64, samples: usize) -> f64 {
        let n = self.dim();
        halton_ball(n, samples)
            .iter()
            .map(|p| {
                let x: Vec<f64> = p.iter().map(|v| v * radius).collect();
                let (up, _) = self.upper_and_sqrt_det(&x);
                self.lower(&x).matmul(&up).sub(&SmallMat::identity(n)).max_abs()
            })
            .fold(0.0, f64::max)
    }

    /// Rejects metrics with G ≤ 0 or an indefinite sample.
    pub fn validate(&self, radius: f64, samples: usize) -> Result<()> {
        for p in halton_ball(self.dim(), samples) {
            let x: Vec<f64> = p.iter().map(|v| v * radius).collect();
            let g = self.lower(&x);
            let ev = g.sym_eigenvalues();
            if !(ev[0] > 0.0) || !(g.det() > 0.0) {
                return Err(LabError::NotSpd {
                    point: x,
                    min_eig: ev[0],
                });
            }
        }
        Ok(())
    }
}

/// Metric ḡ with ḡ^ij = ā^ij / det(ā)^{1/(n−2)}.
#[derive(Debug, Clone)]
struct CoefficientInduced {
    coeff: Arc<dyn CoefficientModel>,
}

impl CoefficientInduced {
    fn upper(&self, x: &[f64]) -> SmallMat {
        let n = self.coeff.dim();
        let a = self.coeff.eval(x);
        a.scale(a.det().powf(-1.0 / (n as f64 - 2.0)))
    }
}

impl MetricModel for CoefficientInduced {
    fn dim(&self) -> usize {
        self.coeff.dim()
    }

    fn lower(&self, x: &[f64]) -> SmallMat {
        let up = self.upper(x);
        up.inverse().unwrap_or_else(|| SmallMat::scalar(up.dim(), f64::NAN))
    }

    fn upper_and_sqrt_det(&self, x: &[f64]) -> (SmallMat, f64) {
        let up = self.upper(x);
        (up, 1.0 / up.det().sqrt())
    }

    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        self.coeff.vertex_distance(x)
    }

    fn singular_at_origin(&self) -> bool {
        self.coeff.singular_at_origin()
    }

    fn describe(&self) -> String {
        format!("metric({})", self.coeff.describe())
    }
}

/// Coefficient ā^ij = ḡ^ij·√G.
#[derive(Debug, Clone)]
struct MetricInduced {
    metric: Arc<dyn MetricModel>,
}

impl CoefficientModel for MetricInduced {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, x: &[f64]) -> SmallMat {
        let (up, sd) = self.metric.upper_and_sqrt_det(x);
        up.scale(sd)
    }

    fn singular_at_origin(&self) -> bool {
        self.metric.singular_at_origin()
    }

    fn describe(&self) -> String {
        format!("coefficient({})", self.metric.describe())
    }
}

/// The metric whose Laplace–Beltrami operator is √G⁻¹·div(A∇·).
pub fn metric_from_coefficient(a: &CoefficientField) -> Result<MetricField> {
    let n = a.dim();
    if n < 3 {
        return Err(LabError::Dimension {
            dim: n,
            reason: "the exponent 1/(n-2) needs n ≥ 3",
        });
    }
    let m = MetricField::from_model(CoefficientInduced {
        coeff: a.model().clone(),
    });
    m.validate(a.radius(), DEFAULT_SAMPLES)?;
    Ok(m)
}

/// Inverse transform of [`metric_from_coefficient`].
pub fn coefficient_from_metric(g: &MetricField, radius: f64) -> Result<CoefficientField> {
    g.validate(radius, DEFAULT_SAMPLES)?;
    CoefficientField::new(
        Arc::new(MetricInduced {
            metric: g.model().clone(),
        }),
        radius,
    )
}

/// Induced metric I + ∇f∇fᵀ of the convex graph, with its exact vertex distance √(|x|² + f²).
#[derive(Debug, Clone)]
pub struct ConvexGraphMetric {
    graph: ConvexGraph,
}

impl ConvexGraphMetric {
    pub fn new(a: &[f64]) -> Result<Self> {
        Ok(ConvexGraphMetric {
            graph: ConvexGraph::new(a)?,
        })
    }
}

impl MetricModel for ConvexGraphMetric {
    fn dim(&self) -> usize {
        self.graph.dim()
    }

    fn lower(&self, x: &[f64]) -> SmallMat {
        let n = self.dim();
        let mut w = [0.0; crate::linalg::MAX_DIM];
        self.graph.slope(x, &mut w[..n]);
        SmallMat::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 } + w[i] * w[j])
    }

    fn upper_and_sqrt_det(&self, x: &[f64]) -> (SmallMat, f64) {
        let n = self.dim();
        let mut w = [0.0; crate::linalg::MAX_DIM];
        self.graph.slope(x, &mut w[..n]);
        let s = 1.0 + w[..n].iter().map(|v| v * v).sum::<f64>();
        let up = SmallMat::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 } - w[i] * w[j] / s);
        (up, s.sqrt())
    }

    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        let f = self.graph.height(x);
        Some((x.iter().map(|v| v * v).sum::<f64>() + f * f).sqrt())
    }

    fn singular_at_origin(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("metric({})", self.graph.describe())
    }
}

/// Planar cone metric dr² + c²r²dξ² (total angle 2πc) in Cartesian components.
#[derive(Debug, Clone)]
pub struct PlanarConeMetric {
    aperture: f64,
}

impl PlanarConeMetric {
    pub fn new(theta: f64) -> Result<Self> {
        let c = super::PlanarCone::new(theta)?.aperture();
        Ok(PlanarConeMetric { aperture: c })
    }

    fn split(&self, x: &[f64], tangential: f64) -> SmallMat {
        let r = norm(x);
        let (ux, uy) = (x[0] / r, x[1] / r);
        let radial = SmallMat::from_row_slice(2, &[ux * ux, ux * uy, ux * uy, uy * uy]);
        radial.add(&SmallMat::identity(2).sub(&radial).scale(tangential))
    }
}

impl MetricModel for PlanarConeMetric {
    fn dim(&self) -> usize {
        2
    }

    fn lower(&self, x: &[f64]) -> SmallMat {
        self.split(x, self.aperture * self.aperture)
    }

    fn upper_and_sqrt_det(&self, x: &[f64]) -> (SmallMat, f64) {
        (self.split(x, 1.0 / (self.aperture * self.aperture)), self.aperture)
    }

    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        Some(norm(x))
    }

    fn singular_at_origin(&self) -> bool {
        (self.aperture - 1.0).abs() > 1e-15
    }

    fn describe(&self) -> String {
        format!("cone_metric:{}", self.aperture * std::f64::consts::TAU)
    }
}

type MatFn = dyn Fn(&[f64]) -> SmallMat + Send + Sync;
type DistFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Metric given by a closure for g_ij.
#[derive(Clone)]
pub struct FnMetric {
    n: usize,
    label: String,
    f: Arc<MatFn>,
    radial: Option<Arc<DistFn>>,
}

impl FnMetric {
    pub fn new(n: usize, label: &str, f: impl Fn(&[f64]) -> SmallMat + Send + Sync + 'static) -> Self {
        FnMetric {
            n,
            label: label.to_string(),
            f: Arc::new(f),
            radial: None,
        }
    }

    pub fn with_radial(mut self, d: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.radial = Some(Arc::new(d));
        self
    }
}

impl fmt::Debug for FnMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnMetric({})", self.label)
    }
}

impl MetricModel for FnMetric {
    fn dim(&self) -> usize {
        self.n
    }
    fn lower(&self, x: &[f64]) -> SmallMat {
        (self.f)(x)
    }
    fn radial_distance(&self, x: &[f64]) -> Option<f64> {
        self.radial.as_ref().map(|d| d(x))
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}
