//! Coefficient fields, the coefficient/metric transforms and Dini moduli.

mod families;
mod metric;
mod modulus;
mod parse;

pub use families::{
    ConvexGraph, FnCoefficient, Perturbation, Perturbed, PlanarCone, RandomSmooth,
};
pub use metric::{
    coefficient_from_metric, metric_from_coefficient, ConvexGraphMetric, FnMetric, MetricField,
    MetricModel, PlanarConeMetric,
};
pub use modulus::{
    dini_integral, dini_integral_upto, estimate_modulus, estimate_modulus_with, DiniIntegral,
    DiniModulus, TailModel,
};
pub use parse::parse_coefficient;

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::linalg::{halton_ball, SmallMat};

/// Default number of quasi-random samples per ball for sup-norm estimates.
pub const DEFAULT_SAMPLES: usize = 4096;

/// A pointwise symmetric matrix field x ↦ A(x).
pub trait CoefficientModel: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// Value at `x`. Callers must not pass the origin when
    /// [`singular_at_origin`](Self::singular_at_origin) is true.
    fn eval(&self, x: &[f64]) -> SmallMat;

    fn singular_at_origin(&self) -> bool {
        false
    }

    /// Distance from the origin in the induced metric, when known in closed form.
    fn vertex_distance(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn describe(&self) -> String;
}

/// Constant matrix field (identity, scalar and diagonal families).
#[derive(Debug, Clone)]
pub struct ConstantCoefficient {
    pub value: SmallMat,
    pub label: String,
}

impl CoefficientModel for ConstantCoefficient {
    fn dim(&self) -> usize {
        self.value.dim()
    }
    fn eval(&self, _x: &[f64]) -> SmallMat {
        self.value
    }
    fn vertex_distance(&self, x: &[f64]) -> Option<f64> {
        let n = self.value.dim();
        if n < 3 {
            return None;
        }
        let up = self.value.scale(self.value.det().powf(-1.0 / (n as f64 - 2.0)));
        Some(up.inverse()?.bilinear(x, x).sqrt())
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// A coefficient model together with its domain radius and sampled ellipticity pair.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    model: Arc<dyn CoefficientModel>,
    radius: f64,
    lambda: f64,
    big_lambda: f64,
}

impl CoefficientField {
    /// Wraps a model on the ball of the given radius; ellipticity is sampled and checked.
    pub fn new(model: Arc<dyn CoefficientModel>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(LabError::param("radius", "must be positive"));
        }
        let n = model.dim();
        if !(1..=crate::linalg::MAX_DIM).contains(&n) {
            return Err(LabError::Dimension {
                dim: n,
                reason: "coefficient fields support 1 ≤ n ≤ 5",
            });
        }
        let (lambda, big_lambda) = sample_ellipticity(model.as_ref(), radius, DEFAULT_SAMPLES)?;
        Ok(CoefficientField {
            model,
            radius,
            lambda,
            big_lambda,
        })
    }

    pub fn from_model(model: impl CoefficientModel + 'static, radius: f64) -> Result<Self> {
        Self::new(Arc::new(model), radius)
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(SmallMat::identity(n), "identity").expect("identity is elliptic")
    }

    pub fn scalar(n: usize, c: f64) -> Result<Self> {
        Self::constant(SmallMat::scalar(n, c), &format!("scalar:{c}"))
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::constant(SmallMat::diagonal(d), "diagonal")
    }

    pub fn constant(value: SmallMat, label: &str) -> Result<Self> {
        Self::from_model(
            ConstantCoefficient {
                value,
                label: label.to_string(),
            },
            1.0,
        )
    }

    pub fn convex_graph(a: &[f64]) -> Result<Self> {
        Self::from_model(ConvexGraph::new(a)?, 1.0)
    }

    pub fn planar_cone(theta: f64) -> Result<Self> {
        Self::from_model(PlanarCone::new(theta)?, 1.0)
    }

    /// Same model on a different domain radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.model.clone(), radius)
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Sampled (λ, Λ).
    pub fn ellipticity(&self) -> (f64, f64) {
        (self.lambda, self.big_lambda)
    }

    pub fn model(&self) -> &Arc<dyn CoefficientModel> {
        &self.model
    }

    pub fn singular_at_origin(&self) -> bool {
        self.model.singular_at_origin()
    }

    pub fn describe(&self) -> String {
        self.model.describe()
    }

    /// Evaluates A(x); rejects the discontinuity point.
    pub fn try_at(&self, x: &[f64]) -> Result<SmallMat> {
        if self.model.singular_at_origin() && x.iter().all(|v| *v == 0.0) {
            return Err(LabError::SingularPoint(x.to_vec()));
        }
        Ok(self.model.eval(x))
    }

    /// Evaluates A(x) without the origin check (quadrature points never hit it).
    #[inline]
    pub fn at(&self, x: &[f64]) -> SmallMat {
        debug_assert!(!(self.model.singular_at_origin() && x.iter().all(|v| *v == 0.0)));
        self.model.eval(x)
    }
}

fn sample_ellipticity(model: &dyn CoefficientModel, radius: f64, count: usize) -> Result<(f64, f64)> {
    let n = model.dim();
    let pts = halton_ball(n, count);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in &pts {
        let x: Vec<f64> = p.iter().map(|v| v * radius).collect();
        let a = model.eval(&x);
        let scale = a.norm_fro().max(f64::MIN_POSITIVE);
        if a.symmetry_residual() > 1e-12 * scale {
            return Err(LabError::NotSpd {
                point: x,
                min_eig: f64::NAN,
            });
        }
        let ev = a.sym_eigenvalues();
        if !(ev[0] > 0.0) {
            return Err(LabError::NotSpd {
                point: x,
                min_eig: ev[0],
            });
        }
        lo = lo.min(ev[0]);
        hi = hi.max(ev[n - 1]);
    }
    Ok((lo, hi))
}

/// Sampled (λ, Λ) of `field` on the ball of radius `radius` about the origin.
pub fn ellipticity_constants(field: &CoefficientField, radius: f64) -> Result<(f64, f64)> {
    ellipticity_constants_with(field, radius, DEFAULT_SAMPLES)
}

pub fn ellipticity_constants_with(
    field: &CoefficientField,
    radius: f64,
    samples: usize,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(LabError::EmptySample(radius));
    }
    let (lo, hi) = sample_ellipticity(field.model.as_ref(), radius, samples)?;
    if lo <= 0.0 {
        return Err(LabError::DegenerateEllipticity(lo));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_families() {
        assert_eq!(CoefficientField::identity(3).ellipticity(), (1.0, 1.0));
        let d = CoefficientField::diagonal(&[1.0, 4.0, 9.0]).unwrap();
        let (l, u) = ellipticity_constants(&d, 1.0).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (u - 9.0).abs() < 1e-12);
    }

    #[test]
    fn negative_scalar_is_rejected() {
        assert!(matches!(
            CoefficientField::scalar(3, -1.0),
            Err(LabError::NotSpd { .. })
        ));
    }

    #[test]
    fn scaling_scales_constants_linearly() {
        let a = CoefficientField::convex_graph(&[1.0, 2.0, 3.0]).unwrap();
        let c = 2.5;
        let m = a.model().clone();
        let scaled = CoefficientField::from_model(
            FnCoefficient::new(3, true, "scaled", move |x| m.eval(x).scale(c)),
            1.0,
        )
        .unwrap();
        let (l0, u0) = a.ellipticity();
        let (l1, u1) = scaled.ellipticity();
        assert!((l1 - c * l0).abs() < 1e-12 * l1);
        assert!((u1 - c * u0).abs() < 1e-12 * u1);
    }

    #[test]
    fn origin_is_refused_for_singular_models() {
        let a = CoefficientField::convex_graph(&[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(a.try_at(&[0.0; 3]), Err(LabError::SingularPoint(_))));
        assert!(a.try_at(&[0.1, 0.0, 0.0]).is_ok());
    }
}
