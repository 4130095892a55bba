//! Numerical laboratory for divergence-form elliptic equations with conical coefficients:
//! coefficient/metric geometry, cone harmonics, a P1 finite-element solver, the dyadic
//! frozen-coefficient iteration, heat-kernel smoothing and distributional Laplacian tests.

// `!(x > 0.0)` is the NaN-rejecting form used throughout input validation; index loops
// mirror the formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod campanato;
pub mod coefficient;
pub mod cone;
pub mod error;
pub mod fem;
pub mod heat;
pub mod linalg;
pub mod weak;

pub use coefficient::{
    coefficient_from_metric, dini_integral, ellipticity_constants, estimate_modulus,
    metric_from_coefficient, parse_coefficient, CoefficientField, DiniIntegral, DiniModulus,
    MetricField,
};
pub use cone::{ConeHarmonic, CrossSectionSpectrum};
pub use error::{LabError, Result};
pub use fem::{DiscreteField, Mesh};
pub use campanato::IterationReport;
pub use heat::{GridFunction, HeatKernel};
pub use weak::TestFunction;
