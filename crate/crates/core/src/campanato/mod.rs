//! Dyadic frozen-coefficient comparison: on metric balls B_ℓ of radius ρ^ℓ the solution u of
//! div(A∇u) = 0 is compared with the solution u_ℓ of the frozen problem div(Ā∇u_ℓ) = 0 that
//! shares its trace on ∂B_ℓ. The defect v_ℓ = u − u_ℓ is controlled by the Dini modulus of A − Ā.

mod budget;

pub use budget::{
    c2_budget, calibrate_budget, CalibrationRun, CALIBRATION_CELLS, CALIBRATION_FAMILY,
    CALIBRATION_RHO, C2_BUDGET_KAPPA,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficient::{
    dini_integral, estimate_modulus, metric_from_coefficient, CoefficientField, DiniIntegral,
    DiniModulus, MetricField, DEFAULT_SAMPLES,
};
use crate::error::{LabError, Result};
use crate::fem::{
    assemble, ball_integrals, cached_mesh, solve_constrained, BallGeometry, CgOptions, CsrMatrix,
    DistanceMode, Mesh, MeshKind, MeshSpec, SolveStats,
};
use crate::linalg::{halton_ball, norm};

/// Smallest number of cells across a level ball.
pub const MIN_CELLS_ACROSS: f64 = 8.0;

/// Relative size of ‖∇v‖/‖∇u‖ below which a defect counts as solver noise (10× the CG tolerance).
pub const ZERO_DEFECT: f64 = 10.0 * 1e-10;

/// Relative allowance for discretization error in the decay and monotonicity checks.
pub const DISCRETIZATION_MARGIN: f64 = 0.02;

/// C₁ = max(√max eig ḡ, 1/√min eig ḡ) over samples of the ball, so that
/// B_{r/C₁} ⊂ B^ḡ_r ⊂ B_{C₁r}.
pub fn estimate_bilipschitz(abar: &CoefficientField, radius: f64) -> Result<f64> {
    let g = metric_from_coefficient(abar)?;
    bilipschitz_of_metric(&g, radius)
}

pub fn bilipschitz_of_metric(g: &MetricField, radius: f64) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in halton_ball(g.dim(), DEFAULT_SAMPLES) {
        let x: Vec<f64> = p.iter().map(|v| v * radius).collect();
        let ev = g.lower(&x).sym_eigenvalues();
        if !(ev[0] > 0.0) {
            return Err(LabError::NotSpd {
                point: x,
                min_eig: ev[0],
            });
        }
        lo = lo.min(ev[0]);
        hi = hi.max(ev[ev.len() - 1]);
    }
    Ok(hi.sqrt().max(1.0 / lo.sqrt()).max(1.0))
}

/// Largest r ≤ R with ‖Ā‖ ≤ 2Λ and Ā ≥ λ/2 on B_r, (λ, Λ) being the constants of A.
pub fn comparison_radius(a: &CoefficientField, abar: &CoefficientField) -> Result<f64> {
    let (lambda, big) = a.ellipticity();
    let ok = |r: f64| -> bool {
        halton_ball(abar.dim(), DEFAULT_SAMPLES).iter().all(|p| {
            let x: Vec<f64> = p.iter().map(|v| v * r).collect();
            let ev = abar.at(&x).sym_eigenvalues();
            ev[ev.len() - 1] <= 2.0 * big && ev[0] >= 0.5 * lambda
        })
    };
    let radius = a.radius();
    if ok(radius) {
        return Ok(radius);
    }
    let (mut lo, mut hi) = (0.0, radius);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(LabError::DegenerateEllipticity(0.0));
    }
    Ok(lo)
}

/// Default boundary datum: a mix of a linear, a quadratic and a cubic term.
pub fn probe_boundary(x: &[f64]) -> f64 {
    x[0] + x[1] * x[2] + 0.5 * (x[0] * x[0] - x[2] * x[2]) + 0.3 * x[0] * x[1] * x[2]
}

/// Parameters of an iteration run.
#[derive(Clone, Debug)]
pub struct IterationConfig {
    /// Dyadic ratio; defaults to 1/C₁.
    pub rho: Option<f64>,
    /// First level; defaults to the smallest ℓ > 2 with ρ^ℓ < r₁/C₁.
    pub l0: Option<usize>,
    /// Number of levels requested.
    pub levels: usize,
    /// Lattice cells per side of the mapped ball mesh.
    pub cells_per_side: usize,
    /// Metric override (defaults to the metric induced by Ā).
    pub metric: Option<MetricField>,
    pub distance: Option<DistanceMode>,
    pub cg: CgOptions,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            rho: None,
            l0: None,
            levels: 6,
            cells_per_side: 96,
            metric: None,
            distance: None,
            cg: CgOptions::default(),
        }
    }
}

/// Mesh, frozen stiffness matrix and metric balls shared by runs with the same Ā.
pub struct IterationSetup {
    pub abar: CoefficientField,
    pub mesh: Arc<Mesh>,
    pub metric: MetricField,
    pub balls: BallGeometry,
    pub frozen: CsrMatrix,
    pub c1: f64,
    pub rho: f64,
    pub config: IterationConfig,
}

impl IterationSetup {
    pub fn new(abar: &CoefficientField, config: IterationConfig) -> Result<Self> {
        let n = abar.dim();
        if n < 3 {
            return Err(LabError::Dimension {
                dim: n,
                reason: "the iteration needs n ≥ 3",
            });
        }
        let metric = match &config.metric {
            Some(m) => m.clone(),
            None => metric_from_coefficient(abar)?,
        };
        let c1 = bilipschitz_of_metric(&metric, abar.radius())?;
        let rho = match config.rho {
            Some(r) if r > 0.0 && r < 1.0 => r,
            Some(_) => return Err(LabError::param("rho", "must lie in (0, 1)")),
            None => {
                if c1 <= 1.0 + 1e-12 {
                    return Err(LabError::param(
                        "rho",
                        "C1 = 1 makes the default ratio 1/C1 degenerate; give an override",
                    ));
                }
                1.0 / c1
            }
        };
        if config.levels == 0 {
            return Err(LabError::param("levels", "need at least one level"));
        }
        let mesh = cached_mesh(&MeshSpec {
            kind: MeshKind::MappedBall,
            dim: n,
            radius: abar.radius(),
            resolution: config.cells_per_side,
        })?;
        let balls = match config.distance {
            Some(mode) => BallGeometry::metric(&mesh, &metric, mode)?,
            None => BallGeometry::metric_auto(&mesh, &metric)?,
        };
        let frozen = assemble(abar, &mesh)?;
        Ok(IterationSetup {
            abar: abar.clone(),
            mesh,
            metric,
            balls,
            frozen,
            c1,
            rho,
            config,
        })
    }
}

/// Record of one dyadic level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    /// Metric radius ρ^ℓ.
    pub radius: f64,
    /// Largest Euclidean norm of a node inside the ball.
    pub euclidean_radius: f64,
    pub cells_across: f64,
    /// C₁ρ^ℓ, the Euclidean radius containing the ball (equal to ρ^{ℓ−1} when ρ = 1/C₁).
    pub modulus_argument: f64,
    pub omega: f64,
    /// ‖∇_ḡ v_ℓ‖² over its support.
    pub comparison_energy: f64,
    /// ‖∇_ḡ u‖² over B_ℓ.
    pub solution_energy: f64,
    pub ball_volume: f64,
    /// Mean of |∇_ḡ u|² over B_ℓ.
    pub energy_average: f64,
    /// Mean of |∇_ḡ u_ℓ|² over B_ℓ and over B_{ℓ+1}.
    pub frozen_outer_average: f64,
    pub frozen_inner_average: f64,
    pub free_nodes: usize,
    pub solve: SolveStats,
}

impl LevelRecord {
    /// ‖∇v_ℓ‖ / (ω·‖∇u‖); `None` when ω = 0.
    pub fn measured_c2(&self) -> Option<f64> {
        (self.omega > 0.0).then(|| {
            self.comparison_energy.max(0.0).sqrt() / (self.omega * self.solution_energy.sqrt())
        })
    }

    /// ‖∇v_ℓ‖ / ‖∇u‖
    pub fn relative_defect(&self) -> f64 {
        (self.comparison_energy.max(0.0) / self.solution_energy).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub dim: usize,
    pub coefficient: String,
    pub frozen_coefficient: String,
    pub rho: f64,
    pub c1: f64,
    pub r1: f64,
    pub l0: usize,
    pub lambda: f64,
    pub big_lambda: f64,
    /// Constant in ‖∂_j u‖ ≤ C‖∇_ḡ u‖, namely 1/√λ(Ā).
    pub cross_norm_constant: f64,
    pub h: f64,
    pub nodes: usize,
    pub outer_solve: SolveStats,
    pub modulus: DiniModulus,
    pub dini: DiniIntegral,
    pub levels: Vec<LevelRecord>,
    /// Why the level sequence stopped early, if it did.
    pub truncated: Option<String>,
}

impl IterationReport {
    pub fn level(&self, l: usize) -> Option<&LevelRecord> {
        self.levels.iter().find(|r| r.level == l)
    }

    /// avg_{ℓ+1}/avg_ℓ for consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| w[1].energy_average / w[0].energy_average)
            .collect()
    }

    /// vol(B_ℓ)/vol(B_{ℓ+1}) for consecutive levels (ρ^{−n} on exact cones).
    pub fn volume_ratios(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[0].ball_volume / w[1].ball_volume).collect()
    }

    /// C₃ = max over levels with ω > 0 of (√(avg_{ℓ+1}/avg_ℓ) − 1)/ω, floored at 0.
    pub fn measured_c3(&self) -> f64 {
        self.levels
            .windows(2)
            .filter(|w| w[0].omega > 0.0)
            .map(|w| ((w[1].energy_average / w[0].energy_average).sqrt() - 1.0) / w[0].omega)
            .fold(0.0, f64::max)
    }

    /// Largest measured C₂ over the levels.
    pub fn max_c2(&self) -> f64 {
        self.levels.iter().filter_map(|l| l.measured_c2()).fold(0.0, f64::max)
    }

    /// C₂/ρⁿ as in the proof's constant chain, with the largest measured C₂.
    pub fn chain_c3(&self) -> f64 {
        self.max_c2() / self.rho.powi(self.modulus_dim() as i32)
    }

    fn modulus_dim(&self) -> usize {
        self.dim
    }

    /// Π (1 + C₃ω_ℓ) over the recorded levels.
    pub fn accumulated_product(&self, c3: f64) -> Vec<f64> {
        let mut p = 1.0;
        self.levels
            .iter()
            .map(|l| {
                p *= 1.0 + c3 * l.omega;
                p
            })
            .collect()
    }
}

/// Solves the outer problem with A and the frozen comparisons on each level ball.
pub fn run_iteration(
    setup: &IterationSetup,
    a: &CoefficientField,
    boundary: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<IterationReport> {
    let abar = &setup.abar;
    if a.dim() != abar.dim() {
        return Err(LabError::Dimension {
            dim: a.dim(),
            reason: "A and its frozen coefficient differ in dimension",
        });
    }
    let mesh = &setup.mesh;
    let cfg = &setup.config;
    let (c1, rho) = (setup.c1, setup.rho);
    let r1 = comparison_radius(a, abar)?;
    let l0 = match cfg.l0 {
        Some(l) if l > 2 && rho.powi(l as i32) < r1 / c1 => l,
        Some(l) => {
            return Err(LabError::param(
                "l0",
                format!("level {l} must exceed 2 and satisfy rho^l0 < r1/C1"),
            ))
        }
        None => {
            let mut l = 3;
            while rho.powi(l as i32) >= r1 / c1 {
                l += 1;
            }
            l
        }
    };
    let modulus = estimate_modulus(a, abar, &DiniModulus::default_grid(a.radius()))?;
    let dini = dini_integral(&modulus);

    // outer problem with the true coefficient
    let k_true = assemble(a, mesh)?;
    let nn = mesh.num_nodes();
    let outer_values: Vec<f64> = (0..nn)
        .map(|i| if mesh.boundary[i] { boundary(mesh.node(i)) } else { 0.0 })
        .collect();
    let (u, outer_solve) = solve_constrained(&k_true, &mesh.boundary, &outer_values, None, cfg.cg)?;
    drop(k_true);

    let dist = setup.balls.node_distances();
    let mut levels = Vec::new();
    let mut truncated = None;
    for l in l0..l0 + cfg.levels {
        let radius = rho.powi(l as i32);
        let inside: Vec<bool> = (0..nn).map(|i| dist[i] < radius && !mesh.boundary[i]).collect();
        let euclidean_radius = (0..nn)
            .filter(|&i| inside[i])
            .map(|i| norm(mesh.node(i)))
            .fold(0.0, f64::max);
        let cells_across = 2.0 * euclidean_radius / mesh.h;
        if cells_across < MIN_CELLS_ACROSS {
            truncated = Some(format!(
                "level {l}: ball spans {cells_across:.1} cells, fewer than {MIN_CELLS_ACROSS}"
            ));
            break;
        }
        let fixed: Vec<bool> = inside.iter().map(|b| !b).collect();
        let (ul, solve) = solve_constrained(&setup.frozen, &fixed, &u, None, cfg.cg)?;
        let v: Vec<f64> = u.iter().zip(&ul).map(|(a, b)| a - b).collect();
        let comparison_energy = setup.frozen.quadratic_form(&v);
        let bu = ball_integrals(mesh, &u, &setup.balls, radius);
        let bl_outer = ball_integrals(mesh, &ul, &setup.balls, radius);
        let bl_inner = ball_integrals(mesh, &ul, &setup.balls, radius * rho);
        let arg = c1 * radius;
        levels.push(LevelRecord {
            level: l,
            radius,
            euclidean_radius,
            cells_across,
            modulus_argument: arg,
            omega: modulus.value_at(arg),
            comparison_energy,
            solution_energy: bu.energy,
            ball_volume: bu.volume,
            energy_average: bu.average(),
            frozen_outer_average: bl_outer.average(),
            frozen_inner_average: bl_inner.average(),
            free_nodes: inside.iter().filter(|b| **b).count(),
            solve,
        });
    }
    let (lambda, big_lambda) = a.ellipticity();
    Ok(IterationReport {
        dim: a.dim(),
        coefficient: a.describe(),
        frozen_coefficient: abar.describe(),
        rho,
        c1,
        r1,
        l0,
        lambda,
        big_lambda,
        cross_norm_constant: 1.0 / abar.ellipticity().0.sqrt(),
        h: mesh.h,
        nodes: nn,
        outer_solve,
        modulus,
        dini,
        levels,
        truncated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub level: usize,
    pub holds: bool,
    pub measured_c2: f64,
    pub budget: f64,
}

/// Tests ‖∇v_ℓ‖ ≤ C₂·ω·‖∇u‖ against the frozen budget for the ellipticity of Ā.
pub fn verify_level_bound(report: &IterationReport, level: usize, frozen_lambda: f64) -> Result<LevelCheck> {
    let rec = report
        .level(level)
        .ok_or_else(|| LabError::InsufficientData(format!("level {level} not in report")))?;
    let budget = c2_budget(frozen_lambda);
    if rec.omega == 0.0 {
        if rec.relative_defect() > ZERO_DEFECT {
            return Err(LabError::Inconsistent(format!(
                "modulus vanishes at level {level} but the defect is {:e}",
                rec.relative_defect()
            )));
        }
        return Ok(LevelCheck {
            level,
            holds: true,
            measured_c2: 0.0,
            budget,
        });
    }
    let c2 = rec.measured_c2().unwrap();
    Ok(LevelCheck {
        level,
        holds: c2 <= budget,
        measured_c2: c2,
        budget,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    /// max over the last half of levels of avg_ℓ/avg_{ℓ₀}.
    pub limsup_ratio: f64,
    /// exp(2C₃/(1−ρ)·∫₀¹ω/t).
    pub bound: f64,
    pub c3_measured: f64,
    /// Same bound with the chain constant C₂/ρⁿ.
    pub chain_bound: f64,
    pub holds: bool,
    /// bound·(1 + margin) − limsup_ratio.
    pub margin: f64,
}

/// Final energy-average bound on a report.
pub fn decay_bound(report: &IterationReport) -> Result<DecayCheck> {
    if report.levels.len() < 4 {
        return Err(LabError::InsufficientData(format!(
            "{} levels, need at least 4",
            report.levels.len()
        )));
    }
    let dini = report.dini.value().ok_or_else(|| {
        LabError::InsufficientData("modulus is not Dini; the bound is infinite".into())
    })?;
    let first = report.levels[0].energy_average;
    let half = report.levels.len() / 2;
    let limsup_ratio = report.levels[half..]
        .iter()
        .map(|l| l.energy_average / first)
        .fold(0.0, f64::max);
    let c3 = report.measured_c3();
    let bound = exp_bound(c3, report.rho, dini);
    let chain_bound = exp_bound(report.chain_c3(), report.rho, dini);
    let allowed = bound * (1.0 + DISCRETIZATION_MARGIN);
    Ok(DecayCheck {
        limsup_ratio,
        bound,
        c3_measured: c3,
        chain_bound,
        holds: limsup_ratio <= allowed,
        margin: allowed - limsup_ratio,
    })
}

/// exp(2C₃/(1−ρ)·D)
pub fn exp_bound(c3: f64, rho: f64, dini: f64) -> f64 {
    (2.0 * c3 / (1.0 - rho) * dini).exp()
}

/// Σ_{ℓ ≥ ℓ₀−1, ρ^ℓ ≥ t_min} ω(ρ^ℓ) against (1−ρ)⁻¹∫₀^{ρ^{ℓ₀−2}} ω/t.
pub fn telescoping_check(modulus: &DiniModulus, rho: f64, l0: usize) -> Result<(f64, f64)> {
    if l0 < 2 {
        return Err(LabError::param("l0", "must be at least 2"));
    }
    let t_min = modulus.grid()[0];
    let mut sum = 0.0;
    let mut l = l0 - 1;
    while rho.powi(l as i32) >= t_min {
        sum += modulus.value_at(rho.powi(l as i32));
        l += 1;
    }
    let upper = crate::coefficient::dini_integral_upto(modulus, rho.powi(l0 as i32 - 2))
        .value()
        .ok_or_else(|| LabError::InsufficientData("modulus is not Dini".into()))?;
    Ok((sum, upper / (1.0 - rho)))
}

/// Growth of Π(1 + c·ω(C₁ρ^ℓ)) for ℓ = ℓ₀, …, ℓ₀ + 2^k − 1, with ω sampled from A − Ā.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccumulationProfile {
    /// Level counts 1, 2, 4, …
    pub counts: Vec<usize>,
    /// log Π(1 + cω) after each count.
    pub log_products: Vec<f64>,
}

impl AccumulationProfile {
    /// Increment of the log product over each doubling of the level count.
    pub fn doubling_increments(&self) -> Vec<f64> {
        self.log_products.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Saturates when the last doubling adds less than a tenth of the largest one.
    pub fn saturates(&self) -> bool {
        let inc = self.doubling_increments();
        let peak = inc.iter().cloned().fold(0.0, f64::max);
        match inc.last() {
            Some(last) => *last < 0.1 * peak || peak == 0.0,
            None => true,
        }
    }
}

pub fn accumulation_profile(
    a: &CoefficientField,
    abar: &CoefficientField,
    c: f64,
    rho: f64,
    c1: f64,
    l0: usize,
    doublings: usize,
) -> Result<AccumulationProfile> {
    let total = 1usize << doublings;
    let grid: Vec<f64> = (0..total)
        .rev()
        .map(|k| c1 * rho.powi((l0 + k) as i32))
        .collect();
    let w = estimate_modulus(a, abar, &grid)?;
    // grid ascending ⇒ index total−1−k is level l0 + k
    let mut acc = 0.0;
    let mut counts = Vec::new();
    let mut log_products = Vec::new();
    for k in 0..total {
        acc += (1.0 + c * w.values()[total - 1 - k]).ln();
        if (k + 1).is_power_of_two() {
            counts.push(k + 1);
            log_products.push(acc);
        }
    }
    Ok(AccumulationProfile {
        counts,
        log_products,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{ConvexGraphMetric, Perturbation, Perturbed};

    #[test]
    fn bilipschitz_examples() {
        assert_eq!(estimate_bilipschitz(&CoefficientField::identity(3), 1.0).unwrap(), 1.0);
        let g = MetricField::from_model(crate::coefficient::FnMetric::new(3, "d", |_| {
            crate::linalg::SmallMat::diagonal(&[0.25, 1.0, 1.0])
        }));
        assert!((bilipschitz_of_metric(&g, 1.0).unwrap() - 2.0).abs() < 1e-14);
        let cg = CoefficientField::convex_graph(&[1.0, 1.0, 1.0]).unwrap();
        let c1 = estimate_bilipschitz(&cg, 1.0).unwrap();
        assert!((c1 - 2f64.sqrt()).abs() < 1e-12, "{c1}");
        let exact = MetricField::from_model(ConvexGraphMetric::new(&[1.0, 1.0, 1.0]).unwrap());
        assert!((bilipschitz_of_metric(&exact, 1.0).unwrap() - c1).abs() < 1e-12);
    }

    #[test]
    fn default_ratio_needs_nontrivial_metric() {
        let cfg = IterationConfig {
            cells_per_side: 8,
            ..Default::default()
        };
        assert!(IterationSetup::new(&CoefficientField::identity(3), cfg).is_err());
    }

    #[test]
    fn exp_bound_algebra() {
        let b1 = exp_bound(1.3, 0.8, 0.7);
        let b2 = exp_bound(1.3, 0.8, 1.4);
        assert!((b2 - b1 * b1).abs() <= 1e-9 * b2);
        assert_eq!(exp_bound(0.0, 0.5, 3.0), 1.0);
    }

    #[test]
    fn telescoping_holds_for_power_moduli() {
        let w = DiniModulus::from_fn(&DiniModulus::default_grid(1.0), |t| 0.2 * t.sqrt()).unwrap();
        for rho in [0.5, std::f64::consts::FRAC_1_SQRT_2, 0.8] {
            let (s, b) = telescoping_check(&w, rho, 3).unwrap();
            assert!(s <= b, "{s} {b}");
        }
    }

    #[test]
    fn accumulation_separates_dini_from_log() {
        let abar = CoefficientField::convex_graph(&[1.0, 1.0, 1.0]).unwrap();
        let wrap = |kind| {
            CoefficientField::new(
                Arc::new(Perturbed {
                    base: abar.model().clone(),
                    kind,
                }),
                1.0,
            )
            .unwrap()
        };
        let holder = wrap(Perturbation::Holder { eps: 0.2, beta: 0.5 });
        let log = wrap(Perturbation::LogDini { eps: 0.5 });
        let c1 = 2f64.sqrt();
        let p = accumulation_profile(&holder, &abar, 1.0, 0.8, c1, 3, 8).unwrap();
        let q = accumulation_profile(&log, &abar, 1.0, 0.8, c1, 3, 8).unwrap();
        assert!(p.saturates());
        assert!(!q.saturates());
    }
}
