//! One runner per experiment kind. Each returns module results, verdicts and plot tables.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use conelab::campanato::{
    decay_bound, probe_boundary, run_iteration, verify_level_bound, IterationConfig, IterationSetup,
};
use conelab::coefficient::PlanarConeMetric;
use conelab::cone::{check_monotonicity, energy_average, parse_cone, ConeHarmonic, CrossSection, SectionPoint};
use conelab::fem::{
    ball_integrals, cached_mesh, solve_dirichlet, solve_poisson_dirichlet, BallGeometry, CgOptions, DistanceMode,
    MeshKind, MeshSpec,
};
use conelab::heat::{
    build_cutoff, default_t_grid, kernel_bounds_check, sample_pairs, smoothing_trace, trust_margin, CutoffTime,
    HeatKernel,
};
use conelab::weak::{certify_very_weak, weyl_demo, Certificate, FamilyOptions, FnField, PointFn, Sign};
use conelab::{parse_coefficient, LabError, MetricField};

use crate::config::{
    CampanatoSection, CertifySection, ConeEnergySection, CutoffSection, ExperimentConfig, Expectation,
    FieldSource, HeatSmoothSection, Kind, KernelCheckSection, MeshChoice, SignChoice, SolveSection,
    SpectrumSection, WeylSection,
};
use crate::fields::{builtin, grid_field, read_grid_csv};
use crate::report::{Outcome, Stopwatch, Table, Verdict};

/// Failure of a run before it produced verdicts.
#[derive(Debug)]
pub enum RunError {
    /// Bad input that the module itself refused (coarse resolution, bad parameters).
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 2,
            RunError::Runtime(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Input(_) => "input",
            RunError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> String {
        match self {
            RunError::Input(e) | RunError::Runtime(e) => format!("{e:#}"),
        }
    }
}

impl From<LabError> for RunError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Parse { .. }
            | LabError::InvalidParameter { .. }
            | LabError::Resolution { .. }
            | LabError::Dimension { .. } => RunError::Input(e.into()),
            other => RunError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<LabError>() {
            Ok(lab) => lab.into(),
            Err(e) => RunError::Input(e),
        }
    }
}

type Run = Result<Outcome, RunError>;

pub fn run(config: &ExperimentConfig, clock: &mut Stopwatch) -> Run {
    let seed = config.seed;
    let out = match config.kind() {
        Kind::Spectrum => spectrum(config.spectrum.as_ref().unwrap()),
        Kind::ConeEnergy => cone_energy(config.cone_energy.as_ref().unwrap(), seed, clock),
        Kind::Solve => solve(config.solve.as_ref().unwrap(), clock),
        Kind::Campanato => campanato(config.campanato.as_ref().unwrap(), clock),
        Kind::HeatSmooth => heat_smooth(config.heat_smooth.as_ref().unwrap()),
        Kind::KernelCheck => kernel_check(config.kernel_check.as_ref().unwrap(), seed),
        Kind::Cutoff => cutoff(config.cutoff.as_ref().unwrap()),
        Kind::CheckVeryWeak => check_very_weak(config.check_very_weak.as_ref().unwrap(), seed),
        Kind::WeylDemo => weyl(config.weyl_demo.as_ref().unwrap()),
    };
    clock.lap("run");
    out
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

fn spectrum(s: &SpectrumSection) -> Run {
    let spec = parse_cone(&s.cone, s.modes)?;
    let n = spec.cone_dim;
    let mut table = Table::new("spectrum", &["k[1]", "eigenvalue[1]", "exponent[1]", "degree[1]", "multiplicity[1]"]);
    let mut residual: f64 = 0.0;
    let mut min_alpha = f64::INFINITY;
    let mut exponents = Vec::new();
    for (k, m) in spec.modes.iter().enumerate() {
        let a = conelab::cone::exponent_from_eigenvalue(m.eigenvalue, n)?;
        residual = residual.max((a * (n + a - 2.0) - m.eigenvalue).abs() / m.eigenvalue.max(1.0));
        if m.eigenvalue > 0.0 {
            min_alpha = min_alpha.min(a);
        }
        exponents.push(a);
        table.push(vec![k as f64, m.eigenvalue, a, m.degree as f64, m.multiplicity as f64]);
    }
    let lam1 = spec.first_eigenvalue();
    let mut verdicts = vec![Verdict::at_most("exponent relation residual", residual, 1e-12)];
    if lam1.is_some_and(|l| l >= n - 1.0) {
        verdicts.push(Verdict::at_least("smallest nonconstant exponent", min_alpha, 1.0 - 1e-12));
    }
    Ok(Outcome {
        results: json!({ "spectrum": spec, "first_eigenvalue": lam1, "exponents": exponents }),
        verdicts,
        tables: vec![table],
    })
}

fn read_column(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v = rec.get(0).unwrap_or("").trim();
        out.push(v.parse::<f64>().with_context(|| format!("{}: `{v}` is not a number", path.display()))?);
    }
    Ok(out)
}

fn cone_energy(s: &ConeEnergySection, seed: u64, clock: &mut Stopwatch) -> Run {
    let spec = parse_cone(&s.cone, s.modes)?;
    let coefficients = match (&s.coefficients, &s.coefficients_csv) {
        (Some(c), _) => c.clone(),
        (None, Some(p)) => read_column(p)?,
        (None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    };
    let h = ConeHarmonic::new(spec.clone(), coefficients)?;
    let radii = geometric(s.r_min, s.r_max, s.radii);
    let mono = check_monotonicity(&h, &radii)?;
    let mut sweep = Table::new("energy", &["r[length]", "average[energy/volume]"]);
    for (r, a) in mono.radii.iter().zip(&mono.averages) {
        sweep.push(vec![*r, *a]);
    }
    let mut verdicts = vec![Verdict::at_most(
        "energy-average decreases between consecutive radii (tolerance 1e-10)",
        mono.violations.len() as f64,
        0.0,
    )];
    let mut tables = vec![sweep];
    let mut fem = None;
    clock.lap("spectral");
    if let (Some(fem_h), CrossSection::Circle { theta }) = (s.fem_h, spec.section) {
        let c = theta / (2.0 * PI);
        let mesh = cached_mesh(&MeshSpec {
            kind: MeshKind::RingDisc,
            dim: 2,
            radius: 1.0,
            resolution: (1.0 / fem_h).round().max(2.0) as usize,
        })?;
        let a = conelab::CoefficientField::planar_cone(theta)?;
        let metric = MetricField::from_model(PlanarConeMetric::new(theta)?);
        let geom = BallGeometry::metric(&mesh, &metric, DistanceMode::Exact)?;
        let u = solve_dirichlet(&a, &mesh, |x| {
            h.eval(1.0, SectionPoint::Angle(c * x[1].atan2(x[0]).rem_euclid(2.0 * PI)))
        })?;
        let mut t = Table::new("fem", &["r[length]", "spectral[energy/volume]", "fem[energy/volume]"]);
        let mut worst: f64 = 0.0;
        for &r in radii.iter().filter(|r| (0.2..=0.95).contains(*r)) {
            let exact = energy_average(&h, r);
            let approx = ball_integrals(&mesh, &u.values, &geom, r).average();
            worst = worst.max((approx - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
            t.push(vec![r, exact, approx]);
        }
        verdicts.push(Verdict::at_most("finite-element vs spectral relative gap", worst, s.fem_tol));
        fem = Some(json!({ "h": fem_h, "nodes": mesh.num_nodes(), "max_relative_gap": worst, "solve": u.stats }));
        tables.push(t);
        clock.lap("fem");
    }
    Ok(Outcome {
        results: json!({ "harmonic": h, "monotonicity": mono, "fem": fem }),
        verdicts,
        tables,
    })
}

/// The campanato probe, with missing coordinates read as zero.
fn probe(x: &[f64]) -> f64 {
    let mut p = [0.0; 3];
    for (a, v) in x.iter().take(3).enumerate() {
        p[a] = *v;
    }
    probe_boundary(&p)
}

fn solve(s: &SolveSection, clock: &mut Stopwatch) -> Run {
    let spec = match s.mesh {
        MeshChoice::Disc => MeshSpec {
            kind: MeshKind::RingDisc,
            dim: 2,
            radius: 1.0,
            resolution: (1.0 / s.h).round().max(2.0) as usize,
        },
        MeshChoice::Ball => MeshSpec {
            kind: MeshKind::MappedBall,
            dim: s.dim,
            radius: 1.0,
            resolution: s.cells,
        },
        MeshChoice::Cube => MeshSpec {
            kind: MeshKind::Box,
            dim: s.dim,
            radius: 1.0,
            resolution: s.cells,
        },
    };
    let mesh = cached_mesh(&spec)?;
    clock.lap("mesh");
    let a = parse_coefficient(&s.coefficient, s.dim)?;
    let cone_theta = s
        .coefficient
        .strip_prefix("cone2d:")
        .and_then(|t| t.trim().parse::<f64>().ok());
    let mode = s.boundary.strip_prefix("cone-mode:").and_then(|k| k.parse::<usize>().ok());
    let harmonic = match (cone_theta, mode) {
        (Some(theta), Some(k)) => Some((theta, ConeHarmonic::mode(conelab::cone::circle_spectrum(theta, k + 1)?, k)?)),
        _ => None,
    };
    let u = match (s.source, &harmonic) {
        (Some(f), _) => solve_poisson_dirichlet(&a, |_| f, &mesh)?,
        (None, Some((theta, h))) => {
            let c = theta / (2.0 * PI);
            solve_dirichlet(&a, &mesh, |x| {
                h.eval(1.0, SectionPoint::Angle(c * x[1].atan2(x[0]).rem_euclid(2.0 * PI)))
            })?
        }
        (None, None) => match s.boundary.as_str() {
            "linear" => solve_dirichlet(&a, &mesh, |x| x[0])?,
            "quadratic" => solve_dirichlet(&a, &mesh, |x| {
                x[0] * x[0] - x.get(1).map_or(0.0, |y| y * y)
            })?,
            _ => solve_dirichlet(&a, &mesh, probe)?,
        },
    };
    clock.lap("solve");
    let geom = match cone_theta {
        Some(theta) => {
            BallGeometry::metric(&mesh, &MetricField::from_model(PlanarConeMetric::new(theta)?), DistanceMode::Exact)?
        }
        None => BallGeometry::euclidean(&mesh),
    };
    let mut sweep = Table::new("energy", &["r[length]", "average[energy/volume]"]);
    let mut worst: f64 = 0.0;
    for r in geometric(s.r_min, s.r_max, s.radii) {
        let avg = ball_integrals(&mesh, &u.values, &geom, r).average();
        sweep.push(vec![r, avg]);
        if let Some((_, h)) = &harmonic {
            let exact = energy_average(h, r);
            worst = worst.max((avg - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
        }
    }
    let header: Vec<String> = (0..s.dim)
        .map(|a| format!("x{a}[length]"))
        .chain(std::iter::once("value[1]".to_string()))
        .collect();
    let mut field = Table::new("solution", &header.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..mesh.num_nodes() {
        let mut row = mesh.node(i).to_vec();
        row.push(u.values[i]);
        field.push(row);
    }
    let stats = u.stats.expect("solver statistics");
    let mut verdicts = vec![Verdict::at_most(
        "solver relative residual",
        stats.relative_residual,
        CgOptions::default().rtol,
    )];
    if harmonic.is_some() {
        verdicts.push(Verdict::at_most("energy average vs spectral relative gap", worst, s.tol));
    }
    Ok(Outcome {
        results: json!({
            "coefficient": a.describe(),
            "nodes": mesh.num_nodes(),
            "cells": mesh.num_cells(),
            "h": mesh.h,
            "solve": stats,
            "spectral_gap": harmonic.as_ref().map(|_| worst),
        }),
        verdicts,
        tables: vec![sweep, field],
    })
}

fn campanato(s: &CampanatoSection, clock: &mut Stopwatch) -> Run {
    let a = parse_coefficient(&s.coefficient, s.dim)?;
    let abar = parse_coefficient(&s.frozen, s.dim)?;
    let setup = IterationSetup::new(
        &abar,
        IterationConfig {
            rho: s.rho,
            l0: s.l0,
            levels: s.levels,
            cells_per_side: s.cells,
            ..Default::default()
        },
    )?;
    clock.lap("setup");
    let report = run_iteration(&setup, &a, &probe_boundary)?;
    clock.lap("iteration");
    let lambda = abar.ellipticity().0;
    let mut verdicts = Vec::new();
    let mut checks = Vec::new();
    for l in &report.levels {
        let chk = verify_level_bound(&report, l.level, lambda)?;
        if l.omega == 0.0 {
            verdicts.push(Verdict::at_most(
                format!("level {}: relative defect with vanishing modulus", l.level),
                l.relative_defect(),
                conelab::campanato::ZERO_DEFECT,
            ));
        } else {
            verdicts.push(Verdict::at_most(format!("level {}: measured C2 within budget", l.level), chk.measured_c2, chk.budget));
        }
        checks.push(chk);
    }
    let decay = match report.dini.value() {
        Some(_) if report.levels.len() >= 4 => {
            let d = decay_bound(&report)?;
            verdicts.push(Verdict::at_most("limsup energy-average ratio vs decay bound", d.limsup_ratio, d.bound));
            Some(d)
        }
        _ => None,
    };
    let mut table = Table::new(
        "levels",
        &[
            "level[1]",
            "radius[length]",
            "omega[1]",
            "c2[1]",
            "relative_defect[1]",
            "energy_average[energy/volume]",
            "volume[length^n]",
            "accumulated_product[1]",
        ],
    );
    let products = report.accumulated_product(report.chain_c3());
    for (l, p) in report.levels.iter().zip(&products) {
        table.push(vec![
            l.level as f64,
            l.radius,
            l.omega,
            l.measured_c2().unwrap_or(0.0),
            l.relative_defect(),
            l.energy_average,
            l.ball_volume,
            *p,
        ]);
    }
    Ok(Outcome {
        results: json!({
            "report": report,
            "level_checks": checks,
            "decay": decay,
            "measured_c3": report.measured_c3(),
            "chain_c3": report.chain_c3(),
        }),
        verdicts,
        tables: vec![table],
    })
}

fn heat_smooth(s: &HeatSmoothSection) -> Run {
    let source = FieldSource::parse("heat_smooth.field", &s.field).map_err(|e| RunError::Input(e.into()))?;
    let t_grid = s.t_grid.clone().unwrap_or_else(default_t_grid);
    let tmax = t_grid.iter().cloned().fold(0.0, f64::max);
    let half = s.radius + trust_margin(tmax, s.h) + 4.0 * s.h;
    let v = grid_field(&source, &s.center, half, s.h)?;
    let trace = smoothing_trace(&v, &s.center, s.radius, &t_grid)?;
    let mut table = Table::new("trace", &["t[time]", "sup_gradient[1/length]", "l1_distance[length^n]"]);
    for i in 0..trace.t.len() {
        table.push(vec![trace.t[i], trace.sup_gradient[i], trace.l1_distance[i]]);
    }
    let verdicts = match s.expect {
        Some(Expectation::Lipschitz) => {
            let scale = v.l1_norm().max(f64::MIN_POSITIVE);
            let largest = trace.l1_distance.iter().cloned().fold(0.0, f64::max);
            vec![
                Verdict::at_most("relative variation of sup gradient on B_{R/8}", trace.gradient_variation, 0.10),
                // heat-invariant data (harmonic quadratics) leave only round-off, with no rate to fit
                if largest <= 1e-12 * scale {
                    Verdict::at_most("relative L1 distance (heat-invariant data)", largest / scale, 1e-12)
                } else {
                    Verdict::at_least("log-log rate of the L1 distance", trace.l1_rate, 0.5)
                },
            ]
        }
        Some(Expectation::Blowup) => vec![Verdict::at_most(
            "distance of the gradient exponent from -1/2",
            (trace.gradient_exponent + 0.5).abs(),
            0.1,
        )],
        None => Vec::new(),
    };
    Ok(Outcome {
        results: json!({ "trace": trace, "lipschitz": trace.lipschitz() }),
        verdicts,
        tables: vec![table],
    })
}

fn kernel_check(s: &KernelCheckSection, seed: u64) -> Run {
    let mut verdicts = Vec::new();
    let mut reports = Vec::new();
    let mut table = Table::new("mass", &["dim[1]", "t[time]", "mass_error[1]", "diagonal[1]"]);
    for &n in &s.dims {
        let k = HeatKernel::new(n)?;
        let r = kernel_bounds_check(&k, &s.t_grid, &sample_pairs(n, s.pairs, &s.t_grid, seed.wrapping_add(n as u64)))?;
        verdicts.push(Verdict::at_most(format!("n={n}: samples outside the envelope"), r.violations as f64, 0.0));
        let mass = r.mass_errors.iter().cloned().fold(0.0, f64::max);
        verdicts.push(Verdict::at_most(format!("n={n}: max |mass - 1|"), mass, s.mass_tol));
        for i in 0..r.t_grid.len() {
            table.push(vec![n as f64, r.t_grid[i], r.mass_errors[i], r.diagonal[i]]);
        }
        reports.push(r);
    }
    Ok(Outcome {
        results: json!({ "reports": reports }),
        verdicts,
        tables: vec![table],
    })
}

fn cutoff(s: &CutoffSection) -> Run {
    let center = vec![0.0; s.dim];
    let mut reports = Vec::new();
    let mut verdicts = Vec::new();
    let mut table = Table::new(
        "cutoff",
        &["R[length]", "t[time]", "sup_gradient[1/length]", "sup_laplacian[1/length^2]", "scale_constant[1]"],
    );
    for &r in &s.radii {
        let c = build_cutoff(&center, r, CutoffTime::Drift { r0: s.r0 }, s.h)?;
        verdicts.push(Verdict::flag(format!("R={r}: equals 1 on B_R"), c.one_radius >= r - 1e-12));
        verdicts.push(Verdict::flag(format!("R={r}: supported in B_2R"), c.support_radius < 2.0 * r));
        table.push(vec![r, c.t, c.sup_gradient, c.sup_laplacian, c.scale_constant]);
        reports.push(c);
    }
    let lo = reports.iter().map(|c| c.scale_constant).fold(f64::INFINITY, f64::min);
    let hi = reports.iter().map(|c| c.scale_constant).fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    verdicts.push(Verdict::at_most("relative spread of R*sup(|grad eta| + |lap eta|)", spread, s.tol));
    Ok(Outcome {
        results: json!({ "cutoffs": reports, "spread": spread }),
        verdicts,
        tables: vec![table],
    })
}

fn sign_of(s: SignChoice) -> Sign {
    match s {
        SignChoice::Harmonic => Sign::Harmonic,
        SignChoice::Sub => Sign::Sub,
        SignChoice::Super => Sign::Super,
    }
}

fn certificate_verdicts(c: &Certificate) -> Vec<Verdict> {
    match c.sign {
        Sign::Harmonic => vec![Verdict::at_most(
            "largest |pairing ratio|",
            c.min_ratio.abs().max(c.max_ratio.abs()),
            c.tol,
        )],
        Sign::Sub => vec![Verdict::at_least("smallest pairing ratio", c.min_ratio, -c.tol)],
        Sign::Super => vec![Verdict::at_most("largest pairing ratio", c.max_ratio, c.tol)],
    }
}

fn check_very_weak(s: &CertifySection, seed: u64) -> Run {
    let source = FieldSource::parse("check_very_weak.field", &s.field).map_err(|e| RunError::Input(e.into()))?;
    let opts = FamilyOptions {
        size: s.family_size,
        seed,
        radii: None,
    };
    let sign = sign_of(s.sign);
    let cert = match &source {
        FieldSource::Builtin(name) => {
            certify_very_weak(&FnField::new(s.center.len(), builtin(name)), &s.center, s.radius, sign, opts, s.tol)?
        }
        FieldSource::Csv(p) => certify_very_weak(&read_grid_csv(p)?, &s.center, s.radius, sign, opts, s.tol)?,
    };
    Ok(Outcome {
        verdicts: certificate_verdicts(&cert),
        results: json!({
            "certificate": cert,
            "holds_as": {
                "harmonic": cert.holds_as(Sign::Harmonic),
                "sub": cert.holds_as(Sign::Sub),
                "super": cert.holds_as(Sign::Super),
            },
        }),
        tables: Vec::new(),
    })
}

/// The bump family is the certificate default; the seed does not enter.
fn weyl(s: &WeylSection) -> Run {
    let source = FieldSource::parse("weyl_demo.field", &s.field).map_err(|e| RunError::Input(e.into()))?;
    let t_grid = s.t_grid.clone().unwrap_or_else(default_t_grid);
    let tmax = t_grid.iter().cloned().fold(0.0, f64::max);
    let half = s.radius + trust_margin(tmax, s.h) + 4.0 * s.h;
    let u = grid_field(&source, &s.center, half, s.h)?;
    let truth_fn = match &source {
        FieldSource::Builtin(name) => Some(builtin(name)),
        FieldSource::Csv(_) => None,
    };
    let truth: Option<PointFn> = truth_fn.as_ref().map(|f| f as PointFn);
    let rep = weyl_demo(&u, &s.center, s.radius, s.tol, Some(&t_grid), truth)?;
    let tr = &rep.pipeline.trace;
    let mut table = Table::new("trace", &["t[time]", "sup_gradient[1/length]", "l1_distance[length^n]"]);
    for i in 0..tr.t.len() {
        table.push(vec![tr.t[i], tr.sup_gradient[i], tr.l1_distance[i]]);
    }
    let mut field = Table::new(
        "representative",
        &(0..s.center.len())
            .map(|a| match a {
                0 => "x0[length]",
                1 => "x1[length]",
                _ => "x2[length]",
            })
            .chain(std::iter::once("value[1]"))
            .collect::<Vec<_>>(),
    );
    if let Some(g) = &rep.pipeline.representative {
        for i in g.nodes_in_ball(&s.center, s.radius / 8.0) {
            let mut row = g.coords(i);
            row.push(g.values[i]);
            field.push(row);
        }
    }
    let mut verdicts = certificate_verdicts(&rep.certificate);
    verdicts.push(Verdict::at_most("relative variation of sup gradient on B_{R/8}", tr.gradient_variation, 0.10));
    verdicts.push(Verdict::at_least("log-log rate of the L1 distance", tr.l1_rate, 0.5));
    Ok(Outcome {
        results: json!({
            "certificate": rep.certificate,
            "trace": tr,
            "lipschitz": rep.pipeline.lipschitz,
            "lipschitz_constant": rep.lipschitz_constant,
            "recovery_error": rep.recovery_error,
        }),
        verdicts,
        tables: vec![table, field],
    })
}
