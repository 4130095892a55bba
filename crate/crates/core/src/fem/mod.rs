//! P1 finite elements on simplicial meshes of balls: assembly, Dirichlet and Poisson solves,
//! and ball-averaged gradient energies.

mod ball;
mod cache;
mod mesh;
mod sparse;

pub use ball::{
    ball_integrals, gradient_energy_average, graph_distances, BallGeometry, BallIntegral,
    DistanceMode, MIN_CELLS,
};
pub(crate) use ball::refined_centroids;
pub use cache::{cached_mesh, MeshSpec, CACHE_ENV};
pub use mesh::{quadrature_rule, CellGeometry, Mesh, MeshKind};
pub use sparse::{dot, pcg, CgOptions, CsrMatrix, SolveStats};

use std::sync::Arc;

use rayon::prelude::*;

use crate::coefficient::CoefficientField;
use crate::error::{LabError, Result};
use crate::linalg::{SmallMat, MAX_DIM};

/// Node values of a P1 function on a shared mesh.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    /// Linear-solver statistics when the field came from a solve.
    pub stats: Option<SolveStats>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(LabError::Inconsistent(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Inconsistent("non-finite node value".into()));
        }
        Ok(DiscreteField {
            mesh,
            values,
            stats: None,
        })
    }

    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = mesh.interpolate(f);
        DiscreteField {
            mesh,
            values,
            stats: None,
        }
    }

    /// Values at boundary nodes, in node order.
    pub fn boundary_trace(&self) -> Vec<(usize, f64)> {
        self.mesh
            .boundary
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| (i, self.values[i]))
            .collect()
    }

    pub fn sub(&self, other: &DiscreteField) -> DiscreteField {
        DiscreteField {
            mesh: self.mesh.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            stats: None,
        }
    }

    /// ‖u − f‖_{L²} by cell quadrature.
    pub fn l2_error(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let m = &self.mesh;
        let n = m.dim;
        let (bary, _) = quadrature_rule(n);
        let mut pts = [[0.0; MAX_DIM]; MAX_DIM + 1];
        let mut total = 0.0;
        for c in 0..m.num_cells() {
            let w = m.quadrature_points(c, &mut pts);
            let vol = m.cell_geometry(c).volume;
            let v = m.cell(c);
            for (q, wq) in w.iter().enumerate() {
                let uh: f64 = (0..=n).map(|k| bary[q * (n + 1) + k] * self.values[v[k] as usize]).sum();
                total += vol * wq * (uh - f(&pts[q][..n])).powi(2);
            }
        }
        total.sqrt()
    }

    /// max over nodes of |u − f|.
    pub fn max_nodal_error(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.mesh.num_nodes())
            .map(|i| (self.values[i] - f(self.mesh.node(i))).abs())
            .fold(0.0, f64::max)
    }
}

const ASSEMBLY_CHUNK: usize = 1 << 15;

/// Cell average Σ_q w_q A(x_q) over the vertex-avoiding quadrature points.
pub fn cell_coefficient(a: &CoefficientField, mesh: &Mesh, c: usize) -> SmallMat {
    let n = mesh.dim;
    let mut pts = [[0.0; MAX_DIM]; MAX_DIM + 1];
    let w = mesh.quadrature_points(c, &mut pts);
    let mut acc = SmallMat::zeros(n);
    for (q, wq) in w.iter().enumerate() {
        acc = acc.add(&a.at(&pts[q][..n]).scale(*wq));
    }
    acc
}

/// Stiffness matrix K_ij = ∫⟨A∇φ_j, ∇φ_i⟩ with per-cell quadrature of A.
pub fn assemble(a: &CoefficientField, mesh: &Mesh) -> Result<CsrMatrix> {
    if a.dim() != mesh.dim {
        return Err(LabError::Dimension {
            dim: mesh.dim,
            reason: "coefficient and mesh dimensions differ",
        });
    }
    let n = mesh.dim;
    let k = n + 1;
    let mut mat = CsrMatrix::pattern(mesh);
    let nc = mesh.num_cells();
    let mut local = vec![0.0; ASSEMBLY_CHUNK * k * k];
    let mut start = 0;
    while start < nc {
        let end = (start + ASSEMBLY_CHUNK).min(nc);
        local[..(end - start) * k * k]
            .par_chunks_mut(k * k)
            .enumerate()
            .for_each(|(off, out)| {
                let c = start + off;
                let g = mesh.cell_geometry(c);
                let abar = cell_coefficient(a, mesh, c);
                let mut ag = [0.0; MAX_DIM];
                for p in 0..k {
                    abar.mul_vec(g.grad(p), &mut ag);
                    for q in 0..k {
                        let gq = g.grad(q);
                        out[p * k + q] = g.volume * (0..n).map(|d| ag[d] * gq[d]).sum::<f64>();
                    }
                }
            });
        for c in start..end {
            let v = mesh.cell(c);
            let out = &local[(c - start) * k * k..(c - start + 1) * k * k];
            for p in 0..k {
                for q in 0..k {
                    mat.add(v[p] as usize, v[q] as usize, out[p * k + q]);
                }
            }
        }
        start = end;
    }
    for i in 0..mat.n {
        if !(mat.get(i, i) > 0.0) {
            return Err(LabError::Singular { node: i });
        }
    }
    Ok(mat)
}

/// Load vector F_i = ∫ f φ_i.
pub fn load_vector(mesh: &Mesh, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let n = mesh.dim;
    let (bary, _) = quadrature_rule(n);
    let mut pts = [[0.0; MAX_DIM]; MAX_DIM + 1];
    let mut out = vec![0.0; mesh.num_nodes()];
    for c in 0..mesh.num_cells() {
        let w = mesh.quadrature_points(c, &mut pts);
        let vol = mesh.cell_geometry(c).volume;
        let v = mesh.cell(c);
        for (q, wq) in w.iter().enumerate() {
            let fq = f(&pts[q][..n]) * vol * wq;
            for k in 0..=n {
                out[v[k] as usize] += fq * bary[q * (n + 1) + k];
            }
        }
    }
    out
}

/// Solves K u = load on the free nodes with u = `values` on the fixed ones.
pub fn solve_constrained(
    k: &CsrMatrix,
    fixed: &[bool],
    values: &[f64],
    load: Option<&[f64]>,
    opts: CgOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let free: Vec<bool> = fixed.iter().map(|f| !f).collect();
    let (sub, map) = k.submatrix(&free);
    let mut out = values.to_vec();
    if sub.n == 0 {
        return Ok((
            out,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut rhs = vec![0.0; sub.n];
    let mut guess = vec![0.0; sub.n];
    for i in 0..k.n {
        let li = map[i];
        if li == u32::MAX {
            continue;
        }
        let li = li as usize;
        guess[li] = values[i];
        let mut s = load.map(|l| l[i]).unwrap_or(0.0);
        let (c, v) = k.row(i);
        for (j, a) in c.iter().zip(v) {
            if fixed[*j as usize] {
                s -= a * values[*j as usize];
            }
        }
        rhs[li] = s;
    }
    let stats = pcg(&sub, &rhs, &mut guess, opts)?;
    for i in 0..k.n {
        if map[i] != u32::MAX {
            out[i] = guess[map[i] as usize];
        }
    }
    Ok((out, stats))
}

/// Discrete energy minimizer of ∫⟨A∇u,∇u⟩ with u = g on the boundary nodes.
pub fn solve_dirichlet(
    a: &CoefficientField,
    mesh: &Arc<Mesh>,
    g: impl Fn(&[f64]) -> f64,
) -> Result<DiscreteField> {
    let k = assemble(a, mesh)?;
    solve_dirichlet_assembled(&k, mesh, g)
}

pub fn solve_dirichlet_assembled(
    k: &CsrMatrix,
    mesh: &Arc<Mesh>,
    g: impl Fn(&[f64]) -> f64,
) -> Result<DiscreteField> {
    let values: Vec<f64> = (0..mesh.num_nodes())
        .map(|i| if mesh.boundary[i] { g(mesh.node(i)) } else { 0.0 })
        .collect();
    let (u, stats) = solve_constrained(k, &mesh.boundary, &values, None, CgOptions::default())?;
    Ok(DiscreteField {
        mesh: mesh.clone(),
        values: u,
        stats: Some(stats),
    })
}

/// w with zero boundary trace and ∫⟨A∇w,∇φ⟩ = −∫fφ for interior basis functions φ,
/// i.e. div(A∇w) = f weakly.
pub fn solve_poisson_dirichlet(
    a: &CoefficientField,
    f: impl Fn(&[f64]) -> f64,
    mesh: &Arc<Mesh>,
) -> Result<DiscreteField> {
    let k = assemble(a, mesh)?;
    let load: Vec<f64> = load_vector(mesh, f).iter().map(|v| -v).collect();
    let zeros = vec![0.0; mesh.num_nodes()];
    let (w, stats) = solve_constrained(&k, &mesh.boundary, &zeros, Some(&load), CgOptions::default())?;
    Ok(DiscreteField {
        mesh: mesh.clone(),
        values: w,
        stats: Some(stats),
    })
}

/// Dirichlet energy uᵀKu.
pub fn energy(k: &CsrMatrix, u: &[f64]) -> f64 {
    k.quadratic_form(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{CoefficientField, RandomSmooth};
    use crate::linalg::norm;
    use std::f64::consts::PI;

    #[test]
    fn interval_stencil() {
        let m = Mesh::interval(0.0, 1.0, 2).unwrap();
        let k = assemble(&CoefficientField::identity(1), &m).unwrap();
        let h = 0.5;
        assert!((k.get(1, 0) + 1.0 / h).abs() < 1e-14);
        assert!((k.get(1, 1) - 2.0 / h).abs() < 1e-14);
        assert!((k.get(1, 2) + 1.0 / h).abs() < 1e-14);
    }

    #[test]
    fn random_field_assembly_is_symmetric() {
        let m = Mesh::mapped_ball(3, 1.0, 6).unwrap();
        let a = CoefficientField::from_model(RandomSmooth::new(3, 5), 1.0).unwrap();
        let k = assemble(&a, &m).unwrap();
        assert!(k.symmetry_residual() <= 1e-12);
    }

    #[test]
    fn linear_energy_is_volume() {
        let m = Mesh::ring_disc(1.0, 1.0 / 32.0).unwrap();
        let k = assemble(&CoefficientField::identity(2), &m).unwrap();
        let u = m.interpolate(|x| x[0]);
        let vol: f64 = (0..m.num_cells()).map(|c| m.cell_geometry(c).volume).sum();
        assert!((energy(&k, &u) - vol).abs() < 1e-10);
        assert!((energy(&k, &u) - PI).abs() < 1e-2);
    }

    #[test]
    fn linear_data_is_reproduced() {
        let m = Arc::new(Mesh::ring_disc(1.0, 1.0 / 16.0).unwrap());
        let u = solve_dirichlet(&CoefficientField::identity(2), &m, |x| x[0]).unwrap();
        assert!(u.max_nodal_error(|x| x[0]) < 1e-9);
        assert!(u.stats.unwrap().relative_residual <= 1e-10);
    }

    #[test]
    fn poisson_paraboloid() {
        let m = Arc::new(Mesh::ring_disc(1.0, 1.0 / 32.0).unwrap());
        let w = solve_poisson_dirichlet(&CoefficientField::identity(2), |_| 4.0, &m).unwrap();
        let e = w.max_nodal_error(|x| x[0] * x[0] + x[1] * x[1] - 1.0);
        assert!(e < 2e-3, "{e}");
        let z = solve_poisson_dirichlet(&CoefficientField::identity(2), |_| 0.0, &m).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn harmonic_quadratic_converges() {
        let exact = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let err = |h: f64| {
            let m = Arc::new(Mesh::ring_disc(1.0, h).unwrap());
            let u = solve_dirichlet(&CoefficientField::identity(2), &m, |x| {
                let a = x[1].atan2(x[0]);
                (2.0 * a).cos() * norm(x).powi(2)
            })
            .unwrap();
            u.l2_error(exact)
        };
        let (e1, e2) = (err(1.0 / 16.0), err(1.0 / 32.0));
        assert!((e1 / e2).log2() >= 1.8, "{e1} {e2}");
    }
}
