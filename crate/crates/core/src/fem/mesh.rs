use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::MAX_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    Interval,
    /// Concentric rings of 6k nodes at radius k·h.
    RingDisc,
    /// Lattice of the cube mapped radially onto the ball, Kuhn-split.
    MappedBall,
    /// Kuhn-split lattice of the cube [−R, R]ⁿ.
    Box,
}

/// Simplicial mesh with flat coordinate and connectivity arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub kind: MeshKind,
    /// Node coordinates, `dim` per node.
    pub coords: Vec<f64>,
    /// Simplex vertex indices, `dim + 1` per cell.
    pub cells: Vec<u32>,
    pub boundary: Vec<bool>,
    /// Characteristic cell size.
    pub h: f64,
    /// Radius of the domain ball (half-width for boxes).
    pub radius: f64,
    /// Index of the node at the origin, if any.
    pub origin: Option<usize>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn cell(&self, c: usize) -> &[u32] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    /// Geometry of cell `c`: gradients of the barycentric functions (row-major, (n+1)×n) and volume.
    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        let n = self.dim;
        let v = self.cell(c);
        let p0 = self.node(v[0] as usize);
        let mut e = crate::linalg::SmallMat::zeros(n);
        for k in 0..n {
            let pk = self.node(v[k + 1] as usize);
            for d in 0..n {
                e.set(d, k, pk[d] - p0[d]);
            }
        }
        let det = e.det();
        let inv = e.inverse().unwrap_or_else(|| crate::linalg::SmallMat::scalar(n, f64::NAN));
        let mut grads = [0.0; (MAX_DIM + 1) * MAX_DIM];
        for k in 0..n {
            for d in 0..n {
                let g = inv.get(k, d);
                grads[(k + 1) * n + d] = g;
                grads[d] -= g;
            }
        }
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        CellGeometry {
            dim: n,
            grads,
            volume: det.abs() / fact,
            signed: det,
        }
    }

    /// Quadrature points of cell `c` in physical coordinates, with weights summing to 1.
    pub fn quadrature_points(&self, c: usize, out: &mut [[f64; MAX_DIM]]) -> &'static [f64] {
        let n = self.dim;
        let (bary, w) = quadrature_rule(n);
        let v = self.cell(c);
        for (q, o) in out.iter_mut().enumerate().take(w.len()) {
            *o = [0.0; MAX_DIM];
            for k in 0..=n {
                let p = self.node(v[k] as usize);
                let l = bary[q * (n + 1) + k];
                for d in 0..n {
                    o[d] += l * p[d];
                }
            }
        }
        w
    }

    /// Mean cell volume.
    pub fn mean_cell_volume(&self) -> f64 {
        let total: f64 = (0..self.num_cells()).map(|c| self.cell_geometry(c).volume).sum();
        total / self.num_cells() as f64
    }

    /// Interpolates a function at the nodes.
    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| f(self.node(i))).collect()
    }

    /// Uniform mesh of [a, b] with `cells` elements.
    pub fn interval(a: f64, b: f64, cells: usize) -> Result<Mesh> {
        if cells == 0 || !(b > a) {
            return Err(LabError::param("interval", "need b > a and at least one cell"));
        }
        let h = (b - a) / cells as f64;
        let coords: Vec<f64> = (0..=cells).map(|i| a + i as f64 * h).collect();
        let cells_v: Vec<u32> = (0..cells as u32).flat_map(|i| [i, i + 1]).collect();
        let mut boundary = vec![false; cells + 1];
        boundary[0] = true;
        boundary[cells] = true;
        let origin = coords.iter().position(|x| *x == 0.0);
        Ok(Mesh {
            dim: 1,
            kind: MeshKind::Interval,
            coords,
            cells: cells_v,
            boundary,
            h,
            radius: 0.5 * (b - a),
            origin,
        })
    }

    /// Disc of radius R: ring k at radius kR/K carries 6k equally spaced nodes, K = ⌈R/h⌉.
    /// Every circle of radius kR/K is a union of mesh edges' endpoints.
    pub fn ring_disc(radius: f64, h: f64) -> Result<Mesh> {
        if !(radius > 0.0 && h > 0.0 && h <= radius) {
            return Err(LabError::param("h", "need 0 < h ≤ radius"));
        }
        let rings = (radius / h).round().max(1.0) as usize;
        let dr = radius / rings as f64;
        let mut coords = vec![0.0, 0.0];
        let mut start = vec![0usize];
        for k in 1..=rings {
            start.push(coords.len() / 2);
            let m = 6 * k;
            for j in 0..m {
                let a = 2.0 * PI * j as f64 / m as f64;
                coords.push(k as f64 * dr * a.cos());
                coords.push(k as f64 * dr * a.sin());
            }
        }
        let nn = coords.len() / 2;
        let mut cells = Vec::new();
        for j in 0..6u32 {
            cells.extend_from_slice(&[0, 1 + j, 1 + (j + 1) % 6]);
        }
        for k in 1..rings {
            let (mi, mo) = (6 * k, 6 * (k + 1));
            let (si, so) = (start[k] as u32, start[k + 1] as u32);
            let (mut i, mut j) = (0usize, 0usize);
            while i < mi || j < mo {
                let ai = (i + 1) as f64 / mi as f64;
                let ao = (j + 1) as f64 / mo as f64;
                let inner = |t: usize| si + (t % mi) as u32;
                let outer = |t: usize| so + (t % mo) as u32;
                if j >= mo || (i < mi && ai < ao) {
                    cells.extend_from_slice(&[inner(i), outer(j), inner(i + 1)]);
                    i += 1;
                } else {
                    cells.extend_from_slice(&[inner(i), outer(j), outer(j + 1)]);
                    j += 1;
                }
            }
        }
        let mut boundary = vec![false; nn];
        for b in boundary.iter_mut().skip(start[rings]) {
            *b = true;
        }
        Ok(Mesh {
            dim: 2,
            kind: MeshKind::RingDisc,
            coords,
            cells,
            boundary,
            h: dr,
            radius,
            origin: Some(0),
        })
    }

    /// Ball of radius R in ℝⁿ (n = 2, 3): the lattice of [−1,1]ⁿ with `cells_per_side` (even)
    /// cells per side, pushed radially by y ↦ y‖y‖∞/‖y‖₂ so the cube surface lands on the sphere.
    pub fn mapped_ball(dim: usize, radius: f64, cells_per_side: usize) -> Result<Mesh> {
        let mut m = Self::lattice(dim, radius, cells_per_side)?;
        for i in 0..m.num_nodes() {
            let p = &mut m.coords[i * dim..(i + 1) * dim];
            let inf = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let two = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if two > 0.0 {
                p.iter_mut().for_each(|v| *v *= inf / two);
            }
        }
        m.kind = MeshKind::MappedBall;
        Ok(m)
    }

    /// Kuhn-split lattice of [−R, R]ⁿ.
    pub fn cube(dim: usize, half_width: f64, cells_per_side: usize) -> Result<Mesh> {
        let mut m = Self::lattice(dim, half_width, cells_per_side)?;
        m.kind = MeshKind::Box;
        Ok(m)
    }

    fn lattice(dim: usize, half: f64, m: usize) -> Result<Mesh> {
        if !(2..=3).contains(&dim) {
            return Err(LabError::Dimension {
                dim,
                reason: "lattice meshes are built for n = 2, 3",
            });
        }
        if m < 2 || !m.is_multiple_of(2) {
            return Err(LabError::param("cells_per_side", "must be even and at least 2"));
        }
        let side = m + 1;
        let nn = side.pow(dim as u32);
        if nn > u32::MAX as usize {
            return Err(LabError::param("cells_per_side", "too many nodes"));
        }
        let h = 2.0 * half / m as f64;
        let mut coords = Vec::with_capacity(nn * dim);
        let mut boundary = Vec::with_capacity(nn);
        let mut idx = vec![0usize; dim];
        for lin in 0..nn {
            let mut r = lin;
            for d in (0..dim).rev() {
                idx[d] = r % side;
                r /= side;
            }
            let mut on_b = false;
            for &i in idx.iter().take(dim) {
                coords.push(-half + i as f64 * h);
                on_b |= i == 0 || i == m;
            }
            boundary.push(on_b);
        }
        // Kuhn simplices: one per permutation of the axes
        let perms: Vec<Vec<usize>> = if dim == 2 {
            vec![vec![0, 1], vec![1, 0]]
        } else {
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0],
            ]
        };
        let stride: Vec<usize> = (0..dim).map(|d| side.pow((dim - 1 - d) as u32)).collect();
        let ncube = m.pow(dim as u32);
        let mut cells = Vec::with_capacity(ncube * perms.len() * (dim + 1));
        let mut base = vec![0usize; dim];
        for cube in 0..ncube {
            let mut r = cube;
            for d in (0..dim).rev() {
                base[d] = r % m;
                r /= m;
            }
            let b: usize = (0..dim).map(|d| base[d] * stride[d]).sum();
            for p in &perms {
                let mut v = b;
                cells.push(v as u32);
                for &axis in p {
                    v += stride[axis];
                    cells.push(v as u32);
                }
            }
        }
        let origin = (0..dim).map(|d| (m / 2) * stride[d]).sum();
        Ok(Mesh {
            dim,
            kind: MeshKind::Box,
            coords,
            cells,
            boundary,
            h,
            radius: half,
            origin: Some(origin),
        })
    }
}

/// Per-cell P1 data.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub dim: usize,
    grads: [f64; (MAX_DIM + 1) * MAX_DIM],
    pub volume: f64,
    pub signed: f64,
}

impl CellGeometry {
    /// Gradient of the k-th barycentric function.
    #[inline]
    pub fn grad(&self, k: usize) -> &[f64] {
        &self.grads[k * self.dim..(k + 1) * self.dim]
    }

    /// Gradient of the P1 function with vertex values `vals`.
    pub fn gradient_of(&self, vals: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        for (k, val) in vals.iter().enumerate().take(n + 1) {
            let g = self.grad(k);
            for d in 0..n {
                out[d] += val * g[d];
            }
        }
    }
}

const A3: f64 = 2.0 / 3.0;
const B3: f64 = 1.0 / 6.0;
const A4: f64 = 0.585_410_196_624_968_5;
const B4: f64 = 0.138_196_601_125_010_5;
const G1: f64 = 0.211_324_865_405_187_1;

/// Interior (vertex-avoiding) rules of degree 2: barycentric coordinates and weights.
pub fn quadrature_rule(dim: usize) -> (&'static [f64], &'static [f64]) {
    match dim {
        1 => (&[1.0 - G1, G1, G1, 1.0 - G1], &[0.5, 0.5]),
        2 => (
            &[A3, B3, B3, B3, A3, B3, B3, B3, A3],
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        ),
        3 => (
            &[
                A4, B4, B4, B4, B4, A4, B4, B4, B4, B4, A4, B4, B4, B4, B4, A4,
            ],
            &[0.25, 0.25, 0.25, 0.25],
        ),
        _ => panic!("no quadrature rule for dimension {dim}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_volume(m: &Mesh) -> f64 {
        (0..m.num_cells()).map(|c| m.cell_geometry(c).volume).sum()
    }

    #[test]
    fn ring_disc_geometry() {
        let m = Mesh::ring_disc(1.0, 1.0 / 32.0).unwrap();
        assert_eq!(m.num_nodes(), 1 + 3 * 32 * 33);
        let area = total_volume(&m);
        // inscribed polygonal discs lose O(h²) of the area
        assert!((area - PI).abs() < 1e-2, "{area}");
        for c in 0..m.num_cells() {
            assert!(m.cell_geometry(c).signed > 0.0);
        }
        for i in 0..m.num_nodes() {
            if m.boundary[i] {
                let r = crate::linalg::norm(m.node(i));
                assert!((r - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mapped_ball_geometry() {
        let m = Mesh::mapped_ball(3, 1.0, 16).unwrap();
        let vol = total_volume(&m);
        assert!((vol - 4.0 / 3.0 * PI).abs() < 0.05, "{vol}");
        for c in 0..m.num_cells() {
            assert!(m.cell_geometry(c).volume > 1e-8);
        }
        for i in 0..m.num_nodes() {
            if m.boundary[i] {
                assert!((crate::linalg::norm(m.node(i)) - 1.0).abs() < m.h * m.h);
            }
        }
        assert_eq!(crate::linalg::norm(m.node(m.origin.unwrap())), 0.0);
    }

    #[test]
    fn box_volume_is_exact() {
        let m = Mesh::cube(2, 1.0, 8).unwrap();
        assert!((total_volume(&m) - 4.0).abs() < 1e-12);
        let m = Mesh::cube(3, 0.5, 4).unwrap();
        assert!((total_volume(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_integrates_quadratics() {
        let m = Mesh::cube(3, 1.0, 2).unwrap();
        let mut pts = [[0.0; MAX_DIM]; 4];
        let mut s = 0.0;
        for c in 0..m.num_cells() {
            let w = m.quadrature_points(c, &mut pts);
            let v = m.cell_geometry(c).volume;
            for (q, wq) in w.iter().enumerate() {
                s += v * wq * pts[q][0] * pts[q][0];
            }
        }
        // ∫_{[-1,1]³} x² = 8/3
        assert!((s - 8.0 / 3.0).abs() < 1e-12);
    }
}
