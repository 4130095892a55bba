use rayon::prelude::*;

use super::mesh::Mesh;
use crate::error::{LabError, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

const CHUNK: usize = 4096;

impl CsrMatrix {
    /// Sparsity pattern of the P1 stiffness matrix: nodes sharing a cell.
    pub fn pattern(mesh: &Mesh) -> Self {
        let nn = mesh.num_nodes();
        let k = mesh.dim + 1;
        // node → cells incidence
        let mut inc_ptr = vec![0usize; nn + 1];
        for &v in &mesh.cells {
            inc_ptr[v as usize + 1] += 1;
        }
        for i in 0..nn {
            inc_ptr[i + 1] += inc_ptr[i];
        }
        let mut fill = inc_ptr.clone();
        let mut inc = vec![0u32; mesh.cells.len()];
        for (pos, &v) in mesh.cells.iter().enumerate() {
            inc[fill[v as usize]] = (pos / k) as u32;
            fill[v as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nn + 1);
        row_ptr.push(0);
        let mut col = Vec::new();
        let mut scratch: Vec<u32> = Vec::new();
        for i in 0..nn {
            scratch.clear();
            for &c in &inc[inc_ptr[i]..inc_ptr[i + 1]] {
                scratch.extend_from_slice(mesh.cell(c as usize));
            }
            scratch.sort_unstable();
            scratch.dedup();
            col.extend_from_slice(&scratch);
            row_ptr.push(col.len());
        }
        let nnz = col.len();
        CsrMatrix {
            n: nn,
            row_ptr,
            col,
            val: vec![0.0; nnz],
        }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col[a..b], &self.val[a..b])
    }

    /// Position of (i, j) in the value array.
    #[inline]
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col[a..b].binary_search(&(j as u32)).ok().map(|p| a + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map(|p| self.val[p]).unwrap_or(0.0)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.find(i, j).expect("entry outside the sparsity pattern");
        self.val[p] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// y = A x, parallel over row blocks.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(b, ys)| {
            let r0 = b * CHUNK;
            for (k, yi) in ys.iter_mut().enumerate() {
                let (c, v) = self.row(r0 + k);
                let mut s = 0.0;
                for (cj, vj) in c.iter().zip(v) {
                    s += vj * x[*cj as usize];
                }
                *yi = s;
            }
        });
    }

    /// xᵀ A x
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        dot(x, &y)
    }

    /// max |A − Aᵀ| entrywise.
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                worst = worst.max((a - self.get(*j as usize, i)).abs());
            }
        }
        worst
    }

    /// Restriction to the rows/columns with `keep[i]`; returns the submatrix and the
    /// global → local index map (u32::MAX for dropped nodes).
    pub fn submatrix(&self, keep: &[bool]) -> (CsrMatrix, Vec<u32>) {
        let mut map = vec![u32::MAX; self.n];
        let mut m = 0u32;
        for (i, k) in keep.iter().enumerate() {
            if *k {
                map[i] = m;
                m += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(m as usize + 1);
        row_ptr.push(0);
        let mut col = Vec::new();
        let mut val = Vec::new();
        for i in 0..self.n {
            if !keep[i] {
                continue;
            }
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                let lj = map[*j as usize];
                if lj != u32::MAX {
                    col.push(lj);
                    val.push(*a);
                }
            }
            row_ptr.push(col.len());
        }
        (
            CsrMatrix {
                n: m as usize,
                row_ptr,
                col,
                val,
            },
            map,
        )
    }
}

/// Dot product with a fixed blocked summation order (independent of the worker count).
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    let partial: Vec<f64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rtol: 1e-10,
            max_iter: 50_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`; `x` holds the initial guess.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: CgOptions) -> Result<SolveStats> {
    let n = a.n;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let diag = a.diagonal();
    for (i, d) in diag.iter().enumerate() {
        if !(*d > 0.0) {
            return Err(LabError::Singular { node: i });
        }
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    r.par_iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while res > opts.rtol {
        if it >= opts.max_iter {
            return Err(LabError::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        a.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            let node = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            return Err(LabError::Singular { node });
        }
        let alpha = rz / pq;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        z.par_iter_mut()
            .zip(&r)
            .zip(&inv)
            .for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        res = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }
    Ok(SolveStats {
        iterations: it,
        relative_residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_of_interval() {
        let m = Mesh::interval(0.0, 1.0, 3).unwrap();
        let p = CsrMatrix::pattern(&m);
        assert_eq!(p.row_ptr, vec![0, 2, 5, 8, 10]);
        assert_eq!(p.col, vec![0, 1, 0, 1, 2, 1, 2, 3, 2, 3]);
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let m = Mesh::interval(0.0, 1.0, 50).unwrap();
        let mut a = CsrMatrix::pattern(&m);
        for i in 0..a.n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < a.n {
                a.add(i, i + 1, -1.0);
            }
        }
        let xs: Vec<f64> = (0..a.n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; a.n];
        a.mul_vec(&xs, &mut b);
        let mut x = vec![0.0; a.n];
        let st = pcg(&a, &b, &mut x, CgOptions::default()).unwrap();
        assert!(st.relative_residual <= 1e-10);
        assert!(x.iter().zip(&xs).all(|(p, q)| (p - q).abs() < 1e-8));
    }

    #[test]
    fn pcg_reports_non_convergence() {
        let m = Mesh::interval(0.0, 1.0, 200).unwrap();
        let mut a = CsrMatrix::pattern(&m);
        for i in 0..a.n {
            a.add(i, i, 2.0 + 1e-3);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < a.n {
                a.add(i, i + 1, -1.0);
            }
        }
        let b = vec![1.0; a.n];
        let mut x = vec![0.0; a.n];
        let e = pcg(&a, &b, &mut x, CgOptions { rtol: 1e-12, max_iter: 3 });
        assert!(matches!(e, Err(LabError::NotConverged { iterations: 3, .. })));
    }
}
