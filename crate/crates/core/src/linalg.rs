//! Small dense matrices (n ≤ 5) and low-discrepancy sampling.

use nalgebra::DMatrix;

pub const MAX_DIM: usize = 5;

/// Row-major square matrix of dimension at most [`MAX_DIM`], stored inline.
#[derive(Clone, Copy, PartialEq)]
pub struct SmallMat {
    n: usize,
    a: [f64; MAX_DIM * MAX_DIM],
}

impl std::fmt::Debug for SmallMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect();
        write!(f, "SmallMat{rows:?}")
    }
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} out of range");
        SmallMat {
            n,
            a: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    pub fn scalar(n: usize, c: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, c);
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from a row-major slice of length n².
    pub fn from_row_slice(n: usize, s: &[f64]) -> Self {
        assert_eq!(s.len(), n * n);
        let mut m = Self::zeros(n);
        m.a[..n * n].copy_from_slice(s);
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// Row-major storage of the active n×n block.
    pub fn as_slice(&self) -> &[f64] {
        &self.a[..self.n * self.n]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let n = self.n;
        &mut self.a[..n * n]
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut m = *self;
        m.as_mut_slice().iter_mut().for_each(|v| *v *= c);
        m
    }

    pub fn add(&self, other: &SmallMat) -> Self {
        debug_assert_eq!(self.n, other.n);
        let mut m = *self;
        for (v, w) in m.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *v += w;
        }
        m
    }

    pub fn sub(&self, other: &SmallMat) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &SmallMat) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    /// ξᵀ M η
    #[inline]
    pub fn bilinear(&self, xi: &[f64], eta: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let row = &self.a[i * n..i * n + n];
            let mut r = 0.0;
            for j in 0..n {
                r += row[j] * eta[j];
            }
            s += xi[i] * r;
        }
        s
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.sub(&self.transpose()).norm_fro()
    }

    fn to_dmatrix(self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, self.as_slice())
    }

    fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn det(&self) -> f64 {
        let a = |i, j| self.get(i, j);
        match self.n {
            1 => a(0, 0),
            2 => a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
            3 => {
                a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                    - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                    + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
            }
            _ => self.to_dmatrix().determinant(),
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        match n {
            1 => (self.a[0] != 0.0).then(|| Self::scalar(1, 1.0 / self.a[0])),
            2 | 3 => {
                let d = self.det();
                if d == 0.0 || !d.is_finite() {
                    return None;
                }
                let a = |i: usize, j: usize| self.get(i, j);
                Some(if n == 2 {
                    Self::from_row_slice(2, &[a(1, 1) / d, -a(0, 1) / d, -a(1, 0) / d, a(0, 0) / d])
                } else {
                    Self::from_fn(3, |i, j| {
                        // cofactor of (j, i)
                        let (r0, r1) = match j {
                            0 => (1, 2),
                            1 => (0, 2),
                            _ => (0, 1),
                        };
                        let (c0, c1) = match i {
                            0 => (1, 2),
                            1 => (0, 2),
                            _ => (0, 1),
                        };
                        let minor = a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0);
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        sign * minor / d
                    })
                })
            }
            _ => self.to_dmatrix().try_inverse().map(|m| Self::from_dmatrix(&m)),
        }
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let m = self.to_dmatrix();
        let s = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Spectral norm of a symmetric matrix.
    pub fn sym_op_norm(&self) -> f64 {
        let ev = self.sym_eigenvalues();
        ev[0].abs().max(ev[ev.len() - 1].abs())
    }
}

/// Radical inverse of `index` in the given prime base.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Halton points inside the open unit ball of ℝⁿ, skipping the origin.
///
/// Points are generated in [-1,1]ⁿ and rejected outside the ball, so the set is
/// deterministic and nested in `count`.
pub fn halton_ball(n: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(n >= 1 && n <= PRIMES.len());
    let mut pts = Vec::with_capacity(count);
    let mut idx = 1u64;
    while pts.len() < count {
        let p: Vec<f64> = (0..n)
            .map(|k| 2.0 * radical_inverse(idx, PRIMES[k]) - 1.0)
            .collect();
        idx += 1;
        let r2: f64 = p.iter().map(|v| v * v).sum();
        if r2 < 1.0 && r2 > 0.0 {
            pts.push(p);
        }
    }
    pts
}

/// Halton points in the unit cube [0,1)ⁿ.
pub fn halton_cube(n: usize, count: usize, offset: u64) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|i| (0..n).map(|k| radical_inverse(i + 1 + offset, PRIMES[k])).collect())
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton iteration on P_m).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_matches_general_path() {
        let m = SmallMat::from_row_slice(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv);
        assert!(id.sub(&SmallMat::identity(3)).max_abs() < 1e-14);
        assert!((m.det() - m.to_dmatrix().determinant()).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn halton_ball_points_are_inside() {
        let p = halton_ball(3, 500);
        assert_eq!(p.len(), 500);
        assert!(p.iter().all(|q| norm(q) < 1.0 && norm(q) > 0.0));
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }
}
