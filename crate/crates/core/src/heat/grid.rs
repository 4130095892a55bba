use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Values on a uniform grid over a box in dimension 1 to 3; the last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(origin: Vec<f64>, h: f64, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = origin.len();
        if !(1..=3).contains(&n) || shape.len() != n {
            return Err(LabError::Dimension {
                dim: n,
                reason: "grid functions live in dimension 1 to 3",
            });
        }
        if !(h > 0.0) || shape.iter().any(|s| *s < 3) {
            return Err(LabError::param("grid", "need h > 0 and at least 3 nodes per axis"));
        }
        if values.len() != shape.iter().product::<usize>() {
            return Err(LabError::param("values", "length does not match the grid shape"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::param("values", "non-finite grid value"));
        }
        Ok(GridFunction {
            origin,
            h,
            shape,
            values,
        })
    }

    pub fn from_fn(origin: Vec<f64>, h: f64, shape: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let total = shape.iter().product::<usize>();
        let mut g = GridFunction::new(origin, h, shape, vec![0.0; total])?;
        let mut x = [0.0; 3];
        for i in 0..total {
            g.coords_into(i, &mut x);
            g.values[i] = f(&x[..g.dim()]);
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::param("values", "non-finite grid value"));
        }
        Ok(g)
    }

    /// Grid on [c − L, c + L]ⁿ with a node at the center c.
    pub fn centered(center: &[f64], half_width: f64, h: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let k = (half_width / h).ceil() as usize;
        let origin = center.iter().map(|c| c - k as f64 * h).collect();
        Self::from_fn(origin, h, vec![2 * k + 1; center.len()], f)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn strides(&self) -> [usize; 3] {
        let mut s = [1; 3];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn multi_index(&self, i: usize) -> [usize; 3] {
        let s = self.strides();
        let mut m = [0; 3];
        let mut r = i;
        for a in 0..self.dim() {
            m[a] = r / s[a];
            r %= s[a];
        }
        m
    }

    pub fn coords_into(&self, i: usize, x: &mut [f64; 3]) {
        let m = self.multi_index(i);
        for a in 0..self.dim() {
            x[a] = self.origin[a] + m[a] as f64 * self.h;
        }
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        let mut x = [0.0; 3];
        self.coords_into(i, &mut x);
        x[..self.dim()].to_vec()
    }

    /// Distance from node i to the nearest box face.
    pub fn boundary_distance(&self, i: usize) -> f64 {
        let m = self.multi_index(i);
        (0..self.dim())
            .map(|a| m[a].min(self.shape[a] - 1 - m[a]) as f64 * self.h)
            .fold(f64::INFINITY, f64::min)
    }

    fn interior(&self, i: usize) -> bool {
        let m = self.multi_index(i);
        (0..self.dim()).all(|a| m[a] > 0 && m[a] + 1 < self.shape[a])
    }

    /// Central-difference gradient; `None` on the box faces.
    pub fn gradient_at(&self, i: usize) -> Option<[f64; 3]> {
        if !self.interior(i) {
            return None;
        }
        let s = self.strides();
        let mut g = [0.0; 3];
        for a in 0..self.dim() {
            g[a] = (self.values[i + s[a]] - self.values[i - s[a]]) / (2.0 * self.h);
        }
        Some(g)
    }

    /// (2n+1)-point Laplacian; `None` on the box faces.
    pub fn laplacian_at(&self, i: usize) -> Option<f64> {
        if !self.interior(i) {
            return None;
        }
        let s = self.strides();
        let mut l = 0.0;
        for a in 0..self.dim() {
            l += self.values[i + s[a]] + self.values[i - s[a]] - 2.0 * self.values[i];
        }
        Some(l / (self.h * self.h))
    }

    /// Multilinear interpolation; `None` outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let n = self.dim();
        let s = self.strides();
        let mut base = 0;
        let mut frac = [0.0; 3];
        for a in 0..n {
            let p = (x[a] - self.origin[a]) / self.h;
            if !(p >= 0.0) || p > (self.shape[a] - 1) as f64 {
                return None;
            }
            let k = (p.floor() as usize).min(self.shape[a] - 2);
            frac[a] = p - k as f64;
            base += k * s[a];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    idx += s[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        Some(acc)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.origin == other.origin && self.h == other.h && self.shape == other.shape
    }

    pub fn with_values(&self, values: Vec<f64>) -> GridFunction {
        assert_eq!(values.len(), self.len());
        GridFunction {
            values,
            ..self.clone()
        }
    }

    pub fn map(&self, f: impl Fn(&[f64], f64) -> f64) -> GridFunction {
        let mut x = [0.0; 3];
        let n = self.dim();
        let values = (0..self.len())
            .map(|i| {
                self.coords_into(i, &mut x);
                f(&x[..n], self.values[i])
            })
            .collect();
        self.with_values(values)
    }

    /// ‖self − other‖₁ over the nodes where `keep` holds.
    pub fn l1_distance_where(&self, other: &GridFunction, keep: impl Fn(usize) -> bool) -> f64 {
        (0..self.len())
            .filter(|i| keep(*i))
            .map(|i| (self.values[i] - other.values[i]).abs())
            .sum::<f64>()
            * self.cell_volume()
    }

    /// Node indices within Euclidean distance r of x0.
    pub fn nodes_in_ball(&self, x0: &[f64], r: f64) -> Vec<usize> {
        let mut x = [0.0; 3];
        (0..self.len())
            .filter(|&i| {
                self.coords_into(i, &mut x);
                dist(&x[..self.dim()], x0) < r
            })
            .collect()
    }
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_are_exact_on_quadratics() {
        let g = GridFunction::centered(&[0.0, 0.0], 1.0, 0.1, |x| x[0] * x[0] + 3.0 * x[0] * x[1] - x[1]).unwrap();
        for i in [55, 200, 317] {
            let x = g.coords(i);
            let gr = g.gradient_at(i).unwrap();
            assert!((gr[0] - (2.0 * x[0] + 3.0 * x[1])).abs() < 1e-12);
            assert!((gr[1] - (3.0 * x[0] - 1.0)).abs() < 1e-12);
            assert!((g.laplacian_at(i).unwrap() - 2.0).abs() < 1e-10);
        }
        assert!(g.gradient_at(0).is_none());
    }

    #[test]
    fn interpolation_reproduces_multilinear() {
        let g = GridFunction::centered(&[0.5, 0.0, -0.5], 1.0, 0.25, |x| 1.0 + x[0] - 2.0 * x[1] * x[2]).unwrap();
        let x = [0.6, 0.33, -0.71];
        assert!((g.interpolate(&x).unwrap() - (1.6 - 2.0 * 0.33 * -0.71)).abs() < 1e-12);
        assert!(g.interpolate(&[3.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridFunction::new(vec![0.0], 0.1, vec![2], vec![0.0; 2]).is_err());
        assert!(GridFunction::new(vec![0.0; 4], 0.1, vec![3; 4], vec![0.0; 81]).is_err());
        assert!(GridFunction::new(vec![0.0], 0.1, vec![3], vec![0.0, f64::NAN, 0.0]).is_err());
    }
}
