use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::mesh::{quadrature_rule, Mesh};
use super::sparse::CsrMatrix;
use super::DiscreteField;
use crate::coefficient::MetricField;
use crate::error::{LabError, Result};
use crate::linalg::{norm, MAX_DIM};

/// Minimum number of cells meeting a ball before an average over it is reported.
pub const MIN_CELLS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Closed-form distance from the origin (Euclidean norm without a metric).
    Exact,
    /// Shortest paths along mesh edges, interpolated linearly inside cells.
    Graph,
}

/// How ball membership and volume weights are measured.
#[derive(Clone, Debug)]
pub struct BallGeometry {
    metric: Option<MetricField>,
    mode: DistanceMode,
    node_distance: Vec<f64>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Dijkstra distances from `source` over straight segments to every node within two mesh
/// edges, with lengths √(eᵀg(mid)e). Using the two-ring keeps the lattice bias of pure
/// edge paths (up to √2 on Kuhn grids) to a few percent.
pub fn graph_distances(mesh: &Mesh, metric: &MetricField, source: usize) -> Vec<f64> {
    let adj = CsrMatrix::pattern(mesh);
    let n = mesh.dim;
    let nn = mesh.num_nodes();
    let mut dist = vec![f64::INFINITY; nn];
    let mut mark = vec![usize::MAX; nn];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    let mut e = [0.0; MAX_DIM];
    let mut mid = [0.0; MAX_DIM];
    let mut ring: Vec<usize> = Vec::new();
    while let Some(Entry(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        ring.clear();
        mark[i] = i;
        for &j in adj.row(i).0 {
            for &k in adj.row(j as usize).0 {
                let k = k as usize;
                if mark[k] != i {
                    mark[k] = i;
                    ring.push(k);
                }
            }
        }
        let pi = mesh.node(i);
        for &j in &ring {
            let pj = mesh.node(j);
            for k in 0..n {
                e[k] = pj[k] - pi[k];
                mid[k] = 0.5 * (pj[k] + pi[k]);
            }
            if metric.singular_at_origin() && mid[..n].iter().all(|v| *v == 0.0) {
                continue;
            }
            let len = metric.lower(&mid[..n]).bilinear(&e[..n], &e[..n]).sqrt();
            let nd = d + len;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Entry(nd, j));
            }
        }
    }
    dist
}

impl BallGeometry {
    /// Euclidean balls about the origin.
    pub fn euclidean(mesh: &Mesh) -> Self {
        BallGeometry {
            metric: None,
            mode: DistanceMode::Exact,
            node_distance: (0..mesh.num_nodes()).map(|i| norm(mesh.node(i))).collect(),
        }
    }

    /// Metric balls about the origin node. `Exact` requires a closed-form radial distance.
    pub fn metric(mesh: &Mesh, metric: &MetricField, mode: DistanceMode) -> Result<Self> {
        if metric.dim() != mesh.dim {
            return Err(LabError::Dimension {
                dim: mesh.dim,
                reason: "metric and mesh dimensions differ",
            });
        }
        let node_distance = match mode {
            DistanceMode::Exact => {
                let origin = vec![0.0; mesh.dim];
                if metric.radial_distance(&origin).is_none() {
                    return Err(LabError::param("distance", "metric has no closed-form distance"));
                }
                (0..mesh.num_nodes())
                    .map(|i| metric.radial_distance(mesh.node(i)).unwrap())
                    .collect()
            }
            DistanceMode::Graph => {
                let o = mesh
                    .origin
                    .ok_or_else(|| LabError::param("mesh", "graph distances need a node at the origin"))?;
                graph_distances(mesh, metric, o)
            }
        };
        Ok(BallGeometry {
            metric: Some(metric.clone()),
            mode,
            node_distance,
        })
    }

    /// Closed form when available, graph distances otherwise.
    pub fn metric_auto(mesh: &Mesh, metric: &MetricField) -> Result<Self> {
        let origin = vec![0.0; mesh.dim];
        let mode = if metric.radial_distance(&origin).is_some() {
            DistanceMode::Exact
        } else {
            DistanceMode::Graph
        };
        Self::metric(mesh, metric, mode)
    }

    pub fn node_distances(&self) -> &[f64] {
        &self.node_distance
    }

    pub fn metric_field(&self) -> Option<&MetricField> {
        self.metric.as_ref()
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    fn point_distance(&self, x: &[f64], cell: &[u32], bary: &[f64]) -> f64 {
        match (self.mode, &self.metric) {
            (DistanceMode::Exact, Some(m)) => m.radial_distance(x).unwrap(),
            (DistanceMode::Exact, None) => norm(x),
            (DistanceMode::Graph, _) => cell
                .iter()
                .zip(bary)
                .map(|(v, l)| l * self.node_distance[*v as usize])
                .sum(),
        }
    }

    /// Nodes strictly inside the ball of radius r.
    pub fn nodes_inside(&self, r: f64) -> Vec<bool> {
        self.node_distance.iter().map(|d| *d < r).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BallIntegral {
    /// ∫_B |∇u|² (Euclidean) or ∫_B ḡ^{ij}∂_iu∂_ju √G (metric).
    pub energy: f64,
    /// ℒⁿ(B) or vol_ḡ(B), by the same quadrature.
    pub volume: f64,
    /// Cells with at least one quadrature point inside.
    pub cells: usize,
    /// Smallest radius at which `MIN_CELLS` cells meet the ball.
    pub min_radius: f64,
}

impl BallIntegral {
    pub fn average(&self) -> f64 {
        self.energy / self.volume
    }
}

type Simplex = Vec<[f64; 4]>;

fn red_refine(s: &Simplex) -> Vec<Simplex> {
    let mid = |a: usize, b: usize| -> [f64; 4] {
        let mut m = [0.0; 4];
        for k in 0..4 {
            m[k] = 0.5 * (s[a][k] + s[b][k]);
        }
        m
    };
    match s.len() {
        2 => vec![vec![s[0], mid(0, 1)], vec![mid(0, 1), s[1]]],
        3 => {
            let (a, b, c) = (mid(0, 1), mid(1, 2), mid(0, 2));
            vec![vec![s[0], a, c], vec![a, s[1], b], vec![c, b, s[2]], vec![a, b, c]]
        }
        _ => {
            let (m01, m02, m03, m12, m13, m23) =
                (mid(0, 1), mid(0, 2), mid(0, 3), mid(1, 2), mid(1, 3), mid(2, 3));
            vec![
                vec![s[0], m01, m02, m03],
                vec![m01, s[1], m12, m13],
                vec![m02, m12, s[2], m23],
                vec![m03, m13, m23, s[3]],
                vec![m01, m02, m03, m13],
                vec![m01, m02, m12, m13],
                vec![m02, m03, m13, m23],
                vec![m02, m12, m13, m23],
            ]
        }
    }
}

/// Barycentric centroids of a `depth`-fold red refinement; all children have equal volume.
pub(crate) fn refined_centroids(n: usize, depth: usize) -> Vec<[f64; 4]> {
    let root: Simplex = (0..=n)
        .map(|i| {
            let mut e = [0.0; 4];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut level = vec![root];
    for _ in 0..depth {
        level = level.iter().flat_map(red_refine).collect();
    }
    level
        .iter()
        .map(|s| {
            let mut c = [0.0; 4];
            for v in s {
                for k in 0..4 {
                    c[k] += v[k] / (n + 1) as f64;
                }
            }
            c
        })
        .collect()
}

/// Refinement depth for cells cut by the ball boundary.
const CUT_DEPTH: usize = 3;

/// Quadrature-point membership integrals over the ball of radius `r`. Cells cut by the
/// sphere (in dimensions up to three) are sampled at the centroids of a three-times red-refined
/// copy, so the volume error is a small fraction of a cell layer instead of a whole one.
pub fn ball_integrals(mesh: &Mesh, values: &[f64], geom: &BallGeometry, r: f64) -> BallIntegral {
    let n = mesh.dim;
    let (bary, _) = quadrature_rule(n);
    let fine = if n <= 3 { refined_centroids(n, CUT_DEPTH) } else { Vec::new() };
    let fine_w = 1.0 / fine.len().max(1) as f64;
    let mut pts = [[0.0; MAX_DIM]; MAX_DIM + 1];
    let mut grad = [0.0; MAX_DIM];
    let mut vals = [0.0; MAX_DIM + 1];
    let mut x = [0.0; MAX_DIM];
    let mut energy = 0.0;
    let mut volume = 0.0;
    let mut cells = 0;
    let mut nearest: Vec<f64> = Vec::new();
    let density = |x: &[f64], grad: &[f64]| -> (f64, f64) {
        match &geom.metric {
            None => (1.0, grad.iter().map(|a| a * a).sum::<f64>()),
            Some(m) => {
                let (up, sd) = m.upper_and_sqrt_det(x);
                (sd, sd * up.bilinear(grad, grad))
            }
        }
    };
    for c in 0..mesh.num_cells() {
        let v = mesh.cell(c);
        // cells whose vertices are all far outside cannot contain inside points
        let dmin = v.iter().map(|i| geom.node_distance[*i as usize]).fold(f64::INFINITY, f64::min);
        let dmax = v.iter().map(|i| geom.node_distance[*i as usize]).fold(0.0, f64::max);
        if dmin > r + 16.0 * mesh.h {
            nearest.push(dmin);
            continue;
        }
        let w = mesh.quadrature_points(c, &mut pts);
        let g = mesh.cell_geometry(c);
        for k in 0..=n {
            vals[k] = values[v[k] as usize];
        }
        g.gradient_of(&vals[..=n], &mut grad);
        let mut inside = false;
        let mut closest = f64::INFINITY;
        for (q, _) in w.iter().enumerate() {
            let d = geom.point_distance(&pts[q][..n], v, &bary[q * (n + 1)..(q + 1) * (n + 1)]);
            closest = closest.min(d);
            inside |= d < r;
        }
        if inside {
            cells += 1;
        }
        nearest.push(closest);
        let cut = !fine.is_empty() && dmin < r && dmax >= r;
        if cut {
            for b in &fine {
                for k in 0..n {
                    x[k] = (0..=n).map(|j| b[j] * mesh.node(v[j] as usize)[k]).sum();
                }
                if geom.point_distance(&x[..n], v, &b[..=n]) < r {
                    let (dens, e) = density(&x[..n], &grad[..n]);
                    energy += g.volume * fine_w * e;
                    volume += g.volume * fine_w * dens;
                }
            }
        } else {
            for (q, wq) in w.iter().enumerate() {
                let xq = &pts[q][..n];
                if geom.point_distance(xq, v, &bary[q * (n + 1)..(q + 1) * (n + 1)]) < r {
                    let (dens, e) = density(xq, &grad[..n]);
                    energy += g.volume * wq * e;
                    volume += g.volume * wq * dens;
                }
            }
        }
    }
    let k = MIN_CELLS.min(nearest.len());
    let min_radius = if k == 0 {
        f64::INFINITY
    } else {
        nearest.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        nearest[k - 1]
    };
    BallIntegral {
        energy,
        volume,
        cells,
        min_radius,
    }
}

/// Mean gradient energy over B_r: Euclidean, or over the metric ball with ḡ-gradients and vol_ḡ.
pub fn gradient_energy_average(u: &DiscreteField, geom: &BallGeometry, r: f64) -> Result<f64> {
    let b = ball_integrals(&u.mesh, &u.values, geom, r);
    if b.cells < MIN_CELLS {
        return Err(LabError::Resolution {
            what: format!("energy average on a ball of radius {r}"),
            min: b.min_radius,
        });
    }
    Ok(b.average())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{ConvexGraphMetric, MetricField};
    use std::sync::Arc;

    #[test]
    fn refined_centroids_are_equal_weight_and_exact_for_linears() {
        for n in 1..=3 {
            let c = refined_centroids(n, CUT_DEPTH);
            assert_eq!(c.len(), 1 << (n * CUT_DEPTH));
            for k in 0..=n {
                let mean: f64 = c.iter().map(|b| b[k]).sum::<f64>() / c.len() as f64;
                assert!((mean - 1.0 / (n + 1) as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ball_volume_is_accurate_on_cut_cells() {
        let m = Mesh::mapped_ball(3, 1.0, 32).unwrap();
        let g = BallGeometry::euclidean(&m);
        let zero = vec![0.0; m.num_nodes()];
        for r in [0.3, 0.45, 0.7] {
            let v = ball_integrals(&m, &zero, &g, r).volume;
            let exact = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
            assert!((v / exact - 1.0).abs() < 0.01, "{r}: {v} vs {exact}");
        }
    }

    #[test]
    fn linear_function_has_unit_average() {
        let m = Arc::new(Mesh::ring_disc(1.0, 1.0 / 32.0).unwrap());
        let u = DiscreteField::interpolate(m.clone(), |x| x[0]);
        let g = BallGeometry::euclidean(&m);
        for r in [0.3, 0.55, 0.9] {
            assert!((gradient_energy_average(&u, &g, r).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_balls_are_refused() {
        let m = Arc::new(Mesh::ring_disc(1.0, 1.0 / 16.0).unwrap());
        let u = DiscreteField::interpolate(m.clone(), |x| x[0]);
        let g = BallGeometry::euclidean(&m);
        match gradient_energy_average(&u, &g, 0.01) {
            Err(LabError::Resolution { min, .. }) => {
                assert!(min > 0.01);
                assert!(gradient_energy_average(&u, &g, min * 1.001).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaled_metric_scales_average() {
        let m = Arc::new(Mesh::ring_disc(1.0, 1.0 / 32.0).unwrap());
        let u = DiscreteField::interpolate(m.clone(), |x| x[0] * x[0] - x[1] * x[1]);
        let c = 3.0;
        let metric = MetricField::from_model(
            crate::coefficient::FnMetric::new(2, "scaled", move |_| {
                crate::linalg::SmallMat::scalar(2, c * c)
            })
            .with_radial(move |x| c * norm(x)),
        );
        let flat = gradient_energy_average(&u, &BallGeometry::euclidean(&m), 0.5).unwrap();
        let weighted =
            gradient_energy_average(&u, &BallGeometry::metric(&m, &metric, DistanceMode::Exact).unwrap(), 1.5)
                .unwrap();
        assert!((weighted - flat / (c * c)).abs() < 1e-12 * flat);
    }

    #[test]
    fn graph_distances_bound_exact_distances_from_above() {
        let m = Mesh::mapped_ball(3, 1.0, 16).unwrap();
        let metric = MetricField::from_model(ConvexGraphMetric::new(&[1.0, 1.0, 1.0]).unwrap());
        let g = BallGeometry::metric(&m, &metric, DistanceMode::Graph).unwrap();
        let e = BallGeometry::metric(&m, &metric, DistanceMode::Exact).unwrap();
        let mut ratios = Vec::new();
        for i in 0..m.num_nodes() {
            let (a, b) = (g.node_distances()[i], e.node_distances()[i]);
            assert!(a >= b - 1e-12, "{a} {b}");
            if b > 0.0 {
                ratios.push(a / b);
            }
        }
        ratios.sort_by(f64::total_cmp);
        let median = ratios[ratios.len() / 2];
        let worst = ratios[ratios.len() - 1];
        eprintln!("graph/exact distance ratio: median {median:.4}, max {worst:.4}");
        assert!(median < 1.05 && worst < 1.1);
    }
}
