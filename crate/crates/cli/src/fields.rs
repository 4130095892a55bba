//! Field inputs: closed-form builtins and node-value CSV files on regular grids.

use std::path::Path;

use anyhow::{bail, Context, Result};

use conelab::GridFunction;

use crate::config::FieldSource;

pub fn builtin(name: &str) -> fn(&[f64]) -> f64 {
    match name {
        "linear" => |x| x[0],
        "saddle" => |x| x[0] * x[0] - x.get(1).map_or(0.0, |y| y * y),
        "paraboloid" => |x| x.iter().map(|v| v * v).sum(),
        "neg-paraboloid" => |x| -x.iter().map(|v| v * v).sum::<f64>(),
        "jump" => |x| if x[0] > 0.0 { 1.0 } else { 0.0 },
        _ => unreachable!("validated builtin name"),
    }
}

/// Reads a CSV with a header and columns x₀..x_{n−1}, value, covering a full tensor grid
/// with one spacing on every axis (any row order).
pub fn read_grid_csv(path: &Path) -> Result<GridFunction> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let cols = rdr.headers()?.len();
    if !(2..=4).contains(&cols) {
        bail!("{}: expected 2 to 4 columns (coordinates then value), found {cols}", path.display());
    }
    let n = cols - 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), line + 2))?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (a, axis) in axes.iter_mut().enumerate() {
        *axis = rows.iter().map(|r| r[a]).collect();
        axis.sort_by(f64::total_cmp);
        axis.dedup_by(|p, q| (*p - *q).abs() <= 1e-9 * (1.0 + q.abs()));
    }
    let h = if axes[0].len() > 1 { axes[0][1] - axes[0][0] } else { bail!("{}: need two nodes per axis", path.display()) };
    for axis in &axes {
        if axis.len() < 2 || axis.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
            bail!("{}: coordinates are not a uniform grid of spacing {h}", path.display());
        }
    }
    let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let total: usize = shape.iter().product();
    if rows.len() != total {
        bail!("{}: {} rows but the grid has {total} nodes", path.display(), rows.len());
    }
    let origin: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut values = vec![f64::NAN; total];
    for r in &rows {
        let mut idx = 0;
        for a in 0..n {
            idx = idx * shape[a] + ((r[a] - origin[a]) / h).round() as usize;
        }
        values[idx] = r[n];
    }
    if values.iter().any(|v| v.is_nan()) {
        bail!("{}: duplicate or missing grid nodes", path.display());
    }
    Ok(GridFunction::new(origin, h, shape, values)?)
}

/// Grid field for `source`: builtins are sampled on a grid of spacing h around the center;
/// CSV data is read as is.
pub fn grid_field(source: &FieldSource, center: &[f64], half_width: f64, h: f64) -> Result<GridFunction> {
    match source {
        FieldSource::Csv(p) => read_grid_csv(p),
        FieldSource::Builtin(name) => Ok(GridFunction::centered(center, half_width, h, builtin(name))?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn csv_grid_round_trip() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "x,y,value").unwrap();
        // shuffled rows of x + 10y on {0, .5, 1} × {−1, −.5, 0}
        for (i, j) in [(2, 1), (0, 0), (1, 2), (1, 1), (2, 0), (0, 2), (0, 1), (2, 2), (1, 0)] {
            let (x, y) = (0.5 * i as f64, -1.0 + 0.5 * j as f64);
            writeln!(file, "{x},{y},{}", x + 10.0 * y).unwrap();
        }
        let g = read_grid_csv(file.path()).unwrap();
        assert_eq!(g.shape, vec![3, 3]);
        assert_eq!(g.h, 0.5);
        for i in 0..g.len() {
            let x = g.coords(i);
            assert!((g.values[i] - (x[0] + 10.0 * x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn ragged_grids_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "x,value\n0,1\n0.5,2\n1.5,3").unwrap();
        assert!(read_grid_csv(file.path()).is_err());
    }
}
