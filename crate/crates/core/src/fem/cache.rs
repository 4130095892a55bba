use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mesh::{Mesh, MeshKind};
use crate::error::{LabError, Result};

/// Directory for cached meshes; unset disables the cache.
pub const CACHE_ENV: &str = "LAB_CACHE_DIR";

const MAGIC: &[u8; 8] = b"CLMESH01";

/// Key of a generated mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub kind: MeshKind,
    pub dim: usize,
    pub radius: f64,
    /// Cells per side for lattices, rings for ring discs, cells for intervals.
    pub resolution: usize,
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self.kind {
            MeshKind::Interval => Mesh::interval(-self.radius, self.radius, self.resolution),
            MeshKind::RingDisc => Mesh::ring_disc(self.radius, self.radius / self.resolution as f64),
            MeshKind::MappedBall => Mesh::mapped_ball(self.dim, self.radius, self.resolution),
            MeshKind::Box => Mesh::cube(self.dim, self.radius, self.resolution),
        }
    }

    fn file_name(&self) -> String {
        format!(
            "{:?}-{}-{:016x}-{}.mesh",
            self.kind,
            self.dim,
            self.radius.to_bits(),
            self.resolution
        )
        .to_lowercase()
    }
}

/// Builds the mesh, reading and writing the on-disk cache when `LAB_CACHE_DIR` is set.
pub fn cached_mesh(spec: &MeshSpec) -> Result<Arc<Mesh>> {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => cached_mesh_in(Path::new(&dir), spec),
        _ => Ok(Arc::new(spec.build()?)),
    }
}

pub(crate) fn cached_mesh_in(dir: &Path, spec: &MeshSpec) -> Result<Arc<Mesh>> {
    let path = dir.join(spec.file_name());
    if let Ok(m) = read_mesh(&path) {
        if m.dim == spec.dim && m.kind == spec.kind {
            return Ok(Arc::new(m));
        }
    }
    let mesh = spec.build()?;
    fs::create_dir_all(dir)?;
    // write under a unique name, then rename so readers never see a partial file
    let tmp: PathBuf = dir.join(format!(
        ".{}.{}.{:?}.tmp",
        spec.file_name(),
        std::process::id(),
        std::thread::current().id()
    ));
    write_mesh(&tmp, &mesh)?;
    fs::rename(&tmp, &path)?;
    Ok(Arc::new(mesh))
}

fn kind_code(k: MeshKind) -> u8 {
    match k {
        MeshKind::Interval => 0,
        MeshKind::RingDisc => 1,
        MeshKind::MappedBall => 2,
        MeshKind::Box => 3,
    }
}

fn write_mesh(path: &Path, m: &Mesh) -> Result<()> {
    let mut buf = Vec::with_capacity(m.coords.len() * 8 + m.cells.len() * 4 + m.boundary.len() + 64);
    buf.extend_from_slice(MAGIC);
    buf.push(kind_code(m.kind));
    buf.extend_from_slice(&(m.dim as u64).to_le_bytes());
    buf.extend_from_slice(&m.h.to_le_bytes());
    buf.extend_from_slice(&m.radius.to_le_bytes());
    buf.extend_from_slice(&m.origin.map(|o| o as i64).unwrap_or(-1).to_le_bytes());
    buf.extend_from_slice(&(m.num_nodes() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cells.len() as u64).to_le_bytes());
    for v in &m.coords {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &m.cells {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(m.boundary.iter().map(|b| *b as u8));
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    Ok(())
}

fn read_mesh(path: &Path) -> Result<Mesh> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let bad = || LabError::Inconsistent(format!("corrupt mesh cache file {}", path.display()));
    if data.len() < 57 || &data[..8] != MAGIC {
        return Err(bad());
    }
    let u64_at = |p: usize| u64::from_le_bytes(data[p..p + 8].try_into().unwrap());
    let f64_at = |p: usize| f64::from_le_bytes(data[p..p + 8].try_into().unwrap());
    let kind = match data[8] {
        0 => MeshKind::Interval,
        1 => MeshKind::RingDisc,
        2 => MeshKind::MappedBall,
        3 => MeshKind::Box,
        _ => return Err(bad()),
    };
    let dim = u64_at(9) as usize;
    let h = f64_at(17);
    let radius = f64_at(25);
    let origin = u64_at(33) as i64;
    let nn = u64_at(41) as usize;
    let nc = u64_at(49) as usize;
    let mut p = 57;
    let need = p + nn * dim * 8 + nc * 4 + nn;
    if data.len() != need {
        return Err(bad());
    }
    let coords = (0..nn * dim).map(|k| f64_at(p + 8 * k)).collect();
    p += nn * dim * 8;
    let cells = (0..nc)
        .map(|k| u32::from_le_bytes(data[p + 4 * k..p + 4 * k + 4].try_into().unwrap()))
        .collect();
    p += nc * 4;
    let boundary = data[p..p + nn].iter().map(|b| *b != 0).collect();
    Ok(Mesh {
        dim,
        kind,
        coords,
        cells,
        boundary,
        h,
        radius,
        origin: (origin >= 0).then_some(origin as usize),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = MeshSpec {
            kind: MeshKind::MappedBall,
            dim: 3,
            radius: 1.0,
            resolution: 6,
        };
        let a = cached_mesh_in(dir.path(), &spec).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let b = cached_mesh_in(dir.path(), &spec).unwrap();
        assert_eq!(*a, *b);
    }

    #[test]
    fn corrupt_cache_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let spec = MeshSpec {
            kind: MeshKind::RingDisc,
            dim: 2,
            radius: 1.0,
            resolution: 8,
        };
        fs::write(dir.path().join(spec.file_name()), b"garbage").unwrap();
        let m = cached_mesh_in(dir.path(), &spec).unwrap();
        assert_eq!(*m, spec.build().unwrap());
    }
}
