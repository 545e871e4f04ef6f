//! Field files: a 32-byte little-endian header, the nodal values, and a JSON
//! sidecar with the grid, parameters and provenance.
//!
//! Header layout: magic `PSM2`, version `u16`, `n u32` (0 for radial), `m u32`
//! (0 for planar), half width or radius `f64`, symmetry tag `u8`, zero pad.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field2D, Grid2D, ProblemParams, RadialField, RadialGrid, SymmetryTag};
use crate::solver::{GridSpec, Solution};

pub const MAGIC: &[u8; 4] = b"PSM2";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

/// Contents of the `.json` file next to a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u16,
    pub grid: GridSpec,
    pub symmetry_tag: SymmetryTag,
    pub params: Option<ProblemParams>,
    pub provenance: serde_json::Value,
}

/// `fields/cell.psm2` -> `fields/cell.psm2.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::FieldFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn encode(field: &Solution) -> Vec<u8> {
    let (n, m, extent, tag, values) = match field {
        Solution::Plane(u) => (
            u.grid.n() as u32,
            0u32,
            u.grid.half_width(),
            u.symmetry_tag,
            &u.values,
        ),
        Solution::Radial(u) => (
            0u32,
            u.grid.m() as u32,
            u.grid.radius(),
            SymmetryTag::Radial,
            &u.values,
        ),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&extent.to_le_bytes());
    out.push(tag.to_byte());
    out.resize(HEADER_LEN, 0);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Solution> {
    if bytes.len() < HEADER_LEN {
        return Err(bad(
            path,
            format!("{} bytes is shorter than the header", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad(path, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(path, format!("unsupported version {version}")));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes"));
    let (n, m) = (word(6) as usize, word(10) as usize);
    let extent = f64::from_le_bytes(bytes[14..22].try_into().expect("8 bytes"));
    let tag = SymmetryTag::from_byte(bytes[22])
        .ok_or_else(|| bad(path, format!("unknown symmetry tag {}", bytes[22])))?;
    let count = match (n, m) {
        (0, 0) => return Err(bad(path, "both n and m are zero")),
        (n, 0) => n.checked_mul(n).ok_or_else(|| bad(path, "n overflows"))?,
        (0, m) => m,
        _ => return Err(bad(path, "n and m are both nonzero")),
    };
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * count {
        return Err(bad(
            path,
            format!("expected {count} values, found {} bytes", body.len()),
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if n > 0 {
        let grid = Grid2D::new(extent, n).map_err(|e| bad(path, e.to_string()))?;
        Ok(Solution::Plane(Field2D {
            grid,
            values,
            symmetry_tag: tag,
        }))
    } else {
        if tag != SymmetryTag::Radial {
            return Err(bad(path, "radial file without the radial tag"));
        }
        let grid = RadialGrid::new(extent, m).map_err(|e| bad(path, e.to_string()))?;
        Ok(Solution::Radial(RadialField { grid, values }))
    }
}

/// Writes the field file and its sidecar.
pub fn write_field(
    path: &Path,
    field: &Solution,
    params: Option<&ProblemParams>,
    provenance: serde_json::Value,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, encode(field))?;
    let tag = match field {
        Solution::Plane(u) => u.symmetry_tag,
        Solution::Radial(_) => SymmetryTag::Radial,
    };
    let side = Sidecar {
        format_version: VERSION,
        grid: field.grid_label(),
        symmetry_tag: tag,
        params: params.copied(),
        provenance,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Solution> {
    decode(&fs::read(path)?, path)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_str(&fs::read_to_string(sidecar_path(
        path,
    ))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_32_bytes_and_round_trips() {
        let grid = Grid2D::new(3.0, 8).unwrap();
        let u = Field2D {
            symmetry_tag: SymmetryTag::Dihedral(3),
            ..Field2D::from_fn(grid, |x, y| x - 2.0 * y)
        };
        let bytes = encode(&Solution::Plane(u.clone()));
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 64);
        assert_eq!(&bytes[..4], b"PSM2");
        assert_eq!(decode(&bytes, Path::new("x")).unwrap(), Solution::Plane(u));

        let r = RadialField::from_fn(RadialGrid::new(5.0, 17).unwrap(), |r| (-r).exp());
        let bytes = encode(&Solution::Radial(r.clone()));
        assert_eq!(decode(&bytes, Path::new("x")).unwrap(), Solution::Radial(r));
    }

    #[test]
    fn rejects_corrupt_files() {
        let grid = Grid2D::new(3.0, 8).unwrap();
        let good = encode(&Solution::Plane(Field2D::zeros(grid)));
        let p = Path::new("f");
        assert!(decode(&good[..20], p).is_err());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(decode(&bad_magic, p).is_err());
        assert!(decode(&good[..good.len() - 8], p).is_err());
        let mut bad_tag = good;
        bad_tag[22] = 7;
        assert!(decode(&bad_tag, p).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fields/a.psm2");
        let grid = Grid2D::new(2.0, 8).unwrap();
        let u = Solution::Plane(Field2D::from_fn(grid, |x, _| x));
        write_field(&path, &u, None, serde_json::json!({ "op": "test" })).unwrap();
        assert_eq!(read_field(&path).unwrap(), u);
        let side = read_sidecar(&path).unwrap();
        assert_eq!(side.grid, GridSpec::Plane(grid));
        assert_eq!(side.provenance["op"], "test");
    }
}
