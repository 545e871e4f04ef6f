//! Symmetry classes as projectors on planar fields.
//!
//! `Dihedral(k)` is generated by the rotation `A` by `pi/k` acting with a
//! sign: `(A^j * u)(x) = (-1)^j u(A^j x)`. Rotations by multiples of `pi/2`
//! map the cell-centered lattice onto itself and are applied exactly; other
//! angles go through cubic interpolation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field2D, Grid2D, SymmetryTag};
use crate::reduce::{dot, pairwise_sum_by};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    Radial,
    OddEven,
    Dihedral(u32),
}

impl SymmetryClass {
    pub fn validate(self) -> Result<Self> {
        match self {
            SymmetryClass::Dihedral(0) => {
                Err(Error::InvalidParams("dihedral order must be >= 1".into()))
            }
            SymmetryClass::Dihedral(k) if k > 127 => Err(Error::InvalidParams(format!(
                "dihedral order {k} is too large"
            ))),
            c => Ok(c),
        }
    }

    pub fn tag(self) -> SymmetryTag {
        match self {
            SymmetryClass::Radial => SymmetryTag::Radial,
            SymmetryClass::OddEven => SymmetryTag::OddEven,
            SymmetryClass::Dihedral(k) => SymmetryTag::Dihedral(k),
        }
    }

    /// Whether every group element maps the lattice onto itself.
    pub fn lattice_exact(self) -> bool {
        match self {
            SymmetryClass::Radial => false,
            SymmetryClass::OddEven => true,
            SymmetryClass::Dihedral(k) => k <= 2,
        }
    }
}

impl std::str::FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "radial" => Ok(SymmetryClass::Radial),
            "odd_even" | "odd-even" => Ok(SymmetryClass::OddEven),
            _ => {
                let k = s
                    .strip_prefix("dihedral")
                    .map(|r| r.trim_matches(|c| c == '(' || c == ')' || c == ':' || c == '-'))
                    .and_then(|r| r.parse::<u32>().ok())
                    .ok_or_else(|| Error::InvalidParams(format!("unknown symmetry class '{s}'")))?;
                SymmetryClass::Dihedral(k).validate()
            }
        }
    }
}

/// `u` composed with the lattice rotation by `quarter * pi/2`.
fn rotate_quarter(grid: Grid2D, u: &[f64], quarter: u32) -> Vec<f64> {
    let n = grid.n();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (si, sj) = match quarter % 4 {
                0 => (i, j),
                1 => (n - 1 - j, i),
                2 => (n - 1 - i, n - 1 - j),
                _ => (j, n - 1 - i),
            };
            out[j * n + i] = u[sj * n + si];
        }
    }
    out
}

/// `(A^j * u)(x) = (-1)^j u(A^j x)` for the rotation `A` by `pi/k`.
pub fn act(u: &Field2D, k: u32, j: u32) -> Field2D {
    let grid = u.grid;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let twice = 2 * j;
    let values: Vec<f64> = if (twice % k) == 0 {
        // angle j pi / k is a multiple of pi/2 exactly when 2j / k is an integer
        rotate_quarter(grid, &u.values, twice / k)
            .into_iter()
            .map(|v| sign * v)
            .collect()
    } else {
        let theta = j as f64 * PI / k as f64;
        let (c, s) = (theta.cos(), theta.sin());
        (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                sign * u.sample(c * x - s * y, s * x + c * y)
            })
            .collect()
    };
    Field2D {
        grid,
        values,
        symmetry_tag: u.symmetry_tag,
    }
}

fn project_odd_even(grid: Grid2D, u: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (mi, mj) = (n - 1 - i, n - 1 - j);
            out[j * n + i] = 0.25 * (u[j * n + i] - u[j * n + mi] + u[mj * n + i] - u[mj * n + mi]);
        }
    }
    out
}

fn project_dihedral(u: &Field2D, k: u32) -> Vec<f64> {
    let members: Vec<Field2D> = (1..=2 * k).map(|j| act(u, k, j)).collect();
    let scale = 1.0 / (2 * k) as f64;
    (0..u.grid.len())
        .map(|idx| scale * pairwise_sum_by(members.len(), &|m| members[m].values[idx]))
        .collect()
}

/// Radial projection: means over annular bins of width `h`, reconstructed by
/// linear interpolation in `r`. Bin values are chosen so that re-binning the
/// reconstruction returns them, which makes the map an exact projection.
fn project_radial(grid: Grid2D, u: &[f64]) -> Vec<f64> {
    let h = grid.spacing();
    let radii: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let (x, y) = grid.point(idx);
            x.hypot(y)
        })
        .collect();
    let raw_bin: Vec<usize> = radii.iter().map(|r| (r / h).floor() as usize).collect();
    let max_bin = raw_bin.iter().copied().max().unwrap_or(0);
    let mut remap = vec![usize::MAX; max_bin + 1];
    let mut count = 0;
    for b in 0..=max_bin {
        if raw_bin.iter().any(|&x| x == b) {
            remap[b] = count;
            count += 1;
        }
    }
    let bin: Vec<usize> = raw_bin.iter().map(|&b| remap[b]).collect();
    let mut members = vec![Vec::new(); count];
    for (idx, &b) in bin.iter().enumerate() {
        members[b].push(idx);
    }
    let centers: Vec<f64> = members
        .iter()
        .map(|m| m.iter().map(|&i| radii[i]).sum::<f64>() / m.len() as f64)
        .collect();

    // Reconstruction weights: each cell mixes two neighboring bin values.
    let weights: Vec<(usize, usize, f64)> = radii
        .iter()
        .map(|&r| {
            if count == 1 || r <= centers[0] {
                (0, 0, 1.0)
            } else if r >= centers[count - 1] {
                (count - 1, count - 1, 1.0)
            } else {
                let hi = centers.partition_point(|&c| c < r).min(count - 1);
                let lo = hi - 1;
                let w = (centers[hi] - r) / (centers[hi] - centers[lo]);
                (lo, hi, w)
            }
        })
        .collect();

    // Tridiagonal system (binning o reconstruction) c = binning(u).
    let mut sub = vec![0.0; count];
    let mut diag = vec![0.0; count];
    let mut sup = vec![0.0; count];
    let mut rhs = vec![0.0; count];
    for (b, m) in members.iter().enumerate() {
        let inv = 1.0 / m.len() as f64;
        for &idx in m {
            rhs[b] += inv * u[idx];
            let (lo, hi, w) = weights[idx];
            for (target, wt) in [(lo, w), (hi, 1.0 - w)] {
                if wt == 0.0 {
                    continue;
                }
                match target as isize - b as isize {
                    0 => diag[b] += inv * wt,
                    -1 => sub[b] += inv * wt,
                    1 => sup[b] += inv * wt,
                    _ => unreachable!("interpolation stencil spans adjacent bins only"),
                }
            }
        }
    }
    for b in 1..count {
        let f = sub[b] / diag[b - 1];
        diag[b] -= f * sup[b - 1];
        rhs[b] -= f * rhs[b - 1];
    }
    let mut c = vec![0.0; count];
    c[count - 1] = rhs[count - 1] / diag[count - 1];
    for b in (0..count - 1).rev() {
        c[b] = (rhs[b] - sup[b] * c[b + 1]) / diag[b];
    }
    weights
        .iter()
        .map(|&(lo, hi, w)| w * c[lo] + (1.0 - w) * c[hi])
        .collect()
}

pub fn project(u: &Field2D, class: SymmetryClass) -> Field2D {
    let values = match class {
        SymmetryClass::OddEven => project_odd_even(u.grid, &u.values),
        SymmetryClass::Radial => project_radial(u.grid, &u.values),
        SymmetryClass::Dihedral(k) => project_dihedral(u, k.max(1)),
    };
    Field2D {
        grid: u.grid,
        values,
        symmetry_tag: class.tag(),
    }
}

/// `||u - P u||_2 / max(||u||_2, eps)`.
pub fn symmetry_defect(u: &Field2D, class: SymmetryClass) -> f64 {
    let p = project(u, class);
    let diff: Vec<f64> = u.values.iter().zip(&p.values).map(|(a, b)| a - b).collect();
    let norm = dot(&u.values, &u.values).sqrt();
    dot(&diff, &diff).sqrt() / norm.max(f64::EPSILON)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{eval_j, grad_j};
    use crate::fields::{x_norm, LocalSign, ProblemParams};
    use crate::library::{planar_library, SmoothField};
    use crate::logkernel::LogField;

    fn grid() -> Grid2D {
        Grid2D::new(6.0, 48).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn members() -> Vec<Field2D> {
        planar_library(21, 6)
            .iter()
            .map(|f: &SmoothField| f.sample(grid()))
            .collect()
    }

    #[test]
    fn parsing() {
        assert_eq!(
            "radial".parse::<SymmetryClass>().unwrap(),
            SymmetryClass::Radial
        );
        assert_eq!(
            "dihedral(3)".parse::<SymmetryClass>().unwrap(),
            SymmetryClass::Dihedral(3)
        );
        assert_eq!(
            "dihedral2".parse::<SymmetryClass>().unwrap(),
            SymmetryClass::Dihedral(2)
        );
        assert!("dihedral(0)".parse::<SymmetryClass>().is_err());
        assert!("chiral".parse::<SymmetryClass>().is_err());
    }

    #[test]
    fn projections_are_idempotent() {
        for u in members() {
            for class in [
                SymmetryClass::OddEven,
                SymmetryClass::Dihedral(1),
                SymmetryClass::Dihedral(2),
                SymmetryClass::Radial,
            ] {
                let p = project(&u, class);
                let pp = project(&p, class);
                let err = pp
                    .values
                    .iter()
                    .zip(&p.values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let scale = p.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(err <= 1e-10 * scale.max(1e-300), "{class:?}: {err}");
            }
            // interpolated rotations: idempotent up to interpolation error
            let p = project(&u, SymmetryClass::Dihedral(3));
            if dot(&p.values, &p.values) > 1e-12 * dot(&u.values, &u.values) {
                assert!(symmetry_defect(&p, SymmetryClass::Dihedral(3)) < 1e-2);
            }
        }
    }

    #[test]
    fn odd_fixed_point_and_even_annihilation() {
        let g = grid();
        let u = Field2D::from_fn(g, |x, y| x * (-(x * x + y * y)).exp());
        assert!(symmetry_defect(&u, SymmetryClass::OddEven) <= 1e-12);
        let even = Field2D::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        assert!(project(&even, SymmetryClass::Dihedral(1))
            .values
            .iter()
            .all(|v| v.abs() < 1e-15));
        assert!((symmetry_defect(&even, SymmetryClass::Dihedral(1)) - 1.0).abs() < 1e-12);
        assert_eq!(
            symmetry_defect(&Field2D::zeros(g), SymmetryClass::Radial),
            0.0
        );
    }

    #[test]
    fn nested_dihedral_classes() {
        let g = grid();
        let u = Field2D::from_fn(g, |x, y| {
            let z3 = x * x * x - 3.0 * x * y * y;
            z3 * (-(x * x + y * y) / 2.0).exp()
        });
        // Re(z^3) is in X_3, hence in X_1
        assert!(symmetry_defect(&u, SymmetryClass::Dihedral(3)) < 1e-3);
        assert!(symmetry_defect(&u, SymmetryClass::Dihedral(1)) < 1e-12);
    }

    #[test]
    fn projection_does_not_increase_norm() {
        for u in members() {
            for class in [
                SymmetryClass::OddEven,
                SymmetryClass::Dihedral(1),
                SymmetryClass::Dihedral(2),
            ] {
                let p = project(&u, class);
                assert!(
                    x_norm(&p, 2.0) <= x_norm(&u, 2.0) * (1.0 + 1e-6),
                    "{class:?}"
                );
            }
            // interpolating projectors: bounded by their interpolation error
            for class in [SymmetryClass::Radial, SymmetryClass::Dihedral(3)] {
                let p = project(&u, class);
                assert!(
                    x_norm(&p, 2.0) <= x_norm(&u, 2.0) * (1.0 + 1e-3),
                    "{class:?}"
                );
            }
        }
    }

    #[test]
    fn functionals_are_invariant_under_group_elements() {
        let params = ProblemParams::new(2.0, 4.0, 1.0, LocalSign::Minus).unwrap();
        let u = &members()[2];
        for (k, j) in [(1, 1), (2, 1), (2, 3)] {
            let v = act(u, k, j);
            assert!(rel(eval_j(&v, &params), eval_j(u, &params)) < 1e-10);
            assert!(rel(v.v0(), u.v0()) < 1e-10);
        }
        let fine = Grid2D::new(6.0, 96).unwrap();
        let uf = SmoothField::gaussian().sample(fine);
        let uf = uf.with_values(
            uf.values
                .iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 + 0.2 * fine.point(i).0))
                .collect(),
        );
        let v = act(&uf, 3, 1);
        assert!(rel(eval_j(&v, &params), eval_j(&uf, &params)) < 1e-3);
    }

    #[test]
    fn gradient_stays_in_lattice_exact_classes() {
        let params = ProblemParams::new(2.0, 4.0, 1.0, LocalSign::Minus).unwrap();
        for class in [
            SymmetryClass::OddEven,
            SymmetryClass::Dihedral(1),
            SymmetryClass::Dihedral(2),
        ] {
            let u = project(&members()[3], class);
            assert!(symmetry_defect(&grad_j(&u, &params), class) <= 1e-6);
        }
    }
}
