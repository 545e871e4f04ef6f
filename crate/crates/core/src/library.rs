//! Seeded families of smooth test fields.
//!
//! Members are analytic functions (sums of modulated Gaussian bumps), so the
//! same member can be sampled on any grid. Member 0 of every planar library
//! is the standard Gaussian `exp(-|x|^2 / 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::{Field2D, Grid2D, RadialField, RadialGrid};

/// Default seed of the shared libraries.
pub const LIBRARY_SEED: u64 = 0x5053_4d32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: (f64, f64),
    pub width: f64,
    pub slope: (f64, f64),
}

/// A planar smooth field `sum_k a_k (1 + b_k . (x - c_k)) exp(-|x - c_k|^2 / 2 s_k^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothField {
    pub bumps: Vec<Bump>,
}

impl SmoothField {
    pub fn gaussian() -> Self {
        Self {
            bumps: vec![Bump {
                amplitude: 1.0,
                center: (0.0, 0.0),
                width: 1.0,
                slope: (0.0, 0.0),
            }],
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let count = rng.gen_range(1..=3);
        let bumps = (0..count)
            .map(|_| Bump {
                amplitude: rng.gen_range(-2.0..2.0),
                center: (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                width: rng.gen_range(0.5..1.5),
                slope: (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            })
            .collect();
        Self { bumps }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let (dx, dy) = (x - b.center.0, y - b.center.1);
                let env = (-(dx * dx + dy * dy) / (2.0 * b.width * b.width)).exp();
                b.amplitude * (1.0 + b.slope.0 * dx + b.slope.1 * dy) * env
            })
            .sum()
    }

    pub fn sample(&self, grid: Grid2D) -> Field2D {
        Field2D::from_fn(grid, |x, y| self.eval(x, y))
    }
}

/// A radial smooth field `sum_k a_k (1 + b_k r^2) exp(-(r - r_k)^2 / 2 s_k^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothRadial {
    pub terms: Vec<(f64, f64, f64, f64)>,
}

impl SmoothRadial {
    pub fn random(rng: &mut impl Rng) -> Self {
        let count = rng.gen_range(1..=3);
        let terms = (0..count)
            .map(|_| {
                (
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(0.0..0.5),
                    rng.gen_range(0.0..2.0),
                    rng.gen_range(0.4..1.5),
                )
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, b, r0, s)| {
                // even extension through the origin keeps the profile smooth
                let env = (-(r - r0).powi(2) / (2.0 * s * s)).exp()
                    + (-(r + r0).powi(2) / (2.0 * s * s)).exp();
                a * (1.0 + b * r * r) * env
            })
            .sum()
    }

    pub fn sample(&self, grid: RadialGrid) -> RadialField {
        RadialField::from_fn(grid, |r| self.eval(r))
    }
}

/// `count` planar library members; member 0 is the Gaussian.
pub fn planar_library(seed: u64, count: usize) -> Vec<SmoothField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            if k == 0 {
                SmoothField::gaussian()
            } else {
                SmoothField::random(&mut rng)
            }
        })
        .collect()
}

pub fn radial_library(seed: u64, count: usize) -> Vec<SmoothRadial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..count).map(|_| SmoothRadial::random(&mut rng)).collect()
}

/// Grid on which planar library members are resolved.
pub fn library_grid() -> Grid2D {
    Grid2D::new(10.0, 112).expect("static grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn libraries_are_reproducible() {
        assert_eq!(planar_library(3, 10), planar_library(3, 10));
        assert_ne!(planar_library(3, 10), planar_library(4, 10));
        assert_eq!(radial_library(3, 5), radial_library(3, 5));
    }

    #[test]
    fn members_decay_inside_library_grid() {
        let g = library_grid();
        let edge = g.half_width();
        for f in planar_library(LIBRARY_SEED, 50) {
            assert!(f.eval(edge, 0.0).abs() < 1e-6);
            assert!(f.eval(edge, edge).abs() < 1e-6);
        }
    }

    #[test]
    fn first_member_is_gaussian() {
        let f = &planar_library(1, 2)[0];
        assert_eq!(f.eval(1.0, 0.0), (-0.5f64).exp());
    }
}
