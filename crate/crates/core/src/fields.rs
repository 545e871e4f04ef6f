//! Discretization of the weighted space: cell-centered grids on a square box
//! and on a radial segment, fields living on them, and the norms and
//! differential operators used everywhere else.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::{pairwise_sum, pairwise_sum_by, weighted_dot};

/// Square box `[-L, L]^2` split into `n x n` cells; values sit at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    half_width: f64,
    n: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and >= 8, got {n}"
            )));
        }
        Ok(Self { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Center coordinate of cell `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    /// Row-major index: `i` runs along x1, `j` along x2.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        (self.coord(idx % self.n), self.coord(idx / self.n))
    }

    pub fn mesh(&self) -> PlaneMesh {
        PlaneMesh::new(*self)
    }
}

/// Radial segment `[0, R]` with `m` cells; values at `r_i = (i + 1/2) R / m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radius: f64,
    m: usize,
}

impl RadialGrid {
    pub fn new(radius: f64, m: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if m < 16 {
            return Err(Error::InvalidGrid(format!("m must be >= 16, got {m}")));
        }
        Ok(Self { radius, m })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        self.radius / self.m as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }

    pub fn mesh(&self) -> RadialMesh {
        RadialMesh::new(*self)
    }
}

/// Symmetry class a field has been projected into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryTag {
    None,
    Radial,
    OddEven,
    Dihedral(u32),
}

impl SymmetryTag {
    pub fn to_byte(self) -> u8 {
        match self {
            SymmetryTag::None => 0,
            SymmetryTag::Radial => 1,
            SymmetryTag::OddEven => 2,
            SymmetryTag::Dihedral(k) => 0x80 | (k.min(0x7f) as u8),
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(SymmetryTag::None),
            1 => Some(SymmetryTag::Radial),
            2 => Some(SymmetryTag::OddEven),
            b if b & 0x80 != 0 && b & 0x7f != 0 => Some(SymmetryTag::Dihedral((b & 0x7f) as u32)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub symmetry_tag: SymmetryTag,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            symmetry_tag: SymmetryTag::None,
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: Grid2D, f: F) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                f(x, y)
            })
            .collect();
        Self {
            grid,
            values,
            symmetry_tag: SymmetryTag::None,
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("field contains non-finite values".into()));
        }
        Ok(Self {
            grid,
            values,
            symmetry_tag: SymmetryTag::None,
        })
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid,
            values,
            symmetry_tag: self.symmetry_tag,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Cubic Lagrange interpolation at an arbitrary point; zero ghost cells
    /// outside the box.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let sx = (x + g.half_width) / h - 0.5;
        let sy = (y + g.half_width) / h - 0.5;
        let n = g.n as isize;
        if sx < -2.0 || sy < -2.0 || sx > n as f64 + 1.0 || sy > n as f64 + 1.0 {
            return 0.0;
        }
        let ix = sx.floor();
        let iy = sy.floor();
        let wx = cubic_weights(sx - ix);
        let wy = cubic_weights(sy - iy);
        let (ix, iy) = (ix as isize, iy as isize);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let j = iy - 1 + b as isize;
            if j < 0 || j >= n {
                continue;
            }
            let mut row = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                let i = ix - 1 + a as isize;
                if i < 0 || i >= n {
                    continue;
                }
                row += wxa * self.values[j as usize * g.n + i as usize];
            }
            acc += wyb * row;
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.m],
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: RadialGrid, f: F) -> Self {
        Self {
            grid,
            values: (0..grid.m).map(|i| f(grid.node(i))).collect(),
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid,
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    /// Cubic Lagrange interpolation in `r`, even reflection through the
    /// origin and a zero ghost beyond `R`.
    pub fn sample(&self, r: f64) -> f64 {
        let r = r.abs();
        let d = self.grid.spacing();
        let s = r / d - 0.5;
        let m = self.grid.m as isize;
        if s > m as f64 + 1.0 {
            return 0.0;
        }
        let i0 = s.floor();
        let w = cubic_weights(s - i0);
        let i0 = i0 as isize;
        let mut acc = 0.0;
        for (a, wa) in w.iter().enumerate() {
            let mut i = i0 - 1 + a as isize;
            if i < 0 {
                i = -i - 1;
            }
            if i < m {
                acc += wa * self.values[i as usize];
            }
        }
        acc
    }

    /// Sample onto a planar grid as `u(|x|)`.
    pub fn embed(&self, grid: Grid2D) -> Field2D {
        let mut f = Field2D::from_fn(grid, |x, y| self.sample(x.hypot(y)));
        f.symmetry_tag = SymmetryTag::Radial;
        f
    }

    /// `t^r_pow * u(r / t)` on the same grid.
    pub fn dilate(&self, t: f64, r_pow: f64) -> RadialField {
        let amp = t.powf(r_pow);
        RadialField::from_fn(self.grid, |r| amp * self.sample(r / t))
    }
}

/// Four-point Lagrange weights for nodes at -1, 0, 1, 2 evaluated at `t`.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Which local term the problem carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSign {
    /// `+|u|^{p-2}u`, functional `I`.
    Plus,
    /// `-|u|^{p-2}u`, functional `J`.
    Minus,
    /// General nonnegative `W`, functional `G`.
    GeneralW,
}

/// Coefficients of the built-in nonlinearity `W(s) = c1 s^2 + c2 |s|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub local_sign: LocalSign,
    pub w_coeffs: Option<WCoeffs>,
}

impl ProblemParams {
    pub fn new(alpha: f64, p: f64, q: f64, local_sign: LocalSign) -> Result<Self> {
        let params = Self {
            alpha,
            p,
            q,
            local_sign,
            w_coeffs: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_w(alpha: f64, w: WCoeffs) -> Result<Self> {
        let params = Self {
            alpha,
            p: w.p,
            q: 0.0,
            local_sign: LocalSign::GeneralW,
            w_coeffs: Some(w),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.p > 2.0 && self.p.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "p must be > 2, got {}",
                self.p
            )));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "q must be >= 0, got {}",
                self.q
            )));
        }
        if let Some(w) = self.w_coeffs {
            if w.c1 < 0.0 || w.c2 < 0.0 || !(w.p > 2.0) {
                return Err(Error::InvalidParams(format!(
                    "W coefficients must satisfy c1, c2 >= 0, p > 2: {w:?}"
                )));
            }
        }
        if self.local_sign == LocalSign::GeneralW && self.w_coeffs.is_none() {
            return Err(Error::InvalidParams(
                "general W requested without coefficients".into(),
            ));
        }
        Ok(())
    }

    pub fn with_q(&self, q: f64) -> Self {
        Self { q, ..*self }
    }
}

/// The geometric side of a discretization: quadrature, the Dirichlet form
/// and the shifted Laplacian solve. Values are plain slices in node order.
pub trait Mesh: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of each node (`dx` measure).
    fn weights(&self) -> &[f64];

    /// `|x|` of each node.
    fn radii(&self) -> &[f64];

    /// Discrete `||grad u||_2^2` with zero ghosts beyond the boundary.
    fn grad_sq(&self, u: &[f64]) -> f64;

    /// L2 gradient of `grad_sq / 2`, i.e. the 5-point (or radial 3-point)
    /// Laplacian with a minus sign.
    fn neg_laplacian(&self, u: &[f64]) -> Vec<f64>;

    /// Solves `(-Lap_h + diag(shift)) v = rhs` for a positive shift.
    fn solve_shifted(&self, shift: &[f64], rhs: &[f64]) -> Vec<f64>;

    fn integral(&self, f: &[f64]) -> f64 {
        let w = self.weights();
        pairwise_sum_by(f.len(), &|i| w[i] * f[i])
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_dot(self.weights(), a, b)
    }

    fn l2_sq(&self, u: &[f64]) -> f64 {
        self.inner(u, u)
    }

    fn lp_pow(&self, u: &[f64], p: f64) -> f64 {
        let w = self.weights();
        pairwise_sum_by(u.len(), &|i| w[i] * u[i].abs().powf(p))
    }

    /// `int |x|^alpha u^2`.
    fn moment(&self, u: &[f64], alpha: f64) -> f64 {
        let w = self.weights();
        let r = self.radii();
        pairwise_sum_by(u.len(), &|i| w[i] * r[i].powf(alpha) * u[i] * u[i])
    }

    fn star_sq(&self, u: &[f64], alpha: f64) -> f64 {
        let w = self.weights();
        let r = self.radii();
        pairwise_sum_by(u.len(), &|i| w[i] * (1.0 + r[i].powf(alpha)) * u[i] * u[i])
    }

    /// `1 + |x|^alpha` at each node.
    fn confining_weight(&self, alpha: f64) -> Vec<f64> {
        self.radii().iter().map(|r| 1.0 + r.powf(alpha)).collect()
    }

    /// Squared X-norm of the Riesz representative of an L2 gradient, i.e.
    /// `<g, A^{-1} g>` with `A = -Lap_h + 1 + |x|^alpha`.
    fn dual_norm_sq(&self, g: &[f64], alpha: f64) -> f64 {
        let shift = self.confining_weight(alpha);
        let d = self.solve_shifted(&shift, g);
        self.inner(g, &d).max(0.0)
    }
}

/// Planar mesh with cached radii and weights.
#[derive(Debug, Clone)]
pub struct PlaneMesh {
    pub grid: Grid2D,
    radii: Vec<f64>,
    weights: Vec<f64>,
}

impl PlaneMesh {
    pub fn new(grid: Grid2D) -> Self {
        let radii = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                x.hypot(y)
            })
            .collect();
        let h = grid.spacing();
        Self {
            grid,
            radii,
            weights: vec![h * h; grid.len()],
        }
    }

    fn apply_shifted(&self, shift: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.neg_laplacian(v);
        for ((o, s), x) in out.iter_mut().zip(shift).zip(v) {
            *o += s * x;
        }
        out
    }
}

impl Mesh for PlaneMesh {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn radii(&self) -> &[f64] {
        &self.radii
    }

    fn grad_sq(&self, u: &[f64]) -> f64 {
        let n = self.grid.n;
        // Sum of squared jumps across every cell edge, ghost edges included;
        // the h^2 of the quadrature cancels the 1/h^2 of the difference.
        let rows: Vec<f64> = (0..n)
            .map(|j| {
                let mut acc = 0.0;
                let mut prev = 0.0;
                for i in 0..n {
                    let v = u[j * n + i];
                    acc += (v - prev) * (v - prev);
                    prev = v;
                }
                acc + prev * prev
            })
            .collect();
        let cols: Vec<f64> = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                let mut prev = 0.0;
                for j in 0..n {
                    let v = u[j * n + i];
                    acc += (v - prev) * (v - prev);
                    prev = v;
                }
                acc + prev * prev
            })
            .collect();
        pairwise_sum(&rows) + pairwise_sum(&cols)
    }

    fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let c = u[j * n + i];
                let l = if i > 0 { u[j * n + i - 1] } else { 0.0 };
                let r = if i + 1 < n { u[j * n + i + 1] } else { 0.0 };
                let d = if j > 0 { u[(j - 1) * n + i] } else { 0.0 };
                let t = if j + 1 < n { u[(j + 1) * n + i] } else { 0.0 };
                out[j * n + i] = (4.0 * c - l - r - d - t) * inv_h2;
            }
        }
        out
    }

    fn solve_shifted(&self, shift: &[f64], rhs: &[f64]) -> Vec<f64> {
        // Jacobi-preconditioned conjugate gradients; the operator is SPD.
        let n = self.len();
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let precond: Vec<f64> = shift.iter().map(|s| 1.0 / (4.0 * inv_h2 + s)).collect();
        let mut x: Vec<f64> = rhs.iter().zip(&precond).map(|(b, m)| b * m).collect();
        let ax = self.apply_shifted(shift, &x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut z: Vec<f64> = r.iter().zip(&precond).map(|(r, m)| r * m).collect();
        let mut p = z.clone();
        let mut rz = crate::reduce::dot(&r, &z);
        let b_norm = crate::reduce::dot(rhs, rhs).sqrt();
        if b_norm == 0.0 {
            return vec![0.0; n];
        }
        for _ in 0..(20 * self.grid.n + 200) {
            let ap = self.apply_shifted(shift, &p);
            let pap = crate::reduce::dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let step = rz / pap;
            for k in 0..n {
                x[k] += step * p[k];
                r[k] -= step * ap[k];
            }
            let r_norm = crate::reduce::dot(&r, &r).sqrt();
            if r_norm <= 1e-14 * b_norm {
                break;
            }
            for k in 0..n {
                z[k] = r[k] * precond[k];
            }
            let rz_new = crate::reduce::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        x
    }
}

/// Radial mesh: quadrature weight `2 pi r_i dr`.
#[derive(Debug, Clone)]
pub struct RadialMesh {
    pub grid: RadialGrid,
    radii: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialMesh {
    pub fn new(grid: RadialGrid) -> Self {
        let d = grid.spacing();
        let radii: Vec<f64> = (0..grid.m).map(|i| grid.node(i)).collect();
        let weights = radii.iter().map(|r| 2.0 * PI * r * d).collect();
        Self {
            grid,
            radii,
            weights,
        }
    }
}

impl Mesh for RadialMesh {
    fn len(&self) -> usize {
        self.grid.m
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn radii(&self) -> &[f64] {
        &self.radii
    }

    fn grad_sq(&self, u: &[f64]) -> f64 {
        // Edge k sits at r = (k + 1) dr between nodes k and k + 1.
        let m = u.len();
        2.0 * PI
            * pairwise_sum_by(m, &|k| {
                let next = if k + 1 < m { u[k + 1] } else { 0.0 };
                (k as f64 + 1.0) * (next - u[k]) * (next - u[k])
            })
    }

    fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        let d = self.grid.spacing();
        (0..m)
            .map(|i| {
                let next = if i + 1 < m { u[i + 1] } else { 0.0 };
                let mut s = (i as f64 + 1.0) * (u[i] - next);
                if i > 0 {
                    s += i as f64 * (u[i] - u[i - 1]);
                }
                s / ((i as f64 + 0.5) * d * d)
            })
            .collect()
    }

    fn solve_shifted(&self, shift: &[f64], rhs: &[f64]) -> Vec<f64> {
        // Symmetric tridiagonal system after multiplying by the weights.
        let m = rhs.len();
        let w = &self.weights;
        let two_pi = 2.0 * PI;
        let mut diag: Vec<f64> = (0..m)
            .map(|i| two_pi * (2 * i + 1) as f64 + w[i] * shift[i])
            .collect();
        let off: Vec<f64> = (0..m.saturating_sub(1))
            .map(|i| -two_pi * (i as f64 + 1.0))
            .collect();
        let mut b: Vec<f64> = (0..m).map(|i| w[i] * rhs[i]).collect();
        for i in 1..m {
            let f = off[i - 1] / diag[i - 1];
            diag[i] -= f * off[i - 1];
            b[i] -= f * b[i - 1];
        }
        let mut x = vec![0.0; m];
        x[m - 1] = b[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = (b[i] - off[i] * x[i + 1]) / diag[i];
        }
        x
    }
}

/// Common access to fields on either discretization.
pub trait Sampled {
    type M: Mesh;
    fn mesh(&self) -> Self::M;
    fn values(&self) -> &[f64];
}

impl Sampled for Field2D {
    type M = PlaneMesh;
    fn mesh(&self) -> PlaneMesh {
        self.grid.mesh()
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Sampled for RadialField {
    type M = RadialMesh;
    fn mesh(&self) -> RadialMesh {
        self.grid.mesh()
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn grad_sq_norm<F: Sampled>(u: &F) -> f64 {
    u.mesh().grad_sq(u.values())
}

pub fn star_norm_sq<F: Sampled>(u: &F, alpha: f64) -> f64 {
    u.mesh().star_sq(u.values(), alpha)
}

/// `||u||_p`.
pub fn lp_norm<F: Sampled>(u: &F, p: f64) -> f64 {
    u.mesh().lp_pow(u.values(), p).powf(1.0 / p)
}

/// Full X-norm; its square is exactly `grad_sq_norm + star_norm_sq`.
pub fn x_norm<F: Sampled>(u: &F, alpha: f64) -> f64 {
    (grad_sq_norm(u) + star_norm_sq(u, alpha)).sqrt()
}

/// Result of [`resample_dilate`].
#[derive(Debug, Clone)]
pub struct Dilation {
    pub field: Field2D,
    /// Fraction of the source L2 mass that lies outside the back-mapped box.
    pub truncation_loss: f64,
}

impl Dilation {
    pub fn truncated(&self) -> bool {
        self.truncation_loss > 0.01
    }
}

/// `t^r_pow * u(x / t)` resampled on the source grid.
pub fn resample_dilate(u: &Field2D, t: f64, r_pow: f64) -> Result<Dilation> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "dilation factor must be positive, got {t}"
        )));
    }
    let grid = u.grid;
    let amp = t.powf(r_pow);
    let values = if t == 1.0 {
        u.values.iter().map(|v| amp * v).collect()
    } else {
        (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                amp * u.sample(x / t, y / t)
            })
            .collect()
    };
    let back = grid.half_width / t;
    let total = pairwise_sum_by(grid.len(), &|k| u.values[k] * u.values[k]);
    let lost = pairwise_sum_by(grid.len(), &|k| {
        let (x, y) = grid.point(k);
        if x.abs() > back || y.abs() > back {
            u.values[k] * u.values[k]
        } else {
            0.0
        }
    });
    let truncation_loss = if total > 0.0 { lost / total } else { 0.0 };
    Ok(Dilation {
        field: Field2D {
            grid,
            values,
            symmetry_tag: u.symmetry_tag,
        },
        truncation_loss,
    })
}
