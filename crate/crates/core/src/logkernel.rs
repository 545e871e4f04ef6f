//! The logarithmic Coulomb energy `V0 = V1 - V2` and the planar Newtonian
//! potential `phi = (1/2 pi) log|.| * u^2`.
//!
//! Kernels are integrated exactly over source cells (cell averages) so that
//! the diagonal singularity costs no accuracy. The direct O(N^2) sums over a
//! [`KernelTable`] are the reference; [`FftPotential`] computes the same
//! discrete convolution through zero-padded FFTs.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field2D, Grid2D, Mesh, RadialField, RadialGrid};
use crate::quad::{gauss_legendre, integrate};
use crate::reduce::{dot, pairwise_sum_by};

const INV_2PI: f64 = 1.0 / (2.0 * PI);

/// Cells whose offset exceeds this (in cell units, sup norm) use tensor
/// Gauss-Legendre; closer ones are integrated in closed or polar form.
const NEAR: f64 = 3.0;
const FAR_ORDER: usize = 10;

/// The three kernels `log r`, `log(2 + r)` and `log(1 + 2/r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    Log,
    LogTwoPlus,
    LogOnePlusTwoOver,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Log, Kernel::LogTwoPlus, Kernel::LogOnePlusTwoOver];

    pub fn eval(self, r: f64) -> f64 {
        match self {
            Kernel::Log => r.ln(),
            Kernel::LogTwoPlus => (2.0 + r).ln(),
            Kernel::LogOnePlusTwoOver => (2.0 / r).ln_1p(),
        }
    }

    /// `int_0^R k(s) s ds`.
    fn radial_primitive(self, r: f64) -> f64 {
        let g0 = |r: f64| {
            if r > 0.0 {
                0.5 * r * r * r.ln() - 0.25 * r * r
            } else {
                0.0
            }
        };
        let g1 = |r: f64| {
            let x = 0.5 * r;
            0.5 * LN_2 * r * r + 4.0 * (0.5 * (x * x - 1.0) * x.ln_1p() - 0.25 * x * x + 0.5 * x)
        };
        match self {
            Kernel::Log => g0(r),
            Kernel::LogTwoPlus => g1(r),
            Kernel::LogOnePlusTwoOver => g1(r) - g0(r),
        }
    }

    /// Shift of the zero-offset convolution weight. Point targets against
    /// cell-constant sources reproduce `K * rho + (h^2/24) (Lap K) * rho`; for
    /// `(1/2 pi) log` the error is `(h^2/24) rho`, removed by `-1/24` on the
    /// diagonal. `log(2 + r)` is smooth and left alone; `log(1 + 2/r)` takes
    /// the opposite shift so that `V0 = V1 - V2` stays exact.
    fn diagonal_correction(self) -> f64 {
        match self {
            Kernel::Log => -1.0 / 24.0,
            Kernel::LogTwoPlus => 0.0,
            Kernel::LogOnePlusTwoOver => 1.0 / 24.0,
        }
    }

    fn index(self) -> usize {
        match self {
            Kernel::Log => 0,
            Kernel::LogTwoPlus => 1,
            Kernel::LogOnePlusTwoOver => 2,
        }
    }
}

// Mixed primitive of log(x^2 + y^2): d^2 F / dx dy = log(x^2 + y^2).
fn corner_f(x: f64, y: f64) -> f64 {
    let mut f = 0.0;
    if x != 0.0 && y != 0.0 {
        f += x * y * (x * x + y * y).ln() - 3.0 * x * y;
    }
    if x != 0.0 {
        f += x * x * (y / x).atan();
    }
    if y != 0.0 {
        f += y * y * (x / y).atan();
    }
    f
}

fn far_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(FAR_ORDER))
}

/// Average of `log|z|` over the unit square centered at `(cx, cy)`.
pub fn unit_cell_avg_log(cx: f64, cy: f64) -> f64 {
    if cx.abs().max(cy.abs()) <= NEAR + 1.0 {
        let (x1, x2, y1, y2) = (cx - 0.5, cx + 0.5, cy - 0.5, cy + 0.5);
        0.5 * (corner_f(x2, y2) - corner_f(x1, y2) - corner_f(x2, y1) + corner_f(x1, y1))
    } else {
        let (x, w) = far_rule();
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            for (yj, wj) in x.iter().zip(w) {
                let px = cx + 0.5 * xi;
                let py = cy + 0.5 * yj;
                acc += wi * wj * 0.5 * (px * px + py * py).ln();
            }
        }
        0.25 * acc
    }
}

/// Average of `log|z|` over the unit square centered at the origin.
pub fn c0() -> f64 {
    unit_cell_avg_log(0.0, 0.0)
}

/// Average of `kernel(|y|)` over the square of side `h` centered at `(ah, bh)`.
fn cell_avg(kernel: Kernel, h: f64, a: f64, b: f64) -> f64 {
    if kernel == Kernel::Log {
        return h.ln() + unit_cell_avg_log(a, b);
    }
    if a.abs().max(b.abs()) <= NEAR {
        // Split the square into triangles fanning out from the origin and
        // integrate the radial primitive along each edge.
        let (x1, x2, y1, y2) = ((a - 0.5) * h, (a + 0.5) * h, (b - 0.5) * h, (b + 0.5) * h);
        let corners = [(x1, y1), (x2, y1), (x2, y2), (x1, y2)];
        let mut total = 0.0;
        for e in 0..4 {
            let p = corners[e];
            let q = corners[(e + 1) % 4];
            let cross = p.0 * q.1 - p.1 * q.0;
            if cross == 0.0 {
                continue;
            }
            let edge = integrate(
                |s: f64| {
                    let x = p.0 + s * (q.0 - p.0);
                    let y = p.1 + s * (q.1 - p.1);
                    let r2 = x * x + y * y;
                    kernel.radial_primitive(r2.sqrt()) / r2
                },
                0.0,
                1.0,
                1e-17 * h * h,
                1e-14,
            );
            total += cross * edge.value;
        }
        total / (h * h)
    } else {
        let (x, w) = far_rule();
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            for (yj, wj) in x.iter().zip(w) {
                let px = (a + 0.5 * xi) * h;
                let py = (b + 0.5 * yj) * h;
                acc += wi * wj * kernel.eval(px.hypot(py));
            }
        }
        0.25 * acc
    }
}

/// Cell-averaged kernels `(1/2 pi) avg k(|x - y|)` for every lattice offset of
/// a grid. Entries depend only on `|a|, |b|`, so the table is symmetric under
/// offset negation by construction. Convolutions use the averages with a
/// diagonal correction that makes `V0` fourth order for smooth densities.
#[derive(Debug)]
pub struct KernelTable {
    grid: Grid2D,
    tables: [Vec<f64>; 3],
}

impl KernelTable {
    pub fn new(grid: Grid2D) -> Self {
        let n = grid.n();
        let h = grid.spacing();
        let build = |kernel: Kernel| -> Vec<f64> {
            let mut t: Vec<f64> = (0..n * n)
                .into_par_iter()
                .map(|idx| INV_2PI * cell_avg(kernel, h, (idx % n) as f64, (idx / n) as f64))
                .collect();
            t[0] += kernel.diagonal_correction();
            t
        };
        Self {
            grid,
            tables: [
                build(Kernel::Log),
                build(Kernel::LogTwoPlus),
                build(Kernel::LogOnePlusTwoOver),
            ],
        }
    }

    /// Process-wide cache keyed by grid.
    pub fn shared(grid: Grid2D) -> Arc<KernelTable> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<KernelTable>>>> = OnceLock::new();
        let key = (grid.half_width().to_bits(), grid.n());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("kernel cache poisoned").get(&key) {
            return t.clone();
        }
        let table = Arc::new(KernelTable::new(grid));
        cache
            .lock()
            .expect("kernel cache poisoned")
            .entry(key)
            .or_insert(table)
            .clone()
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    /// Cell average of `(1/2 pi) k` at lattice offset `(a, b)`.
    pub fn entry(&self, kernel: Kernel, a: isize, b: isize) -> f64 {
        let w = self.weight(kernel, a, b);
        if a == 0 && b == 0 {
            w - kernel.diagonal_correction()
        } else {
            w
        }
    }

    /// Convolution weight at offset `(a, b)`: the cell average, corrected on
    /// the diagonal.
    pub fn weight(&self, kernel: Kernel, a: isize, b: isize) -> f64 {
        let n = self.grid.n();
        self.tables[kernel.index()][b.unsigned_abs() * n + a.unsigned_abs()]
    }

    /// `(1/2 pi) avg log|y|` over the cell at lattice offset `(a, b)`.
    pub fn cell_avg_log(&self, a: isize, b: isize) -> f64 {
        self.entry(Kernel::Log, a, b)
    }

    pub fn zero_offset(&self) -> f64 {
        self.entry(Kernel::Log, 0, 0)
    }

    /// Direct discrete convolutions `sum_j W(i - j) rho_j h^2` with the corrected
    /// weights `W`, one output per
    /// requested kernel. Parallel over target rows; each target is summed in
    /// a fixed order.
    pub fn convolve(&self, kernels: &[Kernel], rho: &[f64]) -> Vec<Vec<f64>> {
        let n = self.grid.n();
        let h2 = self.grid.spacing().powi(2);
        let k = kernels.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut out = vec![0.0; k * n];
                for jj in 0..n {
                    let src = &rho[jj * n..(jj + 1) * n];
                    let db = j.abs_diff(jj) * n;
                    for (kk, kernel) in kernels.iter().enumerate() {
                        let row = &self.tables[kernel.index()][db..db + n];
                        let acc = &mut out[kk * n..(kk + 1) * n];
                        for (i, a) in acc.iter_mut().enumerate() {
                            let mut s = 0.0;
                            for (ii, r) in src.iter().enumerate() {
                                s += row[i.abs_diff(ii)] * r;
                            }
                            *a += s;
                        }
                    }
                }
                out
            })
            .collect();
        (0..k)
            .map(|kk| {
                let mut phi = Vec::with_capacity(n * n);
                for row in &rows {
                    phi.extend(row[kk * n..(kk + 1) * n].iter().map(|v| v * h2));
                }
                phi
            })
            .collect()
    }
}

/// Maps `rho = u^2` at the nodes to the discrete potential at the nodes.
pub trait PotentialOp: Send + Sync {
    fn potential(&self, rho: &[f64]) -> Vec<f64>;
}

/// Reference evaluator: direct double sum.
#[derive(Debug, Clone)]
pub struct DirectPotential(pub Arc<KernelTable>);

impl PotentialOp for DirectPotential {
    fn potential(&self, rho: &[f64]) -> Vec<f64> {
        self.0
            .convolve(&[Kernel::Log], rho)
            .pop()
            .expect("one kernel")
    }
}

/// The same discrete convolution via a `2n x 2n` zero-padded FFT.
pub struct FftPotential {
    n: usize,
    h2: f64,
    kernel_hat: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPotential").field("n", &self.n).finish()
    }
}

impl FftPotential {
    pub fn new(table: &KernelTable) -> Self {
        Self::with_kernel(table, Kernel::Log)
    }

    /// FFT convolution with any of the tabulated kernels.
    pub fn with_kernel(table: &KernelTable, kernel: Kernel) -> Self {
        let n = table.grid.n();
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut buf = vec![Complex::new(0.0, 0.0); m * m];
        for b in 0..m {
            for a in 0..m {
                let da = if a < n {
                    a as isize
                } else {
                    a as isize - m as isize
                };
                let db = if b < n {
                    b as isize
                } else {
                    b as isize - m as isize
                };
                if da.unsigned_abs() < n && db.unsigned_abs() < n {
                    buf[b * m + a] = Complex::new(table.weight(kernel, da, db), 0.0);
                }
            }
        }
        let mut this = Self {
            n,
            h2: table.grid.spacing().powi(2),
            kernel_hat: Vec::new(),
            forward,
            inverse,
        };
        this.transform(&mut buf, true);
        this.kernel_hat = buf;
        this
    }

    pub fn for_grid(grid: Grid2D) -> Self {
        Self::new(&KernelTable::shared(grid))
    }

    // 2-D transform; the spectrum is left transposed, which is harmless since
    // the kernel spectrum shares the layout.
    fn transform(&self, buf: &mut [Complex<f64>], forward: bool) {
        let m = 2 * self.n;
        let plan = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        plan.process(buf);
        transpose(buf, m);
        plan.process(buf);
        if !forward {
            transpose(buf, m);
        }
    }
}

fn transpose(buf: &mut [Complex<f64>], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            buf.swap(i * m + j, j * m + i);
        }
    }
}

impl PotentialOp for FftPotential {
    fn potential(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n;
        let mut buf = vec![Complex::new(0.0, 0.0); m * m];
        for j in 0..n {
            for i in 0..n {
                buf[j * m + i] = Complex::new(rho[j * n + i], 0.0);
            }
        }
        // The first pass runs over the original row layout.
        self.forward.process(&mut buf);
        transpose(&mut buf, m);
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        // Undo: columns first (we are transposed), then rows.
        self.inverse.process(&mut buf);
        transpose(&mut buf, m);
        self.inverse.process(&mut buf);
        let scale = self.h2 / (m * m) as f64;
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                out[j * n + i] = buf[j * m + i].re * scale;
            }
        }
        out
    }
}

/// The three quartic energies of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoulombEnergies {
    /// Directly summed `(1/2 pi) int int log|x - y| u^2 u^2`.
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
}

impl CoulombEnergies {
    pub fn v0_split(&self) -> f64 {
        self.v1 - self.v2
    }

    /// Relative disagreement between the direct `V0` and `V1 - V2`. The
    /// denominator is floored at the rounding scale of the subtraction.
    pub fn split_defect(&self) -> f64 {
        let scale = self
            .v0
            .abs()
            .max(1e-6 * self.v1.abs())
            .max(f64::MIN_POSITIVE);
        (self.v0 - self.v0_split()).abs() / scale
    }
}

const SPLIT_TOL: f64 = 1e-8;

fn check_split(e: CoulombEnergies) -> Result<CoulombEnergies> {
    if e.split_defect() > SPLIT_TOL {
        return Err(Error::Degenerate(format!(
            "V0 = {:.15e} disagrees with V1 - V2 = {:.15e}",
            e.v0,
            e.v0_split()
        )));
    }
    Ok(e)
}

fn squares(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v * v).collect()
}

/// Fields for which the Coulomb energies are defined.
pub trait LogField {
    /// Discrete potential at the nodes (same discretization as [`LogField::v0`]).
    fn potential_nodes(&self) -> Vec<f64>;
    fn v0(&self) -> f64;
    /// `V0` (direct), `V1`, `V2`, after checking `V0 = V1 - V2`.
    fn coulomb(&self) -> Result<CoulombEnergies>;
    /// L2 gradient `4 phi u` of `V0`.
    fn v0_gradient(&self) -> Vec<f64>;
}

impl LogField for Field2D {
    fn potential_nodes(&self) -> Vec<f64> {
        DirectPotential(KernelTable::shared(self.grid)).potential(&squares(&self.values))
    }

    fn v0(&self) -> f64 {
        let rho = squares(&self.values);
        let phi = DirectPotential(KernelTable::shared(self.grid)).potential(&rho);
        self.grid.mesh().inner(&phi, &rho)
    }

    fn coulomb(&self) -> Result<CoulombEnergies> {
        let rho = squares(&self.values);
        let table = KernelTable::shared(self.grid);
        let phis = table.convolve(&Kernel::ALL, &rho);
        let mesh = self.grid.mesh();
        check_split(CoulombEnergies {
            v0: mesh.inner(&phis[0], &rho),
            v1: mesh.inner(&phis[1], &rho),
            v2: mesh.inner(&phis[2], &rho),
        })
    }

    fn v0_gradient(&self) -> Vec<f64> {
        let phi = self.potential_nodes();
        phi.iter()
            .zip(&self.values)
            .map(|(p, u)| 4.0 * p * u)
            .collect()
    }
}

/// Mixed energy `(1/2 pi) int int log|x - y| u^2(x) w^2(y)`.
pub fn mutual_v0(u: &Field2D, w: &Field2D) -> Result<f64> {
    if u.grid != w.grid {
        return Err(Error::GridMismatch);
    }
    let phi = DirectPotential(KernelTable::shared(w.grid)).potential(&squares(&w.values));
    Ok(u.grid.mesh().inner(&phi, &squares(&u.values)))
}

pub fn v0<F: LogField>(u: &F) -> f64 {
    u.v0()
}

pub fn v1<F: LogField>(u: &F) -> Result<f64> {
    Ok(u.coulomb()?.v1)
}

pub fn v2<F: LogField>(u: &F) -> Result<f64> {
    Ok(u.coulomb()?.v2)
}

/// `phi = Phi_2 * u^2` at the cell centers, by direct summation.
pub fn newtonian_potential(u: &Field2D) -> Field2D {
    Field2D {
        grid: u.grid,
        values: u.potential_nodes(),
        symmetry_tag: u.symmetry_tag,
    }
}

/// `phi` at an arbitrary point, with exact cell averages of the kernel.
pub fn potential_at(u: &Field2D, x: f64, y: f64) -> f64 {
    let g = u.grid;
    let h = g.spacing();
    let n = g.n();
    let rows: Vec<f64> = (0..n)
        .map(|j| {
            let cy = (g.coord(j) - y) / h;
            let mut s = 0.0;
            for i in 0..n {
                let v = u.values[j * n + i];
                if v != 0.0 {
                    let cx = (g.coord(i) - x) / h;
                    s += v * v * (h.ln() + unit_cell_avg_log(cx, cy));
                }
            }
            s
        })
        .collect();
    INV_2PI * h * h * pairwise_sum_by(n, &|j| rows[j])
}

pub fn v0_gradient_action(u: &Field2D) -> Field2D {
    Field2D {
        grid: u.grid,
        values: u.v0_gradient(),
        symmetry_tag: u.symmetry_tag,
    }
}

/// Radial Green operator: `phi_i = sum_k log(max(r_i, r_k)) rho_k r_k dr`,
/// with the self cell integrated exactly. The matrix is symmetric once the
/// quadrature weights are included, so `4 phi u` is the exact gradient of
/// the discrete `V0`.
#[derive(Debug, Clone)]
pub struct RadialPotentialOp {
    grid: RadialGrid,
    diag: Vec<f64>,
}

impl RadialPotentialOp {
    pub fn new(grid: RadialGrid) -> Self {
        Self {
            grid,
            diag: (0..grid.m()).map(|i| Self::diag_entry(grid, i)).collect(),
        }
    }

    /// `int_cell log(max(r_i, s)) s ds` over the cell of node `i`.
    fn diag_entry(grid: RadialGrid, i: usize) -> f64 {
        let d = grid.spacing();
        let (a, r, b) = (i as f64 * d, grid.node(i), (i + 1) as f64 * d);
        let p = |s: f64| 0.5 * s * s * s.ln() - 0.25 * s * s;
        r.ln() * 0.5 * (r * r - a * a) + p(b) - p(r)
    }
}

impl PotentialOp for RadialPotentialOp {
    fn potential(&self, rho: &[f64]) -> Vec<f64> {
        let m = rho.len();
        let d = self.grid.spacing();
        let mass: Vec<f64> = (0..m).map(|k| rho[k] * self.grid.node(k) * d).collect();
        let mut inner = vec![0.0; m];
        for i in 1..m {
            inner[i] = inner[i - 1] + mass[i - 1];
        }
        let mut outer = vec![0.0; m];
        for i in (0..m.saturating_sub(1)).rev() {
            outer[i] = outer[i + 1] + self.grid.node(i + 1).ln() * mass[i + 1];
        }
        (0..m)
            .map(|i| self.grid.node(i).ln() * inner[i] + outer[i] + rho[i] * self.diag[i])
            .collect()
    }
}

/// Potential of a radial field at its nodes.
pub fn radial_potential(u: &RadialField) -> RadialField {
    let rho = squares(&u.values);
    u.with_values(RadialPotentialOp::new(u.grid).potential(&rho))
}

/// `phi(r)` at any `r >= 0`, exact for `u^2` piecewise constant on cells.
pub fn radial_potential_at(u: &RadialField, r: f64) -> f64 {
    let d = u.grid.spacing();
    let p = |s: f64| {
        if s > 0.0 {
            0.5 * s * s * s.ln() - 0.25 * s * s
        } else {
            0.0
        }
    };
    let log_r = if r > 0.0 { r.ln() } else { 0.0 };
    let terms: Vec<f64> = u
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let rho = v * v;
            let (a, b) = (k as f64 * d, (k + 1) as f64 * d);
            if b <= r {
                rho * log_r * 0.5 * (b * b - a * a)
            } else if a >= r {
                rho * (p(b) - p(a))
            } else {
                rho * (log_r * 0.5 * (r * r - a * a) + p(b) - p(r))
            }
        })
        .collect();
    pairwise_sum_by(terms.len(), &|k| terms[k])
}

/// Circular mean `(1/2 pi) int_0^{2 pi} k(|r e^{i theta} - s|) d theta`.
fn circular_mean(kernel: Kernel, r: f64, s: f64) -> f64 {
    let f = |t: f64| {
        let d2 = (r * r + s * s - 2.0 * r * s * t.cos()).max(0.0);
        kernel.eval(d2.sqrt())
    };
    integrate(f, 0.0, PI, 1e-15, 1e-13).value / PI
}

/// Matrices `M_K(i, k)` of circular-mean kernels for the radial `V1`, `V2`
/// and the matching `V0`, cached per grid.
struct RadialMatrices {
    m: [Vec<f64>; 3],
}

fn radial_matrices(grid: RadialGrid) -> Arc<RadialMatrices> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<RadialMatrices>>>> = OnceLock::new();
    let key = (grid.radius().to_bits(), grid.m());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("radial cache poisoned").get(&key) {
        return t.clone();
    }
    let m = grid.m();
    let d = grid.spacing();
    let build = |kernel: Kernel| -> Vec<f64> {
        (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let (i, k) = (idx / m, idx % m);
                let (ri, rk) = (grid.node(i), grid.node(k));
                match (kernel, i == k) {
                    (Kernel::Log, false) => ri.max(rk).ln(),
                    (_, false) => circular_mean(kernel, ri, rk),
                    (Kernel::Log, true) => RadialPotentialOp::diag_entry(grid, i) / (ri * d),
                    (_, true) => {
                        // Self cell: average over the source cell, split at r_i.
                        let a = i as f64 * d;
                        let b = a + d;
                        let g = |s: f64| circular_mean(kernel, ri, s) * s;
                        let lo = integrate(g, a, ri, 1e-15, 1e-12).value;
                        let hi = integrate(g, ri, b, 1e-15, 1e-12).value;
                        (lo + hi) / (ri * d)
                    }
                }
            })
            .collect()
    };
    let mats = Arc::new(RadialMatrices {
        m: [
            build(Kernel::Log),
            build(Kernel::LogTwoPlus),
            build(Kernel::LogOnePlusTwoOver),
        ],
    });
    cache
        .lock()
        .expect("radial cache poisoned")
        .entry(key)
        .or_insert(mats)
        .clone()
}

impl LogField for RadialField {
    fn potential_nodes(&self) -> Vec<f64> {
        radial_potential(self).values
    }

    fn v0(&self) -> f64 {
        let rho = squares(&self.values);
        let phi = RadialPotentialOp::new(self.grid).potential(&rho);
        self.grid.mesh().inner(&phi, &rho)
    }

    fn coulomb(&self) -> Result<CoulombEnergies> {
        let mats = radial_matrices(self.grid);
        let m = self.grid.m();
        let mesh = self.grid.mesh();
        let w = mesh.weights();
        let rho = squares(&self.values);
        let mass: Vec<f64> = rho.iter().zip(w).map(|(r, w)| r * w).collect();
        let energy = |mat: &Vec<f64>| {
            let row: Vec<f64> = (0..m)
                .map(|i| dot(&mat[i * m..(i + 1) * m], &mass))
                .collect();
            INV_2PI * dot(&row, &mass)
        };
        check_split(CoulombEnergies {
            v0: energy(&mats.m[0]),
            v1: energy(&mats.m[1]),
            v2: energy(&mats.m[2]),
        })
    }

    fn v0_gradient(&self) -> Vec<f64> {
        let phi = self.potential_nodes();
        phi.iter()
            .zip(&self.values)
            .map(|(p, u)| 4.0 * p * u)
            .collect()
    }
}

pub fn radial_v0_gradient_action(u: &RadialField) -> RadialField {
    u.with_values(u.v0_gradient())
}
