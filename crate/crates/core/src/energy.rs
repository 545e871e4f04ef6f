//! The functionals `I`, `J`, `G`, their L2 gradients, Hessian actions and the
//! Nehari and Pohozaev identities.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    Field2D, Grid2D, LocalSign, Mesh, ProblemParams, RadialField, RadialGrid, WCoeffs,
};
use crate::library::{library_grid, planar_library, LIBRARY_SEED};
use crate::logkernel::{
    DirectPotential, FftPotential, KernelTable, LogField, PotentialOp, RadialPotentialOp,
};

/// A local term `W` for the uncoupled problem.
pub trait Nonlinearity: Send + Sync + Debug {
    fn value(&self, s: f64) -> f64;
    fn derivative(&self, s: f64) -> f64;
    fn second_derivative(&self, s: f64) -> f64 {
        let e = 1e-5 * s.abs().max(1.0);
        (self.derivative(s + e) - self.derivative(s - e)) / (2.0 * e)
    }
    /// Declared growth bound `W(s) <= c1 s^2 + c2 |s|^p`.
    fn growth(&self) -> WCoeffs;
}

/// `W(s) = c1 s^2 + c2 |s|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw(pub WCoeffs);

impl Nonlinearity for PowerLaw {
    fn value(&self, s: f64) -> f64 {
        let w = self.0;
        w.c1 * s * s + w.c2 * s.abs().powf(w.p)
    }

    fn derivative(&self, s: f64) -> f64 {
        let w = self.0;
        2.0 * w.c1 * s + w.c2 * w.p * signed_pow(s, w.p - 1.0)
    }

    fn second_derivative(&self, s: f64) -> f64 {
        let w = self.0;
        2.0 * w.c1 + w.c2 * w.p * (w.p - 1.0) * abs_pow(s, w.p - 2.0)
    }

    fn growth(&self) -> WCoeffs {
        self.0
    }
}

/// `|s|^e` with the continuous value 0 at `s = 0` for every `e > 0`.
fn abs_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(e)
    }
}

/// `|s|^(e-1) s`, i.e. `sign(s) |s|^e`.
fn signed_pow(s: f64, e: f64) -> f64 {
    abs_pow(s, e).copysign(s)
}

/// Checks `W(0) = 0`, nonnegativity and the declared growth on `[-10, 10]`,
/// and `W'` against central differences.
pub fn audit_nonlinearity(w: &dyn Nonlinearity) -> Result<()> {
    let g = w.growth();
    if w.value(0.0) != 0.0 {
        return Err(Error::NonlinearityAudit(format!("W(0) = {}", w.value(0.0))));
    }
    for k in 0..=2000 {
        let s = -10.0 + 0.01 * k as f64;
        let v = w.value(s);
        if !(v >= 0.0) {
            return Err(Error::NonlinearityAudit(format!("W({s}) = {v} < 0")));
        }
        let bound = g.c1 * s * s + g.c2 * s.abs().powf(g.p);
        if v > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::NonlinearityAudit(format!(
                "W({s}) = {v} exceeds declared growth {bound}"
            )));
        }
        let e = 1e-6 * s.abs().max(1.0);
        let fd = (w.value(s + e) - w.value(s - e)) / (2.0 * e);
        let d = w.derivative(s);
        let scale = d.abs().max(1e-3 * bound.max(1.0));
        if (fd - d).abs() > 1e-6 * scale {
            return Err(Error::NonlinearityAudit(format!(
                "W'({s}) = {d} but finite differences give {fd}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Functional {
    I,
    J,
    G,
}

impl Functional {
    pub fn for_sign(sign: LocalSign) -> Self {
        match sign {
            LocalSign::Plus => Functional::I,
            LocalSign::Minus => Functional::J,
            LocalSign::GeneralW => Functional::G,
        }
    }

    /// Sign of the `|u|^p / p` term.
    pub(crate) fn lp_sign(self) -> f64 {
        match self {
            Functional::I => 1.0,
            Functional::J => -1.0,
            Functional::G => 0.0,
        }
    }
}

/// Scalar ingredients of every functional for one field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Terms {
    pub grad_sq: f64,
    pub l2_sq: f64,
    /// `int |x|^alpha u^2`.
    pub moment: f64,
    pub lp: f64,
    pub v0: f64,
    /// `int W(u)`, zero without a nonlinearity.
    pub w_int: f64,
    /// `int W'(u) u`.
    pub w_prime_u: f64,
}

impl Terms {
    pub fn star_sq(&self) -> f64 {
        self.l2_sq + self.moment
    }

    pub fn x_norm_sq(&self) -> f64 {
        self.grad_sq + self.star_sq()
    }
}

/// Terms plus the potential they were computed with.
#[derive(Debug, Clone)]
pub struct State {
    pub terms: Terms,
    pub phi: Vec<f64>,
}

/// A discretized problem: mesh, Coulomb operator, parameters and (for `G`)
/// the local nonlinearity.
#[derive(Clone)]
pub struct Model {
    mesh: Arc<dyn Mesh>,
    pot: Arc<dyn PotentialOp>,
    params: ProblemParams,
    w: Option<Arc<dyn Nonlinearity>>,
    confining: Vec<f64>,
    r_alpha: Vec<f64>,
}

impl Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("params", &self.params)
            .field("len", &self.mesh.len())
            .finish()
    }
}

impl Model {
    fn assemble(mesh: Arc<dyn Mesh>, pot: Arc<dyn PotentialOp>, params: ProblemParams) -> Self {
        let r_alpha: Vec<f64> = mesh.radii().iter().map(|r| r.powf(params.alpha)).collect();
        let confining = r_alpha.iter().map(|v| 1.0 + v).collect();
        let w = params
            .w_coeffs
            .map(|c| Arc::new(PowerLaw(c)) as Arc<dyn Nonlinearity>);
        Self {
            mesh,
            pot,
            params,
            w,
            confining,
            r_alpha,
        }
    }

    /// Planar model with the FFT convolution (for iterative solvers).
    pub fn plane(grid: Grid2D, params: ProblemParams) -> Self {
        Self::assemble(
            Arc::new(grid.mesh()),
            Arc::new(FftPotential::for_grid(grid)),
            params,
        )
    }

    /// Planar model with the direct double sum (reference evaluator).
    pub fn plane_direct(grid: Grid2D, params: ProblemParams) -> Self {
        Self::assemble(
            Arc::new(grid.mesh()),
            Arc::new(DirectPotential(KernelTable::shared(grid))),
            params,
        )
    }

    pub fn radial(grid: RadialGrid, params: ProblemParams) -> Self {
        Self::assemble(
            Arc::new(grid.mesh()),
            Arc::new(RadialPotentialOp::new(grid)),
            params,
        )
    }

    /// Replaces the built-in `W` (the caller is responsible for auditing).
    pub fn with_nonlinearity(mut self, w: Arc<dyn Nonlinearity>) -> Self {
        self.w = Some(w);
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.params.q = q;
        self
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn mesh(&self) -> &dyn Mesh {
        self.mesh.as_ref()
    }

    pub fn nonlinearity(&self) -> Option<&Arc<dyn Nonlinearity>> {
        self.w.as_ref()
    }

    pub fn functional(&self) -> Functional {
        Functional::for_sign(self.params.local_sign)
    }

    pub fn confining(&self) -> &[f64] {
        &self.confining
    }

    pub fn potential(&self, u: &[f64]) -> Vec<f64> {
        let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
        self.pot.potential(&rho)
    }

    pub fn state(&self, u: &[f64]) -> State {
        let mesh = self.mesh.as_ref();
        let phi = self.potential(u);
        let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
        let (w_int, w_prime_u) = match &self.w {
            Some(w) => {
                let wv: Vec<f64> = u.iter().map(|&s| w.value(s)).collect();
                let wd: Vec<f64> = u.iter().map(|&s| w.derivative(s) * s).collect();
                (mesh.integral(&wv), mesh.integral(&wd))
            }
            None => (0.0, 0.0),
        };
        let terms = Terms {
            grad_sq: mesh.grad_sq(u),
            l2_sq: mesh.l2_sq(u),
            moment: mesh.inner(&rho, &self.r_alpha),
            lp: mesh.lp_pow(u, self.params.p),
            v0: mesh.inner(&phi, &rho),
            w_int,
            w_prime_u,
        };
        State { terms, phi }
    }

    pub fn value(&self, f: Functional, t: &Terms) -> f64 {
        let quad = 0.5 * t.x_norm_sq();
        match f {
            Functional::G => quad + t.w_int,
            _ => quad - 0.25 * self.params.q * t.v0 + f.lp_sign() * t.lp / self.params.p,
        }
    }

    pub fn energy(&self, f: Functional, u: &[f64]) -> f64 {
        self.value(f, &self.state(u).terms)
    }

    /// L2 gradient.
    pub fn gradient(&self, f: Functional, u: &[f64], s: &State) -> Vec<f64> {
        let mut g = self.mesh.neg_laplacian(u);
        let q = self.params.q;
        let p = self.params.p;
        for k in 0..u.len() {
            g[k] += self.confining[k] * u[k];
            match f {
                Functional::G => {
                    if let Some(w) = &self.w {
                        g[k] += w.derivative(u[k]);
                    }
                }
                _ => g[k] += -q * s.phi[k] * u[k] + f.lp_sign() * signed_pow(u[k], p - 1.0),
            }
        }
        g
    }

    /// L2 gradient of `V0`: `4 phi u`.
    pub fn v0_gradient(&self, u: &[f64], s: &State) -> Vec<f64> {
        u.iter().zip(&s.phi).map(|(u, p)| 4.0 * p * u).collect()
    }

    /// Second derivative applied to `v` (L2 representation).
    pub fn hessian_apply(&self, f: Functional, u: &[f64], s: &State, v: &[f64]) -> Vec<f64> {
        let mut out = self.mesh.neg_laplacian(v);
        let p = self.params.p;
        let q = self.params.q;
        let dphi = if f == Functional::G || q == 0.0 {
            vec![0.0; u.len()]
        } else {
            let uv: Vec<f64> = u.iter().zip(v).map(|(a, b)| 2.0 * a * b).collect();
            self.pot.potential(&uv)
        };
        for k in 0..u.len() {
            out[k] += self.confining[k] * v[k];
            match f {
                Functional::G => {
                    if let Some(w) = &self.w {
                        out[k] += w.second_derivative(u[k]) * v[k];
                    }
                }
                _ => {
                    out[k] += -q * (s.phi[k] * v[k] + dphi[k] * u[k])
                        + f.lp_sign() * (p - 1.0) * abs_pow(u[k], p - 2.0) * v[k];
                }
            }
        }
        out
    }

    /// `A^{-1} g` with `A = -Lap_h + 1 + |x|^alpha`: the Riesz map of the X metric.
    pub fn riesz(&self, g: &[f64]) -> Vec<f64> {
        self.mesh.solve_shifted(&self.confining, g)
    }

    /// X-dual norm of an L2 gradient (= X-norm of its Riesz representative).
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        let d = self.riesz(g);
        self.mesh.inner(g, &d).max(0.0).sqrt()
    }

    pub fn x_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        // <A a, b> with the same quadrature as the norms
        let mut aa = self.mesh.neg_laplacian(a);
        for k in 0..a.len() {
            aa[k] += self.confining[k] * a[k];
        }
        self.mesh.inner(&aa, b)
    }

    /// `<grad, u>`: `grad + star - q V0 +- lp` (or `+ int W'(u) u` for `G`).
    pub fn nehari(&self, f: Functional, t: &Terms) -> f64 {
        match f {
            Functional::G => t.x_norm_sq() + t.w_prime_u,
            _ => t.x_norm_sq() - self.params.q * t.v0 + f.lp_sign() * t.lp,
        }
    }

    /// `d/ds F(s^r u(./s))` at `s = 1` for `I` and `J`.
    pub fn pohozaev(&self, f: Functional, t: &Terms, r: f64) -> f64 {
        let a = self.params.alpha;
        let p = self.params.p;
        let q = self.params.q;
        r * t.grad_sq + (r + 1.0) * t.l2_sq + (r + 1.0 + 0.5 * a) * t.moment
            - q / (8.0 * PI) * t.l2_sq * t.l2_sq
            - q * (r + 1.0) * t.v0
            + f.lp_sign() * (p * r + 2.0) / p * t.lp
    }

    /// Sum of the magnitudes of the Pohozaev terms, for relative tolerances.
    pub fn pohozaev_scale(&self, t: &Terms, r: f64) -> f64 {
        let a = self.params.alpha;
        let p = self.params.p;
        let q = self.params.q;
        (r * t.grad_sq).abs()
            + ((r + 1.0) * t.l2_sq).abs()
            + ((r + 1.0 + 0.5 * a) * t.moment).abs()
            + q / (8.0 * PI) * t.l2_sq * t.l2_sq
            + (q * (r + 1.0) * t.v0).abs()
            + ((p * r + 2.0) / p * t.lp).abs()
    }

    /// `||u||_2^2 + ((2 + alpha)/2) int |x|^alpha u^2 + 2 int W(u)`.
    pub fn pohozaev_uncoupled(&self, t: &Terms) -> f64 {
        t.l2_sq + 0.5 * (2.0 + self.params.alpha) * t.moment + 2.0 * t.w_int
    }
}

/// Field types that know their reference discretization.
pub trait Discretized: LogField {
    fn model(&self, params: ProblemParams) -> Model;
    fn nodal(&self) -> &[f64];
}

impl Discretized for Field2D {
    fn model(&self, params: ProblemParams) -> Model {
        Model::plane_direct(self.grid, params)
    }
    fn nodal(&self) -> &[f64] {
        &self.values
    }
}

impl Discretized for RadialField {
    fn model(&self, params: ProblemParams) -> Model {
        Model::radial(self.grid, params)
    }
    fn nodal(&self) -> &[f64] {
        &self.values
    }
}

fn value_of<F: Discretized>(u: &F, params: &ProblemParams, f: Functional) -> f64 {
    u.model(*params).energy(f, u.nodal())
}

pub fn eval_i<F: Discretized>(u: &F, params: &ProblemParams) -> f64 {
    value_of(u, params, Functional::I)
}

pub fn eval_j<F: Discretized>(u: &F, params: &ProblemParams) -> f64 {
    value_of(u, params, Functional::J)
}

pub fn eval_g<F: Discretized>(
    u: &F,
    params: &ProblemParams,
    w: Arc<dyn Nonlinearity>,
) -> Result<f64> {
    audit_nonlinearity(w.as_ref())?;
    Ok(u.model(*params)
        .with_nonlinearity(w)
        .energy(Functional::G, u.nodal()))
}

fn gradient_of<F: Discretized>(u: &F, model: &Model, f: Functional) -> Vec<f64> {
    let s = model.state(u.nodal());
    model.gradient(f, u.nodal(), &s)
}

pub fn grad_i(u: &Field2D, params: &ProblemParams) -> Field2D {
    u.with_values(gradient_of(u, &u.model(*params), Functional::I))
}

pub fn grad_j(u: &Field2D, params: &ProblemParams) -> Field2D {
    u.with_values(gradient_of(u, &u.model(*params), Functional::J))
}

pub fn grad_g(u: &Field2D, params: &ProblemParams, w: Arc<dyn Nonlinearity>) -> Result<Field2D> {
    audit_nonlinearity(w.as_ref())?;
    let model = u.model(*params).with_nonlinearity(w);
    Ok(u.with_values(gradient_of(u, &model, Functional::G)))
}

/// Nehari functional of the problem selected by `params.local_sign`.
pub fn nehari<F: Discretized>(u: &F, params: &ProblemParams) -> f64 {
    let m = u.model(*params);
    let f = m.functional();
    m.nehari(f, &m.state(u.nodal()).terms)
}

/// Pohozaev functional `P(u; r)` of the problem selected by `params.local_sign`.
pub fn pohozaev<F: Discretized>(u: &F, params: &ProblemParams, r: f64) -> f64 {
    let m = u.model(*params);
    let f = m.functional();
    m.pohozaev(f, &m.state(u.nodal()).terms, r)
}

pub fn pohozaev_uncoupled<F: Discretized>(
    u: &F,
    alpha: f64,
    w: Arc<dyn Nonlinearity>,
) -> Result<f64> {
    audit_nonlinearity(w.as_ref())?;
    let params = ProblemParams::with_w(alpha, w.growth())?;
    let m = u.model(params).with_nonlinearity(w);
    Ok(m.pohozaev_uncoupled(&m.state(u.nodal()).terms))
}

/// Everything diagnostic about one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value_i: f64,
    pub value_j: f64,
    pub value_g: Option<f64>,
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub grad_sq: f64,
    pub star_sq: f64,
    pub lp_p: f64,
    pub nehari: f64,
    pub pohozaev: BTreeMap<String, f64>,
    pub grad_x_norm: f64,
}

pub fn energy_report<F: Discretized>(
    u: &F,
    params: &ProblemParams,
    rs: &[f64],
) -> Result<EnergyReport> {
    let model = u.model(*params);
    if params.local_sign == LocalSign::GeneralW && model.nonlinearity().is_none() {
        return Err(Error::InvalidParams(
            "general W without coefficients".into(),
        ));
    }
    if let Some(w) = model.nonlinearity() {
        audit_nonlinearity(w.as_ref())?;
    }
    let c = u.coulomb()?;
    let s = model.state(u.nodal());
    let f = model.functional();
    let g = model.gradient(f, u.nodal(), &s);
    let pf = if f == Functional::G { Functional::J } else { f };
    let t = s.terms;
    let report = EnergyReport {
        value_i: model.value(Functional::I, &t),
        value_j: model.value(Functional::J, &t),
        value_g: model.nonlinearity().map(|_| model.value(Functional::G, &t)),
        v0: c.v0,
        v1: c.v1,
        v2: c.v2,
        grad_sq: t.grad_sq,
        star_sq: t.star_sq(),
        lp_p: t.lp,
        nehari: model.nehari(f, &t),
        pohozaev: rs
            .iter()
            .map(|r| (format!("{r}"), model.pohozaev(pf, &t, *r)))
            .collect(),
        grad_x_norm: model.dual_norm(&g),
    };
    Ok(report)
}

/// Both sides of `||u||_p^p <= C_GN ||u||_2^2 ||grad u||_2^(p-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub violated: bool,
}

/// Largest `||u||_p^p / (||u||_2^2 ||grad u||_2^(p-2))` over the 200-member
/// planar library, cached per `p`.
pub fn gn_constant(p: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("gn cache poisoned").get(&p.to_bits()) {
        return *c;
    }
    let grid = library_grid();
    let mesh = grid.mesh();
    let c = planar_library(LIBRARY_SEED, 200)
        .iter()
        .map(|f| {
            let u = f.sample(grid);
            let (lp, l2, gr) = (
                mesh.lp_pow(&u.values, p),
                mesh.l2_sq(&u.values),
                mesh.grad_sq(&u.values),
            );
            lp / (l2 * gr.powf(0.5 * (p - 2.0)))
        })
        .fold(0.0, f64::max);
    cache
        .lock()
        .expect("gn cache poisoned")
        .insert(p.to_bits(), c);
    c
}

pub fn gagliardo_nirenberg_check(u: &Field2D, p: f64) -> GnCheck {
    let mesh = u.grid.mesh();
    let constant = gn_constant(p);
    let lhs = mesh.lp_pow(&u.values, p);
    let rhs = constant * mesh.l2_sq(&u.values) * mesh.grad_sq(&u.values).powf(0.5 * (p - 2.0));
    GnCheck {
        lhs,
        rhs,
        constant,
        violated: lhs > rhs * (1.0 + 1e-12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::SmoothField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn random_pair(grid: Grid2D, seed: u64) -> (Field2D, Field2D) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            SmoothField::random(&mut rng).sample(grid),
            SmoothField::random(&mut rng).sample(grid),
        )
    }

    fn quartic_w() -> Arc<dyn Nonlinearity> {
        Arc::new(PowerLaw(WCoeffs {
            c1: 0.0,
            c2: 0.25,
            p: 4.0,
        }))
    }

    #[test]
    fn zero_field_is_critical_with_zero_energy() {
        let g = Grid2D::new(3.0, 16).unwrap();
        let z = Field2D::zeros(g);
        let params = ProblemParams::new(2.0, 4.0, 1.0, LocalSign::Minus).unwrap();
        assert_eq!(eval_i(&z, &params), 0.0);
        assert_eq!(eval_j(&z, &params), 0.0);
        assert_eq!(eval_g(&z, &params, quartic_w()).unwrap(), 0.0);
        assert!(grad_j(&z, &params).values.iter().all(|v| *v == 0.0));
        assert_eq!(nehari(&z, &params), 0.0);
        assert_eq!(pohozaev(&z, &params, 1.3), 0.0);
    }

    #[test]
    fn uncoupled_i_is_positive() {
        let g = Grid2D::new(4.0, 24).unwrap();
        let (u, _) = random_pair(g, 1);
        let params = ProblemParams::new(2.0, 3.0, 0.0, LocalSign::Plus).unwrap();
        assert!(eval_i(&u, &params) > 0.0);
    }

    #[test]
    fn i_minus_j_is_twice_the_power_term() {
        let g = Grid2D::new(4.0, 24).unwrap();
        for seed in 0..5 {
            let (u, _) = random_pair(g, seed);
            let params = ProblemParams::new(1.5, 3.5, 0.7, LocalSign::Plus).unwrap();
            let lp = g.mesh().lp_pow(&u.values, 3.5);
            assert!(rel(eval_i(&u, &params) - eval_j(&u, &params), 2.0 / 3.5 * lp) < 1e-12);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let g = Grid2D::new(4.0, 20).unwrap();
        let eps = 1e-4;
        let mut worst: f64 = 0.0;
        for seed in 0..6 {
            let (u, v) = random_pair(g, 100 + seed);
            let params = ProblemParams::new(2.0, 3.0, 1.3, LocalSign::Plus).unwrap();
            let model = u.model(params).with_nonlinearity(quartic_w());
            for f in [Functional::I, Functional::J, Functional::G] {
                let up: Vec<f64> = u
                    .values
                    .iter()
                    .zip(&v.values)
                    .map(|(a, b)| a + eps * b)
                    .collect();
                let um: Vec<f64> = u
                    .values
                    .iter()
                    .zip(&v.values)
                    .map(|(a, b)| a - eps * b)
                    .collect();
                let fd = (model.energy(f, &up) - model.energy(f, &um)) / (2.0 * eps);
                let s = model.state(&u.values);
                let an = model
                    .mesh()
                    .inner(&model.gradient(f, &u.values, &s), &v.values);
                worst = worst.max(rel(fd, an));
            }
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let g = Grid2D::new(4.0, 20).unwrap();
        let (u, v) = random_pair(g, 9);
        let params = ProblemParams::new(2.0, 2.5, 1.0, LocalSign::Minus).unwrap();
        let model = Model::plane(g, params).with_nonlinearity(quartic_w());
        let eps = 1e-5;
        for f in [Functional::I, Functional::J, Functional::G] {
            let up: Vec<f64> = u
                .values
                .iter()
                .zip(&v.values)
                .map(|(a, b)| a + eps * b)
                .collect();
            let um: Vec<f64> = u
                .values
                .iter()
                .zip(&v.values)
                .map(|(a, b)| a - eps * b)
                .collect();
            let gp = model.gradient(f, &up, &model.state(&up));
            let gm = model.gradient(f, &um, &model.state(&um));
            let s = model.state(&u.values);
            let hv = model.hessian_apply(f, &u.values, &s, &v.values);
            let fd: Vec<f64> = gp
                .iter()
                .zip(&gm)
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect();
            let num: f64 = fd
                .iter()
                .zip(&hv)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let den: f64 = hv.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(num / den < 1e-6, "{f:?}: {}", num / den);
        }
    }

    #[test]
    fn nehari_is_the_inner_product_with_the_gradient() {
        let g = Grid2D::new(4.0, 20).unwrap();
        let (u, _) = random_pair(g, 4);
        for sign in [LocalSign::Plus, LocalSign::Minus] {
            let params = ProblemParams::new(2.0, 4.0, 0.8, sign).unwrap();
            let m = u.model(params);
            let s = m.state(&u.values);
            let f = m.functional();
            let inner = m.mesh().inner(&m.gradient(f, &u.values, &s), &u.values);
            assert!(rel(nehari(&u, &params), inner) < 1e-10);
        }
    }

    #[test]
    fn pohozaev_is_affine_in_r_with_nehari_slope() {
        let g = Grid2D::new(4.0, 20).unwrap();
        let (u, _) = random_pair(g, 5);
        let params = ProblemParams::new(3.0, 4.0, 0.8, LocalSign::Minus).unwrap();
        let lhs = pohozaev(&u, &params, 2.0) - pohozaev(&u, &params, -0.5);
        assert!(rel(lhs, 2.5 * nehari(&u, &params)) < 1e-10);
    }

    #[test]
    fn pohozaev_is_the_dilation_derivative() {
        // dJ(t^r u(./t))/dt at t = 1 by finite differences on a fine grid
        let g = Grid2D::new(8.0, 128).unwrap();
        let u = Field2D::from_fn(g, |x, y| (1.0 + 0.3 * x) * (-(x * x + y * y) / 2.0).exp());
        let params = ProblemParams::new(2.0, 4.0, 1.0, LocalSign::Minus).unwrap();
        let r = 1.0;
        let dt = 1e-3;
        let jt = |t: f64| {
            eval_j(
                &crate::fields::resample_dilate(&u, t, r).unwrap().field,
                &params,
            )
        };
        let fd = (jt(1.0 + dt) - jt(1.0 - dt)) / (2.0 * dt);
        let p = pohozaev(&u, &params, r);
        assert!(rel(fd, p) < 1e-2, "{fd} {p}");
    }

    #[test]
    fn uncoupled_pohozaev_of_gaussian() {
        let g = Grid2D::new(8.0, 128).unwrap();
        let u = Field2D::from_fn(g, |x, y| (-(x * x + y * y) / 2.0).exp());
        let zero_w: Arc<dyn Nonlinearity> = Arc::new(PowerLaw(WCoeffs {
            c1: 0.0,
            c2: 0.0,
            p: 4.0,
        }));
        let v = pohozaev_uncoupled(&u, 2.0, zero_w).unwrap();
        assert!(rel(v, 3.0 * PI) < 1e-3);
        assert!(pohozaev_uncoupled(&u.scaled(0.01), 2.0, quartic_w()).unwrap() > 0.0);
    }

    #[test]
    fn audit_rejects_bad_nonlinearities() {
        #[derive(Debug)]
        struct Negative;
        impl Nonlinearity for Negative {
            fn value(&self, s: f64) -> f64 {
                -s * s
            }
            fn derivative(&self, s: f64) -> f64 {
                -2.0 * s
            }
            fn growth(&self) -> WCoeffs {
                WCoeffs {
                    c1: 1.0,
                    c2: 0.0,
                    p: 4.0,
                }
            }
        }
        #[derive(Debug)]
        struct WrongDerivative;
        impl Nonlinearity for WrongDerivative {
            fn value(&self, s: f64) -> f64 {
                s * s
            }
            fn derivative(&self, s: f64) -> f64 {
                s
            }
            fn growth(&self) -> WCoeffs {
                WCoeffs {
                    c1: 1.0,
                    c2: 0.0,
                    p: 4.0,
                }
            }
        }
        assert!(audit_nonlinearity(&Negative).is_err());
        assert!(audit_nonlinearity(&WrongDerivative).is_err());
        assert!(audit_nonlinearity(&PowerLaw(WCoeffs {
            c1: 0.5,
            c2: 0.25,
            p: 3.0
        }))
        .is_ok());
    }

    #[test]
    fn gagliardo_nirenberg_on_gaussian() {
        let g = Grid2D::new(12.0, 384).unwrap();
        let u = Field2D::from_fn(g, |x, y| (-(x * x + y * y) / 2.0).exp());
        let c = gagliardo_nirenberg_check(&u, 4.0);
        assert!(rel(c.lhs / (c.rhs / c.constant), 1.0 / (2.0 * PI)) < 2e-3);
        assert!(!c.violated);
        let z = gagliardo_nirenberg_check(&Field2D::zeros(g), 4.0);
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        let wide = crate::fields::resample_dilate(&u, 2.0, 0.0).unwrap().field;
        let cw = gagliardo_nirenberg_check(&wide, 4.0);
        assert!(rel(cw.lhs / cw.rhs, c.lhs / c.rhs) < 1e-3);
    }

    #[test]
    fn report_is_consistent_and_serializes() {
        let g = Grid2D::new(4.0, 20).unwrap();
        let (u, _) = random_pair(g, 8);
        let params = ProblemParams::new(2.0, 4.0, 1.0, LocalSign::Minus).unwrap();
        let r = energy_report(&u, &params, &[0.0, 1.0]).unwrap();
        assert!(rel(r.value_i - r.value_j, 0.5 * r.lp_p) < 1e-12);
        let json = serde_json::to_string(&r).unwrap();
        let back: EnergyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
