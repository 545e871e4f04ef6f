use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{lbfgs, newton, relative_stop, Descent, Metric, Problem};
use super::{Classification, GridSpec, Solution, SolveOptions, SolveOutcome};
use crate::energy::{Functional, Model};
use crate::error::{Error, Result};
use crate::fields::{LocalSign, ProblemParams, RadialField, RadialGrid};
use crate::inequalities::nonexistence_beta;
use crate::library::radial_library;
use crate::logkernel::radial_potential_at;
use crate::quad::integrate_half_line;

/// Trial dilations used by default.
pub const DEFAULT_FAMILY_SIZE: usize = 80;

/// Family used to seed the radial minimizer; widths up to `2^63`.
const SEED_FAMILY_SIZE: usize = 256;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// The dilations `t_k = 2^((k - 4)/4)`, `k < size`. Families are nested.
pub fn gaussian_family(size: usize) -> Vec<f64> {
    (0..size)
        .map(|k| 2f64.powf((k as f64 - 4.0) / 4.0))
        .collect()
}

/// `c g(x/t)` with `g = exp(-|x|^2/2)` and the amplitude that minimizes `I`
/// along `c` for this `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTrial {
    pub t: f64,
    pub amplitude: f64,
    pub value: f64,
}

/// Terms of the unit Gaussian; `V0` is closed-form, the rest by quadrature.
struct GaussianTerms {
    grad: f64,
    l2: f64,
    moment: f64,
    lp: f64,
    v0: f64,
}

impl GaussianTerms {
    fn new(alpha: f64, p: f64) -> Self {
        let radial =
            |f: &dyn Fn(f64) -> f64| 2.0 * PI * integrate_half_line(|r| f(r) * r, 1, 1e-12).value;
        Self {
            grad: radial(&|r| r * r * (-r * r).exp()),
            l2: radial(&|r| (-r * r).exp()),
            moment: radial(&|r| r.powf(alpha) * (-r * r).exp()),
            lp: radial(&|r| (-0.5 * p * r * r).exp()),
            // |x - y|^2 / 2 is exponential for two independent copies of the
            // normalized density, so V0 = (pi/4)(log 2 - gamma).
            v0: 0.25 * PI * (LN_2 - EULER_GAMMA),
        }
    }

    /// Best amplitude and value of `I(c g(./t))` for `p > 4`.
    fn trial(&self, alpha: f64, p: f64, q: f64, t: f64) -> GaussianTrial {
        let a = self.grad + t * t * self.l2 + t.powf(2.0 + alpha) * self.moment;
        let b = t.powi(4) * (self.v0 + t.ln() / (2.0 * PI) * self.l2 * self.l2);
        let d = t * t * self.lp;
        if !(q * b > 0.0) {
            return GaussianTrial {
                t,
                amplitude: 0.0,
                value: 0.0,
            };
        }
        // minimize a/2 - (q b/4) s + (d/p) s^((p - 2)/2) over s = c^2
        let s = (q * b * p / (2.0 * d * (p - 2.0))).powf(2.0 / (p - 4.0));
        let value = s * (0.5 * a - 0.25 * q * b * s + d / p * s.powf(0.5 * (p - 2.0)));
        if value < 0.0 {
            GaussianTrial {
                t,
                amplitude: s.sqrt(),
                value,
            }
        } else {
            GaussianTrial {
                t,
                amplitude: 0.0,
                value: 0.0,
            }
        }
    }
}

fn check_existence_range(params: &ProblemParams) -> Result<()> {
    if !(params.p > 4.0) {
        return Err(Error::InvalidParams(format!(
            "radial minimization needs p > 4, got {}",
            params.p
        )));
    }
    let border = nonexistence_beta(params.p);
    if !(params.alpha > border) {
        return Err(Error::InvalidParams(format!(
            "radial minimization needs alpha > {border}, got {}",
            params.alpha
        )));
    }
    Ok(())
}

/// Lowest trial of the family at coupling `q`.
pub fn best_trial(params: &ProblemParams, q: f64, family_size: usize) -> Option<GaussianTrial> {
    let g = GaussianTerms::new(params.alpha, params.p);
    best_of(&g, params, q, family_size)
}

fn best_of(
    g: &GaussianTerms,
    params: &ProblemParams,
    q: f64,
    family_size: usize,
) -> Option<GaussianTrial> {
    gaussian_family(family_size)
        .into_iter()
        .map(|t| g.trial(params.alpha, params.p, q, t))
        .filter(|tr| tr.value < 0.0)
        .min_by(|a, b| a.value.total_cmp(&b.value))
}

/// Upper bound for the existence coupling: the smallest `q` at which some
/// trial Gaussian has negative energy, located on `2^j q0` and refined by
/// bisection to 1%. Returns `+inf` when no `q <= 2^64 q0` works.
pub fn find_q_tilde(params: &ProblemParams, family_size: usize) -> Result<f64> {
    check_existence_range(params)?;
    let g = GaussianTerms::new(params.alpha, params.p);
    let works = |q: f64| best_of(&g, params, q, family_size).is_some();
    let q0 = 1e-3;
    let Some(j) = (0..=64).find(|&j| works(q0 * 2f64.powi(j))) else {
        return Ok(f64::INFINITY);
    };
    let mut hi = q0 * 2f64.powi(j);
    let mut lo = if j == 0 { 0.0 } else { 0.5 * hi };
    while hi - lo > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        if works(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Planar and radial bookkeeping common to every radial outcome.
fn radial_outcome(
    model: &Model,
    grid: RadialGrid,
    d: &Descent,
    notes: Vec<String>,
) -> SolveOutcome {
    let s = model.state(&d.u);
    let t = s.terms;
    let xn = t.x_norm_sq().sqrt();
    let l2 = t.l2_sq.sqrt();
    let f = Functional::I;
    let trivial = !(d.value < 0.0 && l2 >= 1e-3 && d.converged);
    SolveOutcome {
        classification: if trivial {
            Classification::TrivialCollapse
        } else {
            Classification::NegativeLevelMinimizer
        },
        solution: Some(Solution::Radial(RadialField {
            grid,
            values: d.u.clone(),
        })),
        grid: Some(GridSpec::Radial(grid)),
        level: d.value,
        multiplier_lambda: None,
        q_effective: model.params().q,
        residual_grad: d.grad_dual / xn.max(1.0),
        residual_grad_abs: d.grad_dual,
        residual_nehari: model.nehari(f, &t).abs() / xn.powi(2).max(1.0),
        residual_pohozaev: model.pohozaev(f, &t, 0.0).abs()
            / model.pohozaev_scale(&t, 0.0).max(f64::MIN_POSITIVE),
        x_norm: xn,
        l2_norm: l2,
        iterations: d.iterations,
        converged: d.converged,
        notes,
    }
}

/// Cells where `u` vanishes but `1 + |x|^alpha - q phi < 0` are saddles of
/// the local energy; descent leaves them at a geometric rate from roundoff,
/// which stalls the free boundary of a large-scale profile. Sets such cells to
/// the local minimizer `(q phi - 1 - |x|^alpha)^(1/(p-2))`, keeping the result
/// only if `I` decreases.
fn fill_free_boundary(model: &Model, u: &[f64], value: f64) -> Option<Vec<f64>> {
    let p = model.params().p;
    let q = model.params().q;
    let phi = model.potential(u);
    let conf = model.confining();
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut filled = u.to_vec();
    let mut changed = false;
    for k in 0..u.len() {
        let c = conf[k] - q * phi[k];
        let local = (-c).max(0.0).powf(1.0 / (p - 2.0));
        if c < 0.0 && u[k].abs() < 1e-3 * local && local > 1e-8 * scale {
            filled[k] = local;
            changed = true;
        }
    }
    (changed && model.energy(Functional::I, &filled) < value).then_some(filled)
}

/// L-BFGS followed by Newton-CG polishing. Since `I(|u|) <= I(u)`, the
/// iterate is folded to `|u|` between phases; otherwise sign flips, which
/// cost almost nothing in gradient energy at large scales, trap the descent.
fn descend(model: &Model, u0: Vec<f64>, opts: &SolveOptions) -> Descent {
    let pb = Problem::new(model, Functional::I).with_metric(Metric::Local);
    let stop = relative_stop(opts.tol_grad);
    let coarse = relative_stop(opts.tol_grad.max(1e-4));
    let fold = |u: Vec<f64>| u.into_iter().map(f64::abs).collect::<Vec<_>>();
    let mut its = 0;
    let mut u = fold(u0);
    for _ in 0..64 {
        let d = lbfgs(&pb, u, opts.max_iter, &coarse);
        its += d.iterations;
        u = fold(d.u);
        match fill_free_boundary(model, &u, d.value) {
            Some(v) => u = v,
            None => break,
        }
    }
    let mut d = newton(&pb, u, 50, true, &stop);
    d.iterations += its;
    if !d.converged {
        let more = lbfgs(&pb, fold(d.u.clone()), opts.max_iter, &stop);
        let its = d.iterations + more.iterations;
        d = Descent {
            iterations: its,
            ..more
        };
    }
    d
}

/// Fraction of the L2 mass beyond `0.8 R`.
fn tail_fraction(grid: RadialGrid, u: &[f64]) -> f64 {
    let mesh = grid.mesh();
    let w = crate::fields::Mesh::weights(&mesh);
    let cut = 0.8 * grid.radius();
    let (mut tail, mut total) = (0.0, 0.0);
    for (i, v) in u.iter().enumerate() {
        let m = w[i] * v * v;
        total += m;
        if grid.node(i) > cut {
            tail += m;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// Minimizes `I` over radial fields, seeded with the lowest trial Gaussian.
///
/// The radius is `opts.radial_r` if positive, otherwise eight trial widths;
/// it is doubled (up to three times) while more than `1e-12` of the mass sits
/// in the outer fifth of the grid.
pub fn minimize_i_radial(params: &ProblemParams, opts: &SolveOptions) -> Result<SolveOutcome> {
    params.validate()?;
    check_existence_range(params)?;
    let params = ProblemParams {
        local_sign: LocalSign::Plus,
        ..*params
    };
    let trial = best_trial(&params, params.q, SEED_FAMILY_SIZE);
    let (c, t) = trial.map_or((1.0, 1.0), |tr| (tr.amplitude, tr.t));
    let mut radius = if opts.radial_r > 0.0 {
        opts.radial_r
    } else {
        8.0 * t
    };
    let mut notes = Vec::new();
    if trial.is_none() {
        notes.push(
            "no trial Gaussian has negative energy; seeded with the unit Gaussian".to_string(),
        );
    }
    let mut u0: Option<RadialField> = None;
    for attempt in 0..4 {
        let grid = RadialGrid::new(radius, opts.radial_m)?;
        let seed = match &u0 {
            Some(prev) => RadialField::from_fn(grid, |r| prev.sample(r)),
            None => RadialField::from_fn(grid, |r| c * (-0.5 * (r / t).powi(2)).exp()),
        };
        let model = Model::radial(grid, params);
        let d = descend(&model, seed.values, opts);
        let tail = tail_fraction(grid, &d.u);
        if tail > 1e-12 && attempt < 3 && opts.radial_r <= 0.0 {
            notes.push(format!(
                "radius {radius:.4e} doubled (outer mass fraction {tail:.2e})"
            ));
            u0 = Some(RadialField { grid, values: d.u });
            radius *= 2.0;
            continue;
        }
        return Ok(radial_outcome(&model, grid, &d, notes));
    }
    unreachable!("loop returns on its last attempt")
}

/// Strong-form residual `-Lap_h u + (1 + r^alpha) u - q phi u + |u|^(p-2) u`
/// of a radial field, in L2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    /// With `phi` from the cellwise-exact convolution of `u^2` at each node.
    pub l2: f64,
    /// With the solver's own potential operator.
    pub l2_solver_potential: f64,
    pub x_norm: f64,
    /// Largest L2 norm among the terms of the equation.
    pub term_scale: f64,
}

impl PdeResidual {
    /// `l2 / ||u||`.
    pub fn relative(&self) -> f64 {
        self.l2 / self.x_norm.max(f64::MIN_POSITIVE)
    }
}

pub fn pde_residual_radial(params: &ProblemParams, u: &RadialField) -> PdeResidual {
    let params = ProblemParams {
        local_sign: LocalSign::Plus,
        ..*params
    };
    let model = Model::radial(u.grid, params);
    let mesh = model.mesh();
    let (p, q) = (params.p, params.q);
    let lap = mesh.neg_laplacian(&u.values);
    let conf = model.confining();
    let phi_exact: Vec<f64> = (0..u.values.len())
        .map(|i| radial_potential_at(u, u.grid.node(i)))
        .collect();
    let phi_solver = model.potential(&u.values);
    let norm = |v: &[f64]| mesh.inner(v, v).max(0.0).sqrt();
    let residual = |phi: &[f64]| -> Vec<f64> {
        (0..u.values.len())
            .map(|k| {
                let v = u.values[k];
                lap[k] + conf[k] * v - q * phi[k] * v + v.abs().powf(p - 2.0) * v
            })
            .collect()
    };
    let coupling: Vec<f64> = phi_exact
        .iter()
        .zip(&u.values)
        .map(|(f, v)| q * f * v)
        .collect();
    let local: Vec<f64> = u.values.iter().map(|v| v.abs().powf(p - 1.0)).collect();
    let confined: Vec<f64> = u.values.iter().zip(conf).map(|(v, c)| c * v).collect();
    let t = model.state(&u.values).terms;
    PdeResidual {
        l2: norm(&residual(&phi_exact)),
        l2_solver_potential: norm(&residual(&phi_solver)),
        x_norm: t.x_norm_sq().sqrt(),
        term_scale: norm(&lap)
            .max(norm(&coupling))
            .max(norm(&local))
            .max(norm(&confined)),
    }
}

/// Descents of `I` from `count` random radial library fields with random
/// amplitudes in `[0.5, 4]`, run concurrently and returned in seed order.
pub fn radial_multistart(
    params: &ProblemParams,
    count: usize,
    opts: &SolveOptions,
) -> Result<Vec<SolveOutcome>> {
    params.validate()?;
    let params = ProblemParams {
        local_sign: LocalSign::Plus,
        ..*params
    };
    let radius = if opts.radial_r > 0.0 {
        opts.radial_r
    } else {
        8.0
    };
    let grid = RadialGrid::new(radius, opts.radial_m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let amps: Vec<f64> = (0..count).map(|_| rng.gen_range(0.5..4.0)).collect();
    let seeds = radial_library(opts.seed, count);
    let model = Model::radial(grid, params);
    Ok((0..count)
        .into_par_iter()
        .map(|k| {
            let u0 = seeds[k].sample(grid).scaled(amps[k]);
            let d = descend(&model, u0.values, opts);
            radial_outcome(&model, grid, &d, vec![format!("multistart {k}")])
        })
        .collect())
}
