use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{axpy, newton, relative_stop, sub, Problem};
use super::{Classification, GridSpec, Solution, SolveOptions, SolveOutcome};
use crate::energy::{Functional, Model};
use crate::error::{Error, Result};
use crate::fields::{resample_dilate, Field2D, Grid2D, LocalSign, ProblemParams};
use crate::inequalities::mp_floor;
use crate::symmetry::{project, SymmetryClass};

/// A discrete path from `0` to an endpoint of negative energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MountainPassState {
    #[serde(skip)]
    pub path: Vec<Field2D>,
    pub endpoint_t: f64,
    pub r_pow: f64,
    /// Maximum of `J` along the path after each sweep.
    pub level_history: Vec<f64>,
}

/// `Re((x + i y)^k) exp(-|x|^2 / 2 s^2)`, which lies in the dihedral class
/// of order `k`.
pub fn dihedral_seed(grid: Grid2D, k: u32, width: f64) -> Field2D {
    let f = Field2D::from_fn(grid, |x, y| {
        let (r, th) = (x.hypot(y), y.atan2(x));
        r.powi(k as i32) * (k as f64 * th).cos() * (-(x * x + y * y) / (2.0 * width * width)).exp()
    });
    project(&f, SymmetryClass::Dihedral(k))
}

struct Path<'a> {
    model: &'a Model,
    class: SymmetryClass,
    grid: Grid2D,
    nodes: Vec<Vec<f64>>,
}

impl<'a> Path<'a> {
    /// The segment from `0` to `end` with `points` intervals.
    fn straight(model: &'a Model, class: SymmetryClass, end: &Field2D, points: usize) -> Self {
        let nodes = (0..=points)
            .map(|i| {
                end.values
                    .iter()
                    .map(|v| v * i as f64 / points as f64)
                    .collect()
            })
            .collect();
        Path {
            model,
            class,
            grid: end.grid,
            nodes,
        }
    }

    /// Index of the highest node.
    fn highest(&self) -> usize {
        self.energies()
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |a, (i, e)| if e.0 > a.1 { (i, e.0) } else { a },
            )
            .0
    }

    fn project(&self, v: Vec<f64>) -> Vec<f64> {
        project(
            &Field2D {
                grid: self.grid,
                values: v,
                symmetry_tag: self.class.tag(),
            },
            self.class,
        )
        .values
    }

    fn energies(&self) -> Vec<(f64, Vec<f64>)> {
        let last = self.nodes.len() - 1;
        self.nodes
            .par_iter()
            .enumerate()
            .map(|(i, u)| {
                if i == 0 {
                    return (0.0, vec![0.0; u.len()]);
                }
                let s = self.model.state(u);
                let val = self.model.value(Functional::J, &s.terms);
                if i == last {
                    return (val, vec![0.0; u.len()]);
                }
                (val, self.model.gradient(Functional::J, u, &s))
            })
            .collect()
    }

    fn x_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = sub(a, b);
        self.model.x_inner(&d, &d).max(0.0).sqrt()
    }

    /// Redistributes nodes strictly between `lo` and `hi` to equal X-arc length.
    fn reparametrize(&mut self, lo: usize, hi: usize) {
        if hi <= lo + 1 {
            return;
        }
        let mut cum = vec![0.0];
        for i in lo..hi {
            let d = self.x_dist(&self.nodes[i + 1], &self.nodes[i]);
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();
        if !(total > 0.0) {
            return;
        }
        let old: Vec<Vec<f64>> = self.nodes[lo..=hi].to_vec();
        for j in 1..(hi - lo) {
            let target = total * j as f64 / (hi - lo) as f64;
            let seg = cum.partition_point(|&c| c < target).clamp(1, old.len() - 1);
            let w = (target - cum[seg - 1]) / (cum[seg] - cum[seg - 1]).max(f64::MIN_POSITIVE);
            let v: Vec<f64> = old[seg - 1]
                .iter()
                .zip(&old[seg])
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect();
            self.nodes[lo + j] = v;
        }
    }
}

/// Endpoint `w_t = t^r w(./t)` with `t` raised by `2^(1/4)` until
/// `J(w_t) < 0` and `||w_t|| > rho`.
fn endpoint(
    model: &Model,
    seed: &Field2D,
    r_pow: f64,
    rho: f64,
    class: SymmetryClass,
) -> Result<(f64, Field2D)> {
    let mut t = 1.0;
    for _ in 0..48 {
        let d = resample_dilate(seed, t, r_pow)?;
        let w = project(&d.field, class);
        let s = model.state(&w.values);
        let val = model.value(Functional::J, &s.terms);
        if val < 0.0 && s.terms.x_norm_sq().sqrt() > rho {
            if d.truncated() {
                return Err(Error::InvalidGrid(format!(
                    "endpoint at t = {t} loses {:.2}% of its mass outside the box",
                    100.0 * d.truncation_loss
                )));
            }
            return Ok((t, w));
        }
        t *= 2f64.powf(0.25);
    }
    Err(Error::Degenerate(
        "no endpoint with negative energy found".into(),
    ))
}

/// Numerical mountain pass for `J` in the dihedral class of order `k`:
/// a climbing string between `0` and `w_t`, polished by Newton-MINRES.
pub fn mountain_pass(
    params: &ProblemParams,
    k: u32,
    path_points: usize,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    Ok(mountain_pass_with_state(params, k, path_points, opts)?.0)
}

pub fn mountain_pass_with_state(
    params: &ProblemParams,
    k: u32,
    path_points: usize,
    opts: &SolveOptions,
) -> Result<(SolveOutcome, MountainPassState)> {
    params.validate()?;
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParams(format!(
            "dihedral order must be 1, 2 or 3, got {k}"
        )));
    }
    let params = ProblemParams {
        local_sign: LocalSign::Minus,
        ..*params
    };
    let class = SymmetryClass::Dihedral(k);
    let grid = Grid2D::new(opts.grid_l, opts.grid_n)?;
    let model = Model::plane(grid, params);
    let r_pow = 2f64.max(0.5 * params.alpha);
    let floor = mp_floor(params.alpha, params.p, params.q);
    let seed = dihedral_seed(grid, k, 0.6);
    let (t_end, end) = endpoint(&model, &seed, r_pow, floor.rho, class)?;

    let mut notes = Vec::new();
    if (3.0..4.0).contains(&params.p) {
        notes.push("outside guarantee: 3 <= p < 4".to_string());
    }
    let mut points = path_points.max(4);
    let proj = |v: &[f64]| {
        project(
            &Field2D {
                grid,
                values: v.to_vec(),
                symmetry_tag: class.tag(),
            },
            class,
        )
        .values
    };
    let pb = Problem::new(&model, Functional::J).with_projector(&proj);
    let stop = relative_stop(opts.tol_grad);
    let budget = opts.max_iter.min(4000);
    for restart in 0..=3 {
        let mut path = Path::straight(&model, class, &end, points);
        let mut history = Vec::new();
        let mut sweeps = 0;
        let mut target = 1e-2f64.max(opts.tol_grad);
        let mut polished = None;
        let mut collapsed = false;
        // climb to a loose tolerance, hand over to Newton-MINRES, and climb
        // further on rejection
        loop {
            match climb(&mut path, target, budget - sweeps, &mut history) {
                Ok(n) => sweeps += n,
                Err(Error::PathCollapse { .. }) => {
                    collapsed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            let u = path.nodes[path.highest()].clone();
            let d = newton(&pb, u, 60, false, &stop);
            let xn = model.x_inner(&d.u, &d.u).max(0.0).sqrt();
            if d.converged && xn > 0.5 * floor.rho && d.value > 0.0 {
                polished = Some(d);
                break;
            }
            if sweeps >= budget || target <= opts.tol_grad {
                break;
            }
            target = (0.1 * target).max(opts.tol_grad);
        }
        if collapsed {
            points *= 2;
            continue;
        }
        let d = match polished {
            Some(d) => d,
            None => {
                notes
                    .push("Newton polish rejected; reporting the climbing-string node".to_string());
                if !class.lattice_exact() {
                    notes.push(
                        "class is realized by interpolated rotations; the projected gradient has an interpolation floor"
                            .to_string(),
                    );
                }
                let u = path.nodes[path.highest()].clone();
                let (_, val, g) = pb.eval(&u);
                let gd = pb.dual_norm(&g);
                let ok = stop(&pb, &u, gd);
                super::optim::Descent {
                    u,
                    value: val,
                    grad_dual: gd,
                    iterations: 0,
                    converged: ok,
                }
            }
        };
        let t = model.state(&d.u).terms;
        let xn = t.x_norm_sq().sqrt();
        if d.value < floor.floor {
            notes.push(format!(
                "anomaly: level {:.6e} below the geometric floor {:.6e}",
                d.value, floor.floor
            ));
        }
        notes.push(format!(
            "mp_floor={:.6e} rho={:.6e}",
            floor.floor, floor.rho
        ));
        if restart > 0 {
            notes.push(format!("{restart} restart(s) after path collapse"));
        }
        let outcome = SolveOutcome {
            classification: Classification::MountainPassSolution,
            solution: Some(Solution::Plane(Field2D {
                grid,
                values: d.u.clone(),
                symmetry_tag: class.tag(),
            })),
            grid: Some(GridSpec::Plane(grid)),
            level: d.value,
            multiplier_lambda: None,
            q_effective: params.q,
            residual_grad: d.grad_dual / xn.max(1.0),
            residual_grad_abs: d.grad_dual,
            residual_nehari: model.nehari(Functional::J, &t).abs() / (xn * xn).max(1.0),
            residual_pohozaev: model.pohozaev(Functional::J, &t, 0.0).abs()
                / model.pohozaev_scale(&t, 0.0).max(f64::MIN_POSITIVE),
            x_norm: xn,
            l2_norm: t.l2_sq.sqrt(),
            iterations: sweeps + d.iterations,
            converged: d.converged,
            notes,
        };
        let state = MountainPassState {
            path: path
                .nodes
                .into_iter()
                .map(|v| Field2D {
                    grid,
                    values: v,
                    symmetry_tag: class.tag(),
                })
                .collect(),
            endpoint_t: t_end,
            r_pow,
            level_history: history,
        };
        return Ok((outcome, state));
    }
    Err(Error::PathCollapse { restarts: 3 })
}

/// Climbing-image string: interior nodes descend along the preconditioned
/// gradient, the highest node climbs along the path tangent, and the two
/// halves are re-tensioned to equal X-arc length after every sweep. Runs until
/// the highest node's relative gradient is below `target` or `budget` sweeps
/// are spent; returns the sweeps used.
fn climb(path: &mut Path, target: f64, budget: usize, history: &mut Vec<f64>) -> Result<usize> {
    let model = path.model;
    let n = path.nodes.len() - 1;
    let tau = 0.4;
    let mut it = 0;
    loop {
        let eg = path.energies();
        let (imax, vmax) = eg
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.0))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        history.push(vmax);
        if imax == 0 || imax == n {
            return Err(Error::PathCollapse { restarts: 0 });
        }
        let g_max = &eg[imax].1;
        let gr = path.project(model.riesz(g_max));
        let gd = model.mesh().inner(g_max, &gr).max(0.0).sqrt();
        let xn = model
            .x_inner(&path.nodes[imax], &path.nodes[imax])
            .max(0.0)
            .sqrt();
        if gd <= target * xn.max(1.0) || it >= budget {
            return Ok(it);
        }
        it += 1;
        let tangent = sub(&path.nodes[imax + 1], &path.nodes[imax - 1]);
        let tn = model
            .x_inner(&tangent, &tangent)
            .max(f64::MIN_POSITIVE)
            .sqrt();
        let updates: Vec<(usize, Vec<f64>)> = (1..n)
            .into_par_iter()
            .map(|i| {
                let mut dir = path.project(model.riesz(&eg[i].1));
                if i == imax {
                    // reverse the component along the path
                    let c = model.mesh().inner(&eg[i].1, &tangent) / (tn * tn);
                    axpy(-2.0 * c, &tangent, &mut dir);
                }
                let xi = model
                    .x_inner(&path.nodes[i], &path.nodes[i])
                    .max(0.0)
                    .sqrt();
                let dn = model.x_inner(&dir, &dir).max(0.0).sqrt();
                let cap = 0.2 * xi.max(1e-3);
                let step = if tau * dn > cap { cap / dn } else { tau };
                let mut v = path.nodes[i].clone();
                axpy(-step, &dir, &mut v);
                (i, v)
            })
            .collect();
        for (i, v) in updates {
            path.nodes[i] = path.project(v);
        }
        path.reparametrize(0, imax);
        path.reparametrize(imax, n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::symmetry_defect;

    #[test]
    fn seeds_lie_in_their_class() {
        let grid = Grid2D::new(6.0, 48).unwrap();
        for k in [1, 2] {
            let s = dihedral_seed(grid, k, 0.6);
            assert!(symmetry_defect(&s, SymmetryClass::Dihedral(k)) < 1e-14);
        }
    }
}
