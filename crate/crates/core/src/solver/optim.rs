//! Iterative kernels shared by the solvers: preconditioned L-BFGS, PCG and
//! MINRES, all in the quadrature inner product of a mesh with the X metric
//! `A = -Lap_h + 1 + |x|^alpha` as preconditioner.

use std::collections::VecDeque;

use crate::energy::{Functional, Model, State};

pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn scaled(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

pub(crate) fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Symmetry projector applied to iterates and search directions.
pub(crate) type Projector<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

/// Preconditioner of the descent and Krylov iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Metric {
    /// `A = -Lap_h + 1 + |x|^alpha`.
    X,
    /// `-Lap_h` plus the local part of the Hessian of `I`, floored at a
    /// fraction of the confining weight. Tracks the iterate, which matters
    /// when `|u|^(p-2)` dwarfs `1 + |x|^alpha`.
    Local,
}

/// A functional of a [`Model`] restricted to an invariant subspace.
pub(crate) struct Problem<'a> {
    pub model: &'a Model,
    pub functional: Functional,
    pub project: Option<Projector<'a>>,
    pub metric: Metric,
}

impl<'a> Problem<'a> {
    pub fn new(model: &'a Model, functional: Functional) -> Self {
        Self {
            model,
            functional,
            project: None,
            metric: Metric::X,
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    /// Preconditioner at `(u, s)`.
    pub fn precondition_at(&self, u: &[f64], s: &State, g: &[f64]) -> Vec<f64> {
        match self.metric {
            Metric::X => self.precondition(g),
            Metric::Local => {
                let p = self.model.params().p;
                let q = self.model.params().q;
                let conf = self.model.confining();
                let sign = self.functional.lp_sign();
                let shift: Vec<f64> = (0..u.len())
                    .map(|k| {
                        let c =
                            conf[k] - q * s.phi[k] + sign * (p - 1.0) * u[k].abs().powf(p - 2.0);
                        c.max(0.05 * conf[k])
                    })
                    .collect();
                self.proj(self.model.mesh().solve_shifted(&shift, g))
            }
        }
    }

    pub fn with_projector(mut self, p: Projector<'a>) -> Self {
        self.project = Some(p);
        self
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.model.mesh().inner(a, b)
    }

    pub fn proj(&self, v: Vec<f64>) -> Vec<f64> {
        match self.project {
            Some(p) => p(&v),
            None => v,
        }
    }

    pub fn precondition(&self, g: &[f64]) -> Vec<f64> {
        self.proj(self.model.riesz(g))
    }

    pub fn eval(&self, u: &[f64]) -> (State, f64, Vec<f64>) {
        let s = self.model.state(u);
        let f = self.model.value(self.functional, &s.terms);
        let g = self.proj(self.model.gradient(self.functional, u, &s));
        (s, f, g)
    }

    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        self.inner(g, &self.model.riesz(g)).max(0.0).sqrt()
    }

    pub fn hessian(&self, u: &[f64], s: &State, v: &[f64]) -> Vec<f64> {
        self.proj(self.model.hessian_apply(self.functional, u, s, v))
    }
}

/// Outcome of a local iteration.
#[derive(Debug, Clone)]
pub(crate) struct Descent {
    pub u: Vec<f64>,
    pub value: f64,
    pub grad_dual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Stopping rule: `||grad||_* <= tol * max(1, ||u||)`.
pub(crate) fn relative_stop(tol: f64) -> impl Fn(&Problem, &[f64], f64) -> bool {
    move |pb: &Problem, u: &[f64], gd: f64| {
        gd <= tol * pb.model.x_inner(u, u).max(0.0).sqrt().max(1.0)
    }
}

/// L-BFGS with `A^{-1}` as initial inverse Hessian and Armijo backtracking.
pub(crate) fn lbfgs(
    pb: &Problem,
    u0: Vec<f64>,
    max_iter: usize,
    stop: &dyn Fn(&Problem, &[f64], f64) -> bool,
) -> Descent {
    let memory = 8;
    let mut u = pb.proj(u0);
    let (mut st, mut f, mut g) = pb.eval(&u);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut it = 0;
    loop {
        let gd = pb.dual_norm(&g);
        if stop(pb, &u, gd) {
            return Descent {
                u,
                value: f,
                grad_dual: gd,
                iterations: it,
                converged: true,
            };
        }
        if it >= max_iter || !f.is_finite() {
            return Descent {
                u,
                value: f,
                grad_dual: gd,
                iterations: it,
                converged: false,
            };
        }
        it += 1;
        let h0 = |q: &[f64]| pb.precondition_at(&u, &st, q);
        let mut d = two_loop(pb, &g, &hist, &h0);
        let mut slope = pb.inner(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = scaled(-1.0, &h0(&g));
            slope = pb.inner(&g, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = u.clone();
            axpy(step, &d, &mut trial);
            let trial = pb.proj(trial);
            let (sn, ft, gt) = pb.eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, sn, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((un, snew, fnew, gnew)) = accepted else {
            // no decrease along a descent direction: at the resolution floor
            let gd = pb.dual_norm(&g);
            let converged = stop(pb, &u, gd);
            return Descent {
                u,
                value: f,
                grad_dual: gd,
                iterations: it,
                converged,
            };
        };
        let s = sub(&un, &u);
        let y = sub(&gnew, &g);
        let sy = pb.inner(&s, &y);
        if sy > 1e-14 * pb.inner(&y, &y).sqrt() * pb.inner(&s, &s).sqrt() {
            if hist.len() == memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        u = un;
        st = snew;
        f = fnew;
        g = gnew;
    }
}

fn two_loop(
    pb: &Problem,
    g: &[f64],
    hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    h0: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * pb.inner(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    let mut r = h0(&q);
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * pb.inner(y, &r);
        axpy(a - b, s, &mut r);
    }
    scaled(-1.0, &r)
}

/// Preconditioned CG for `H x = b`; stops early on negative curvature and
/// returns the iterate built so far.
pub(crate) fn pcg(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    inner: &dyn Fn(&[f64], &[f64]) -> f64,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> (Vec<f64>, bool) {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = inner(&r, &z);
    let target = rtol * rtol * rz;
    for _ in 0..max_iter {
        if rz <= target {
            return (x, true);
        }
        let hp = apply(&p);
        let curv = inner(&p, &hp);
        if curv <= 0.0 {
            if x.iter().all(|v| *v == 0.0) {
                x = z.clone();
            }
            return (x, false);
        }
        let a = rz / curv;
        axpy(a, &p, &mut x);
        axpy(-a, &hp, &mut r);
        z = precond(&r);
        let rz_new = inner(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    (x, rz <= target)
}

/// Preconditioned MINRES for symmetric, possibly indefinite `H x = b` with a
/// positive definite preconditioner.
pub(crate) fn minres(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    inner: &dyn Fn(&[f64], &[f64]) -> f64,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = inner(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return x;
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for itn in 0..max_iter {
        let v = scaled(1.0 / beta, &y);
        y = apply(&v);
        if itn >= 1 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = inner(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        y = precond(&r2);
        oldb = beta;
        beta = inner(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for k in 0..n {
            w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
        }
        axpy(phi, &w, &mut x);
        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    x
}

/// Damped Newton on `grad F = 0`. `definite` selects PCG (minimizers, with
/// the functional as merit) or MINRES (saddles, with `||grad||_*` as merit).
pub(crate) fn newton(
    pb: &Problem,
    u0: Vec<f64>,
    max_iter: usize,
    definite: bool,
    stop: &dyn Fn(&Problem, &[f64], f64) -> bool,
) -> Descent {
    let mut u = pb.proj(u0);
    let (mut s, mut f, mut g) = pb.eval(&u);
    let mut gd = pb.dual_norm(&g);
    let mut it = 0;
    let inner = |a: &[f64], b: &[f64]| pb.inner(a, b);
    loop {
        if stop(pb, &u, gd) {
            return Descent {
                u,
                value: f,
                grad_dual: gd,
                iterations: it,
                converged: true,
            };
        }
        if it >= max_iter {
            return Descent {
                u,
                value: f,
                grad_dual: gd,
                iterations: it,
                converged: false,
            };
        }
        it += 1;
        let apply = |v: &[f64]| pb.hessian(&u, &s, v);
        let precond = |r: &[f64]| pb.precondition_at(&u, &s, r);
        let rhs = scaled(-1.0, &g);
        let d = if definite {
            let (d, _) = pcg(&apply, &precond, &inner, &rhs, 1e-10, 400);
            d
        } else {
            minres(&apply, &precond, &inner, &rhs, 1e-10, 400)
        };
        let slope = pb.inner(&g, &d);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = u.clone();
            axpy(step, &d, &mut trial);
            let trial = pb.proj(trial);
            let (st, ft, gt) = pb.eval(&trial);
            let gdt = pb.dual_norm(&gt);
            let ok = if definite && slope < 0.0 {
                ft <= f + 1e-4 * step * slope || gdt < 0.5 * gd
            } else {
                gdt <= (1.0 - 1e-4 * step) * gd
            };
            if ok && ft.is_finite() {
                accepted = Some((trial, st, ft, gt, gdt));
                break;
            }
            step *= 0.5;
        }
        let Some((un, sn, fnew, gnew, gdn)) = accepted else {
            let converged = stop(pb, &u, gd);
            return Descent {
                u,
                value: f,
                grad_dual: gd,
                iterations: it,
                converged,
            };
        };
        u = un;
        s = sn;
        f = fnew;
        g = gnew;
        gd = gdn;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_apply(d: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        move |v: &[f64]| v.iter().zip(d).map(|(a, b)| a * b).collect()
    }

    fn dotp(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn minres_solves_indefinite_diagonal() {
        let d = [3.0, -2.0, 0.5, 7.0, -1.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let apply = diag_apply(&d);
        let x = minres(&apply, &|r: &[f64]| r.to_vec(), &dotp, &b, 1e-14, 50);
        for k in 0..5 {
            assert!((x[k] - b[k] / d[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn pcg_solves_spd_with_jacobi() {
        let d = [3.0, 2.0, 0.5, 7.0, 1.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let apply = diag_apply(&d);
        let pre = |r: &[f64]| r.iter().zip(&d).map(|(a, b)| a / b).collect::<Vec<f64>>();
        let (x, ok) = pcg(&apply, &pre, &dotp, &b, 1e-14, 10);
        assert!(ok);
        for k in 0..5 {
            assert!((x[k] - b[k] / d[k]).abs() < 1e-12);
        }
    }
}
