use std::f64::consts::PI;
use std::sync::Arc;

use super::optim::{axpy, sub};
use super::{Classification, GridSpec, Solution, SolveOptions, SolveOutcome};
use crate::energy::{audit_nonlinearity, Functional, Model, Nonlinearity};
use crate::error::{Error, Result};
use crate::fields::{resample_dilate, Field2D, LocalSign, Mesh, ProblemParams};
use crate::logkernel::LogField;
use crate::quad::bisect;
use crate::symmetry::{project, symmetry_defect, SymmetryClass};

/// `V0(u(./t)) = t^4 V0(u) + (t^4 log t / 2 pi) ||u||_2^4`.
pub fn v0_dilated(v0: f64, l2_sq: f64, t: f64) -> f64 {
    t.powi(4) * (v0 + t.ln() / (2.0 * PI) * l2_sq * l2_sq)
}

/// Root of `V0(u(./t)) = 1` on the branch where the scalar map increases,
/// solved in `s = log t` to stay finite for strongly negative `V0`.
fn t0_from(v0: f64, l2_sq: f64) -> Result<f64> {
    if !(l2_sq > 0.0) {
        return Err(Error::Degenerate(
            "dilation onto {V0 = 1} needs a nonzero field".into(),
        ));
    }
    let k = l2_sq * l2_sq / (2.0 * PI);
    // log V0(u_t) = 4 s + log(v0 + k s), increasing from -inf for s > s_min
    let s_min = -v0 / k;
    let g = |s: f64| {
        let b = v0 + k * s;
        if b <= 0.0 {
            f64::NEG_INFINITY
        } else {
            4.0 * s + b.ln()
        }
    };
    if g(0.0) == 0.0 {
        return Ok(1.0);
    }
    let mut width = 1.0;
    while g(s_min + width) < 0.0 {
        width *= 2.0;
    }
    let (s, _) = bisect(g, s_min, s_min + width, 1e-15);
    let t = s.exp();
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Degenerate(format!(
            "dilation factor exp({s}) is not representable"
        )));
    }
    Ok(t)
}

/// Dilation factor `t0` with `V0(u(./t0)) = 1`, from the scalar identity.
pub fn find_t0_on_h(u: &Field2D) -> Result<f64> {
    t0_from(u.v0(), u.grid.mesh().l2_sq(&u.values))
}

struct Retraction<'a> {
    model: &'a Model,
    class: SymmetryClass,
}

impl Retraction<'_> {
    fn project(&self, u: &Field2D) -> Field2D {
        project(u, self.class)
    }

    /// Returns a field in the class with `V0 = 1` (amplitude retraction when
    /// `V0 > 0`, dilation first otherwise).
    fn apply(&self, u: Field2D) -> Result<Field2D> {
        let mut u = self.project(&u);
        let mesh = self.model.mesh();
        for _ in 0..4 {
            let v0 = self.model.state(&u.values).terms.v0;
            if v0 > 0.0 {
                return Ok(u.scaled(v0.powf(-0.25)));
            }
            let t0 = t0_from(v0, mesh.l2_sq(&u.values))?;
            u = self.project(&resample_dilate(&u, t0, 0.0)?.field);
        }
        Err(Error::Degenerate("could not retract onto {V0 = 1}".into()))
    }
}

/// Minimizes `G` on `{V0 = 1}` within a symmetry class by projected
/// preconditioned descent. Returns the multiplier `lambda` of
/// `G' = lambda V0'` and `q = 4 lambda`.
pub fn minimize_on_h(
    seed: &Field2D,
    params: &ProblemParams,
    w: Arc<dyn Nonlinearity>,
    class: SymmetryClass,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    audit_nonlinearity(w.as_ref())?;
    let class = class.validate()?;
    let params = ProblemParams {
        local_sign: LocalSign::GeneralW,
        ..*params
    };
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidParams(format!(
            "alpha must be positive, got {}",
            params.alpha
        )));
    }
    let grid = seed.grid;
    let model = Model::plane(grid, params).with_nonlinearity(w);
    let ret = Retraction {
        model: &model,
        class,
    };
    let mesh = model.mesh();
    let f = Functional::G;
    let mut u = ret.apply(seed.clone())?;

    // tangent data at u: value, multiplier, reduced gradient and its Riesz image
    let tangent = |u: &Field2D| {
        let s = model.state(&u.values);
        let g = project(&u.with_values(model.gradient(f, &u.values, &s)), class).values;
        let h = project(&u.with_values(model.v0_gradient(&u.values, &s)), class).values;
        let gh = model.riesz(&h);
        let lambda = mesh.inner(&g, &gh) / mesh.inner(&h, &gh);
        let mut r = g;
        axpy(-lambda, &h, &mut r);
        let rr = project(&u.with_values(model.riesz(&r)), class).values;
        let dual = mesh.inner(&r, &rr).max(0.0).sqrt();
        (
            model.value(f, &s.terms),
            lambda,
            r,
            rr,
            dual,
            s.terms.x_norm_sq().sqrt(),
        )
    };

    let mut notes = Vec::new();
    let (mut val, mut lambda, mut r, mut rr, mut dual, mut xn) = tangent(&u);
    let mut step = 1.0f64;
    let mut it = 0;
    let mut converged = false;
    // memory of the previous reduced gradient for a Polak-Ribiere direction
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut max_defect: f64 = 0.0;
    while it < opts.max_iter {
        if dual <= opts.tol_grad * xn.max(1.0) {
            converged = true;
            break;
        }
        it += 1;
        let mut d: Vec<f64> = rr.iter().map(|v| -v).collect();
        if let Some((r_old, rr_old, d_old)) = &prev {
            let num = mesh.inner(&rr, &sub(&r, r_old));
            let den = mesh.inner(r_old, rr_old);
            let beta = (num / den).max(0.0);
            axpy(beta, d_old, &mut d);
            if mesh.inner(&r, &d) >= 0.0 {
                d = rr.iter().map(|v| -v).collect();
            }
        }
        let slope = mesh.inner(&r, &d);
        let mut accepted = None;
        let mut tau = (2.0 * step).min(4.0);
        for _ in 0..50 {
            let mut trial = u.values.clone();
            axpy(tau, &d, &mut trial);
            let cand = ret.apply(u.with_values(trial))?;
            let cv = model.energy(f, &cand.values);
            if cv <= val + 1e-4 * tau * slope {
                accepted = Some(cand);
                break;
            }
            tau *= 0.5;
        }
        let Some(next) = accepted else {
            notes.push(format!("line search stalled at iteration {it}"));
            break;
        };
        step = tau;
        prev = Some((r.clone(), rr.clone(), d));
        u = next;
        (val, lambda, r, rr, dual, xn) = tangent(&u);
        if it % 100 == 0 {
            max_defect = max_defect.max(symmetry_defect(&u, class));
        }
    }
    if !converged {
        converged = dual <= opts.tol_grad * xn.max(1.0);
    }
    max_defect = max_defect.max(symmetry_defect(&u, class));
    let s = model.state(&u.values);
    let poho = model.pohozaev_uncoupled(&s.terms);
    if !(lambda > 0.0) {
        notes.push(format!("anomaly: multiplier {lambda:.6e} is not positive"));
    }
    if !(poho > 0.0) {
        notes.push(format!(
            "anomaly: uncoupled Pohozaev value {poho:.6e} is not positive"
        ));
    }
    notes.push(format!("symmetry_defect_max={max_defect:.3e}"));
    notes.push(format!("pohozaev_uncoupled={poho:.17e}"));
    notes.push(format!("v0_minus_one={:.3e}", s.terms.v0 - 1.0));
    let q_eff = 4.0 * lambda;
    // multiplier identity: the Nehari-type residual of G' - lambda V0'
    let nehari = s.terms.x_norm_sq() + s.terms.w_prime_u - 4.0 * lambda * s.terms.v0;
    Ok(SolveOutcome {
        classification: Classification::ConstrainedMinimizer,
        solution: Some(Solution::Plane(u.clone())),
        grid: Some(GridSpec::Plane(grid)),
        level: val,
        multiplier_lambda: Some(lambda),
        q_effective: q_eff,
        residual_grad: dual / xn.max(1.0),
        residual_grad_abs: dual,
        residual_nehari: nehari.abs() / (xn * xn).max(1.0),
        residual_pohozaev: 0.0,
        x_norm: xn,
        l2_norm: s.terms.l2_sq.sqrt(),
        iterations: it,
        converged,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;

    #[test]
    fn t0_is_one_on_the_constraint() {
        let v0 = 1.0;
        assert!((t0_from(v0, 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t0_solves_scalar_equation() {
        for (v0, m) in [(0.3, 1.0), (-0.5, 2.0), (4.0, 0.5), (-3.0, 2.0)] {
            let t = t0_from(v0, m).unwrap();
            assert!((v0_dilated(v0, m, t) - 1.0).abs() < 1e-6, "{v0} {m} {t}");
        }
        assert!(t0_from(1.0, 0.0).is_err());
    }

    #[test]
    fn scalar_identity_matches_resampled_field() {
        let grid = Grid2D::new(8.0, 96).unwrap();
        let u = Field2D::from_fn(grid, |x, y| (-(x * x + y * y)).exp());
        let m = grid.mesh().l2_sq(&u.values);
        let v0 = u.v0();
        let d = resample_dilate(&u, 2.0, 0.0).unwrap().field;
        let lhs = d.v0();
        let rhs = v0_dilated(v0, m, 2.0);
        assert!(
            (lhs - rhs).abs() <= 1e-3 * lhs.abs().max(1.0),
            "{lhs} vs {rhs}"
        );
    }
}
