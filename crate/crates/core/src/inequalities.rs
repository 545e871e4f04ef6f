//! Explicit constants of the functional inequalities and their verifiers.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::energy::gn_constant;
use crate::error::{Error, Result};
use crate::fields::{x_norm, Mesh, RadialField, Sampled};
use crate::library::{library_grid, planar_library, LIBRARY_SEED};
use crate::logkernel::{FftPotential, Kernel, KernelTable, PotentialOp};
use crate::quad::{golden_max, integrate_half_line};

/// Parameters `(alpha, p, beta, epsilon)` of the weighted log estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub alpha: f64,
    pub p: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl LemmaParams {
    pub fn new(alpha: f64, p: f64, beta: f64, epsilon: f64) -> Result<Self> {
        let lp = Self {
            alpha,
            p,
            beta,
            epsilon,
        };
        lp.validate()?;
        Ok(lp)
    }

    /// `alpha p / ((p - 2)(beta - 1))`; the tail integral converges iff this exceeds 2.
    pub fn decay_rate(&self) -> f64 {
        self.alpha * self.p / ((self.p - 2.0) * (self.beta - 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            alpha,
            p,
            beta,
            epsilon,
        } = *self;
        if !(alpha > 0.0 && p > 2.0 && beta > 2.0 && epsilon > 0.0) {
            return Err(Error::Inadmissible(format!(
                "need alpha > 0, p > 2, beta > 2, epsilon > 0 (got {alpha}, {p}, {beta}, {epsilon})"
            )));
        }
        if !(self.decay_rate() > 2.0) {
            return Err(Error::Inadmissible(format!(
                "alpha p / ((p - 2)(beta - 1)) = {} must exceed 2",
                self.decay_rate()
            )));
        }
        Ok(())
    }

    /// Exponent `4(beta - 1)/(beta - 2)` of `||u||_p` on the right-hand side.
    pub fn lp_exponent(&self) -> f64 {
        4.0 * (self.beta - 1.0) / (self.beta - 2.0)
    }
}

/// `beta = (2p - 4)/(p - 4)`, the exponent that makes the right-hand side
/// power of `||u||_p` equal to `p`.
pub fn nonexistence_beta(p: f64) -> f64 {
    (2.0 * p - 4.0) / (p - 4.0)
}

/// The constant `C` of the weighted log estimate.
pub fn lemma_constant(lp: &LemmaParams) -> Result<f64> {
    lp.validate()?;
    let LemmaParams {
        alpha,
        p,
        beta,
        epsilon,
    } = *lp;
    let s = (beta - 1.0) * (p - 2.0);
    let log_pow = beta * p / s;
    let weight_pow = p / s;
    let margin = lp.decay_rate() - 2.0;
    // after r = 1/w^m the tail integrand behaves like w^(m * margin - 1)
    let power = ((2.0 / margin).ceil() as u32).clamp(1, 60);
    let integral = integrate_half_line(
        |r: f64| (2.0 + r).ln().powf(log_pow) * (-weight_pow * r.powf(alpha).ln_1p()).exp() * r,
        power,
        1e-11,
    );
    let base = 2.0 * PI * integral.value;
    let outer = 2.0 * s / ((beta - 2.0) * p);
    Ok((beta - 2.0) / (beta * epsilon.powf(2.0 / (beta - 2.0))) * base.powf(outer))
}

/// Both sides of the weighted log estimate for one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

pub fn verify_lemma<F: Sampled>(u: &F, lp: &LemmaParams) -> Result<LemmaCheck> {
    let c = lemma_constant(lp)?;
    Ok(verify_lemma_with(u, lp, c))
}

/// [`verify_lemma`] with a precomputed constant.
pub fn verify_lemma_with<F: Sampled>(u: &F, lp: &LemmaParams, c: f64) -> LemmaCheck {
    let mesh = u.mesh();
    let v = u.values();
    let log_w: Vec<f64> = mesh.radii().iter().map(|r| (2.0 + r).ln()).collect();
    let lhs = mesh.moment_with(&log_w, v).powi(2);
    let lp_norm = mesh.lp_pow(v, lp.p).powf(1.0 / lp.p);
    let rhs =
        2.0 * lp.epsilon / lp.beta * mesh.star_sq(v, lp.alpha) + c * lp_norm.powf(lp.lp_exponent());
    LemmaCheck {
        lhs,
        rhs,
        satisfied: lhs <= rhs * (1.0 + 1e-12),
    }
}

/// Constants of the nonexistence argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub alpha: f64,
    pub p: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Lemma constant at `(alpha, p, beta, 1)`.
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub qbar: f64,
}

/// Coupling below which the only solution is zero; needs `p > 4` and
/// `alpha > (2p - 4)/(p - 4)`.
pub fn nonexistence_threshold(alpha: f64, p: f64) -> Result<Threshold> {
    if !(p > 4.0) {
        return Err(Error::Inadmissible(format!(
            "nonexistence threshold needs p > 4, got {p}"
        )));
    }
    let beta = nonexistence_beta(p);
    if !(alpha > beta) {
        return Err(Error::Inadmissible(format!(
            "nonexistence threshold needs alpha > {beta}, got {alpha}"
        )));
    }
    let c = lemma_constant(&LemmaParams::new(alpha, p, beta, 1.0)?)?;
    let c1 = 2.0 / (beta * PI * LN_2);
    let c2 = c / (PI * LN_2);
    Ok(Threshold {
        alpha,
        p,
        beta,
        epsilon: 1.0,
        c,
        c1,
        c2,
        qbar: (1.0 / c1).min(1.0 / c2),
    })
}

pub fn nonexistence_qbar(alpha: f64, p: f64) -> Result<f64> {
    Ok(nonexistence_threshold(alpha, p)?.qbar)
}

/// Writes threshold rows as CSV with columns `alpha,p,beta,epsilon,C,C1,C2,qbar`.
pub fn write_constants_csv<W: Write>(out: W, rows: &[Threshold]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "p", "beta", "epsilon", "C", "C1", "C2", "qbar"])?;
    for t in rows {
        w.write_record(
            [t.alpha, t.p, t.beta, t.epsilon, t.c, t.c1, t.c2, t.qbar].map(|v| format!("{v:e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `((k + 1)/sqrt(2 pi) + 1/(2 pi))^(1/2)` with `k = (alpha + 2)/2`.
pub fn strauss_constant(alpha: f64) -> f64 {
    let k = 0.5 * (alpha + 2.0);
    ((k + 1.0) / (2.0 * PI).sqrt() + 1.0 / (2.0 * PI)).sqrt()
}

/// Both sides of `|u(r)| r^((alpha + 2)/4) <= C ||u||` for `r >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraussCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    /// `lhs / rhs`, zero for the zero field.
    pub tightness: f64,
    pub satisfied: bool,
}

pub fn strauss_bound(u: &RadialField, alpha: f64) -> StraussCheck {
    let e = 0.25 * (alpha + 2.0);
    let lhs = (0..u.grid.m())
        .map(|i| (u.grid.node(i), u.values[i]))
        .filter(|(r, _)| *r >= 1.0)
        .map(|(r, v)| r.powf(e) * v.abs())
        .fold(0.0, f64::max);
    let constant = strauss_constant(alpha);
    let rhs = constant * x_norm(u, alpha);
    let tightness = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    StraussCheck {
        lhs,
        rhs,
        constant,
        tightness,
        satisfied: lhs <= rhs * (1.0 + 1e-12),
    }
}

/// Maximum over `r >= 0` of `f(r)`: a log-spaced scan followed by
/// golden-section refinement around the best sample.
fn sup_half_line<F: Fn(f64) -> f64>(f: F) -> f64 {
    let mut pts = vec![0.0];
    pts.extend((0..=400).map(|k| 10f64.powf(-4.0 + 10.0 * k as f64 / 400.0)));
    let (best, fbest) =
        pts.iter()
            .enumerate()
            .map(|(i, &r)| (i, f(r)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
    if best == 0 {
        return fbest;
    }
    let lo = pts[best - 1];
    let hi = pts[(best + 1).min(pts.len() - 1)];
    golden_max(&f, lo, hi, 1e-10).1.max(fbest)
}

/// Constants of the embedding and Coulomb bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstants {
    pub alpha: f64,
    /// `max(sup log(2 + r)/(1 + r^alpha), 1 + 1e-9)`.
    pub c_alpha: f64,
    /// The unclamped supremum.
    pub c_alpha_raw: f64,
    pub clamped: bool,
    /// `sup log^2(2 + r)/(1 + r^alpha)`.
    pub c_alpha_prime: f64,
    /// Library estimate of the Gagliardo-Nirenberg constant at exponent 4.
    pub c_gn_lib: f64,
    /// Library estimate of `D` in `V2(u) <= D ||u||_{8/3}^4`.
    pub d_est: f64,
}

pub fn c_alpha_raw(alpha: f64) -> f64 {
    sup_half_line(|r| (2.0 + r).ln() / (1.0 + r.powf(alpha)))
}

pub fn c_alpha(alpha: f64) -> f64 {
    c_alpha_raw(alpha).max(1.0 + 1e-9)
}

pub fn embedding_constants(alpha: f64) -> Result<EmbeddingConstants> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let raw = c_alpha_raw(alpha);
    let clamped = raw < 1.0 + 1e-9;
    Ok(EmbeddingConstants {
        alpha,
        c_alpha: raw.max(1.0 + 1e-9),
        c_alpha_raw: raw,
        clamped,
        c_alpha_prime: sup_half_line(|r| (2.0 + r).ln().powi(2) / (1.0 + r.powf(alpha))),
        c_gn_lib: gn_constant(4.0),
        d_est: d_estimate(),
    })
}

/// Largest `V2(u) / ||u||_{8/3}^4` over the 200-member planar library.
pub fn d_estimate() -> f64 {
    static CACHE: OnceLock<Mutex<Option<f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(None));
    let mut slot = cache.lock().expect("D cache poisoned");
    if let Some(d) = *slot {
        return d;
    }
    let grid = library_grid();
    let mesh = grid.mesh();
    let op = FftPotential::with_kernel(&KernelTable::shared(grid), Kernel::LogOnePlusTwoOver);
    let d = planar_library(LIBRARY_SEED, 200)
        .iter()
        .map(|f| {
            let u = f.sample(grid);
            let rho: Vec<f64> = u.values.iter().map(|v| v * v).collect();
            let v2 = mesh.inner(&op.potential(&rho), &rho);
            v2 / mesh.lp_pow(&u.values, 8.0 / 3.0).powf(1.5)
        })
        .fold(0.0, f64::max);
    *slot = Some(d);
    d
}

/// Library estimate of the constant in `||u||_p^p <= C ||u||^p`; follows from
/// the Gagliardo-Nirenberg estimate since `||u||_2, ||grad u||_2 <= ||u||`.
pub fn embedding_lp_constant(p: f64) -> f64 {
    gn_constant(p)
}

/// Lower bound on `J` over a sphere in `X`, maximized over the radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpFloor {
    pub rho: f64,
    pub floor: f64,
}

/// `max_rho rho^2 (1/2 - q C_alpha rho^2/(4 pi) - C rho^(p-2)/p)`, with the
/// coupling made explicit (the bound on `V1` enters multiplied by `q`).
pub fn mp_floor(alpha: f64, p: f64, q: f64) -> MpFloor {
    let ca = c_alpha(alpha);
    let c = embedding_lp_constant(p);
    let g =
        |rho: f64| rho * rho * (0.5 - q * ca / (4.0 * PI) * rho * rho - c / p * rho.powf(p - 2.0));
    // the bracket vanishes before this radius
    let mut hi = 1.0;
    while g(hi) > 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    let (rho, floor) = golden_max(g, 0.0, hi, 1e-10);
    MpFloor { rho, floor }
}

trait MomentWith {
    fn moment_with(&self, weight: &[f64], u: &[f64]) -> f64;
}

impl<M: Mesh + ?Sized> MomentWith for M {
    fn moment_with(&self, weight: &[f64], u: &[f64]) -> f64 {
        let sq: Vec<f64> = weight.iter().zip(u).map(|(w, v)| w * v * v).collect();
        self.integral(&sq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Field2D, Grid2D, RadialGrid};
    use crate::library::radial_library;
    use crate::logkernel::LogField;
    use crate::quad::integrate;

    #[test]
    fn admissibility_border_matches_exponent_threshold() {
        // p = 6, beta = 4: needs 6 alpha / 12 > 2, i.e. alpha > 4
        assert!(LemmaParams::new(4.0, 6.0, 4.0, 1.0).is_err());
        assert!(LemmaParams::new(4.01, 6.0, 4.0, 1.0).is_ok());
        assert_eq!(nonexistence_beta(6.0), 4.0);
    }

    #[test]
    fn beta_choice_turns_exponent_into_p() {
        let beta = nonexistence_beta(5.0);
        assert_eq!(beta, 6.0);
        let lp = LemmaParams {
            alpha: 9.0,
            p: 5.0,
            beta,
            epsilon: 1.0,
        };
        assert!((lp.lp_exponent() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn lemma_constant_matches_plain_quadrature() {
        // independent route: truncate at a large radius with plain adaptive quadrature
        let (alpha, p, beta, eps) = (6.0, 6.0, 4.0, 1.0);
        let s = (beta - 1.0) * (p - 2.0);
        let f = |r: f64| (2.0 + r).ln().powf(beta * p / s) * (1.0 + r.powf(alpha)).powf(-p / s) * r;
        let mut total = 0.0;
        let mut a = 0.0;
        for b in [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6, 1e8, 1e10, 1e12] {
            total += integrate(f, a, b, 0.0, 1e-12).value;
            a = b;
        }
        // tail beyond 1e12 decays like log^2(r)/r^2 and is negligible
        let expected =
            (beta - 2.0) / (beta * eps) * (2.0 * PI * total).powf(2.0 * s / ((beta - 2.0) * p));
        let c = lemma_constant(&LemmaParams::new(alpha, p, beta, eps).unwrap()).unwrap();
        assert!(
            ((c - expected) / expected).abs() < 1e-4,
            "{c} vs {expected}"
        );
    }

    #[test]
    fn lemma_constant_decreases_in_alpha() {
        let c: Vec<f64> = [5.0, 6.0, 8.0]
            .iter()
            .map(|&a| lemma_constant(&LemmaParams::new(a, 6.0, 4.0, 1.0).unwrap()).unwrap())
            .collect();
        assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");
    }

    #[test]
    fn lemma_constant_grows_near_the_border() {
        // decay rate = alpha / 2 at p = 6, beta = 4
        let near = lemma_constant(&LemmaParams::new(4.2, 6.0, 4.0, 1.0).unwrap()).unwrap();
        let far = lemma_constant(&LemmaParams::new(6.0, 6.0, 4.0, 1.0).unwrap()).unwrap();
        assert!(near > far);
    }

    #[test]
    fn first_threshold_constant_is_closed_form() {
        let t = nonexistence_threshold(5.0, 6.0).unwrap();
        assert!((t.c1 - 1.0 / (2.0 * PI * LN_2)).abs() < 1e-15);
        assert!((1.0 / t.c1 - 4.355).abs() < 1e-3);
        assert!(t.qbar > 0.0 && t.qbar <= 1.0 / t.c1);
    }

    #[test]
    fn threshold_rejects_outside_range() {
        assert!(nonexistence_qbar(10.0, 4.0).is_err());
        assert!(nonexistence_qbar(4.0, 6.0).is_err());
    }

    #[test]
    fn thresholds_positive_on_grid() {
        for p in [4.5, 5.0, 6.0, 7.0, 8.0] {
            let b = nonexistence_beta(p);
            for da in [0.5, 1.0, 2.0, 4.0, 8.0] {
                assert!(nonexistence_qbar(b + da, p).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn lemma_holds_on_library_and_under_scaling() {
        let lp = LemmaParams::new(6.0, 6.0, 4.0, 1.0).unwrap();
        let c = lemma_constant(&lp).unwrap();
        let grid = Grid2D::new(8.0, 64).unwrap();
        for f in planar_library(11, 20) {
            let u = f.sample(grid);
            for s in [0.1, 1.0, 10.0] {
                assert!(verify_lemma_with(&u.scaled(s), &lp, c).satisfied);
            }
        }
        let z = verify_lemma_with(&Field2D::zeros(grid), &lp, c);
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        assert!(z.satisfied);
    }

    #[test]
    fn strauss_constant_closed_form() {
        let c = strauss_constant(2.0);
        assert!((c - 1.164).abs() < 1e-3, "{c}");
    }

    #[test]
    fn strauss_holds_on_radial_library() {
        let grid = RadialGrid::new(12.0, 400).unwrap();
        for alpha in [1.0, 3.0, 6.0] {
            for f in radial_library(5, 10) {
                let chk = strauss_bound(&f.sample(grid), alpha);
                assert!(chk.satisfied && chk.tightness <= 1.0);
            }
        }
        let g = RadialField::from_fn(grid, |r| (-r * r / 2.0).exp());
        let chk = strauss_bound(&g, 2.0);
        // direct scan of r |u(r)| on r >= 1 peaks at r = 1
        assert!((chk.lhs - (-0.5f64).exp()).abs() < 0.01);
        assert!(chk.tightness < 0.5);
    }

    #[test]
    fn c_alpha_is_an_interior_maximum() {
        let c = c_alpha_raw(2.0);
        assert!(c > LN_2);
        // oracle: dense scan
        let scan = (0..200_000)
            .map(|k| k as f64 * 1e-4)
            .map(|r| (2.0 + r).ln() / (1.0 + r * r))
            .fold(0.0, f64::max);
        assert!((c - scan).abs() < 1e-8);
        assert!(c_alpha(2.0) >= 1.0 + 1e-9);
    }

    #[test]
    fn clamp_reported() {
        let e = embedding_constants(2.0).unwrap();
        assert!(e.clamped && e.c_alpha == 1.0 + 1e-9);
        assert!(e.c_alpha_prime > 0.0 && e.d_est > 0.0);
    }

    #[test]
    fn v1_bound_holds_on_library() {
        let alpha = 2.0;
        let c = c_alpha(alpha);
        let grid = Grid2D::new(8.0, 48).unwrap();
        let mesh = grid.mesh();
        for f in planar_library(17, 10) {
            let u = f.sample(grid);
            let v1 = u.coulomb().unwrap().v1;
            let bound = c / PI * mesh.l2_sq(&u.values) * mesh.star_sq(&u.values, alpha);
            assert!(v1 <= bound);
        }
    }

    #[test]
    fn mp_floor_is_positive_and_shrinks_with_q() {
        let a = mp_floor(2.0, 5.0, 1.0);
        let b = mp_floor(2.0, 5.0, 4.0);
        assert!(a.floor > 0.0 && b.floor > 0.0 && b.floor < a.floor);
    }

    #[test]
    fn constants_csv_has_expected_header() {
        let t = nonexistence_threshold(5.0, 6.0).unwrap();
        let mut buf = Vec::new();
        write_constants_csv(&mut buf, &[t]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("alpha,p,beta,epsilon,C,C1,C2,qbar\n"));
        assert_eq!(s.lines().count(), 2);
    }
}
