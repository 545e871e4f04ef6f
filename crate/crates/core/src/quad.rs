//! One-dimensional quadrature and scalar search utilities.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss-Kronrod integration on a finite interval.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let mut segs = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..4000 {
        let value: f64 = segs.iter().map(|s| s.2 .0).sum();
        let error: f64 = segs.iter().map(|s| s.2 .1).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Integral { value, error };
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("nonempty");
        let (lo, hi, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            segs.push((lo, hi, (gk15(&f, lo, hi).0, 0.0)));
            continue;
        }
        segs.push((lo, mid, gk15(&f, lo, mid)));
        segs.push((mid, hi, gk15(&f, mid, hi)));
    }
    let value = segs.iter().map(|s| s.2 .0).sum();
    let error = segs.iter().map(|s| s.2 .1).sum();
    Integral { value, error }
}

/// Integral of `f` over `[0, inf)`.
///
/// The range is split at 1 and the tail is mapped to `(0, 1]` through
/// `r = 1/s`, followed by `s = w^power` to flatten algebraic endpoint
/// singularities of the transformed integrand.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, power: u32, rel_tol: f64) -> Integral {
    let power = power.max(1);
    let head = integrate(&f, 0.0, 1.0, 0.0, rel_tol);
    let m = power as f64;
    let tail = integrate(
        |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            let s = w.powi(power as i32);
            let r = 1.0 / s;
            let jac = m * w.powi(power as i32 - 1) / (s * s);
            let v = f(r) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        0.0,
        rel_tol,
    );
    Integral {
        value: head.value + tail.value,
        error: head.error + tail.error,
    }
}

/// Golden-section search for the maximum of a unimodal function on [a, b].
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Bisection for a sign change of `f` on `[lo, hi]`; returns the midpoint of
/// the final bracket and the number of halvings.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, usize) {
    let mut flo = f(lo);
    let mut steps = 0;
    while (hi - lo) > rel_tol * hi.abs().max(lo.abs()) && steps < 200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return (mid, steps);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    (0.5 * (lo + hi), steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_log_endpoint_singularity() {
        let r = integrate(|x: f64| x.ln(), 0.0, 1.0, 1e-13, 1e-13);
        assert!((r.value + 1.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn half_line_gaussian_moment() {
        // int_0^inf r^3 e^{-r^2} dr = 1/2
        let r = integrate_half_line(|r: f64| r.powi(3) * (-r * r).exp(), 1, 1e-12);
        assert!((r.value - 0.5).abs() < 1e-11);
    }

    #[test]
    fn half_line_slowly_decaying_tail() {
        // int_1^inf r^{-1.1} dr = 10; power substitution makes it tractable.
        let r = integrate_half_line(|r: f64| if r < 1.0 { 0.0 } else { r.powf(-1.1) }, 20, 1e-11);
        assert!((r.value - 10.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn golden_section_finds_interior_max() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx.abs() < 1e-11);
    }

    #[test]
    fn bisection_converges() {
        let (x, steps) = bisect(|x| x * x - 2.0, 1.0, 2.0, 1e-12);
        assert!((x - 2f64.sqrt()).abs() < 1e-11);
        assert!(steps <= 60);
    }
}
