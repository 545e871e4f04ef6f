//! Order-fixed floating point reductions.
//!
//! Every quadrature in the crate goes through these helpers so that a
//! result never depends on how work was split across threads.

const BLOCK: usize = 32;

/// Pairwise (cascade) summation with a fixed split point.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materializing the terms.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, n, f)
}

/// Weighted inner product `sum_i w_i a_i b_i`.
pub fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(w.len() == a.len() && a.len() == b.len());
    pairwise_sum_by(a.len(), &|i| w[i] * a[i] * b[i])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    pairwise_sum_by(a.len(), &|i| a[i] * b[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 999.0 * 1000.0 / 2.0);
        assert_eq!(pairwise_sum_by(1000, &|i| xs[i]), pairwise_sum(&xs));
    }

    #[test]
    fn pairwise_is_more_accurate_than_naive() {
        let xs = vec![0.1; 1 << 20];
        let exact = 0.1 * (1 << 20) as f64;
        let naive: f64 = xs.iter().sum();
        let pw = pairwise_sum(&xs);
        assert!((pw - exact).abs() <= (naive - exact).abs());
        assert!((pw - exact).abs() / exact < 1e-13);
    }

    #[test]
    fn empty_sums_are_zero() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(dot(&[], &[]), 0.0);
    }
}
