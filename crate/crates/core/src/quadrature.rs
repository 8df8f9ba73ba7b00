//! Gauss–Legendre rules and geometrically graded composite rules.
//!
//! Graded rules integrate in a *distance* variable `d` measured from the
//! singular endpoint, so callers never form `1 - x` for `x` close to 1.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

pub const MAX_POINTS: usize = 64;

static RULES: [OnceLock<Box<[(f64, f64)]>>; MAX_POINTS + 1] = [const { OnceLock::new() }; MAX_POINTS + 1];

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, computed once per `n`.
///
/// # Panics
/// If `n` is zero or larger than [`MAX_POINTS`].
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    assert!((1..=MAX_POINTS).contains(&n), "unsupported Gauss-Legendre order {n}");
    RULES[n].get_or_init(|| {
        let degree = NonZeroUsize::new(n).expect("nonzero order");
        GaussLegendre::new(degree).as_node_weight_pairs().to_vec().into_boxed_slice()
    })
}

/// `∫_a^b f` with a single `n`-point panel.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut acc = 0.0;
    for &(x, w) in gauss_legendre(n) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// `∫_a^b f` with `panels` equal panels of `n` points each.
pub fn integrate_composite<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, n: usize, mut f: F) -> f64 {
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        acc += integrate(lo, lo + width, n, &mut f);
    }
    acc
}

/// `∫_0^len f(d) dd` on panels `[len·2^{-l-1}, len·2^{-l}]`, `l < levels`,
/// plus one final panel `[0, len·2^{-levels}]`.
pub fn integrate_graded<F: FnMut(f64) -> f64>(len: f64, levels: usize, n: usize, mut f: F) -> f64 {
    let mut acc = 0.0;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        acc += integrate(lo, hi, n, &mut f);
        hi = lo;
    }
    acc + integrate(0.0, hi, n, &mut f)
}

/// `∫_0^len f(d) dd` graded toward both `d = 0` and `d = len`. The callback
/// receives `(d, len - d)` with the smaller of the two computed without cancellation.
pub fn integrate_graded_both<F: FnMut(f64, f64) -> f64>(len: f64, levels: usize, n: usize, mut f: F) -> f64 {
    let half = 0.5 * len;
    integrate_graded(half, levels, n, |d| f(d, len - d)) + integrate_graded(half, levels, n, |d| f(len - d, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_two() {
        for n in [1, 7, 16, 24, 64] {
            let sum: f64 = gauss_legendre(n).iter().map(|&(_, w)| w).sum();
            assert!((sum - 2.0).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn polynomial_exactness() {
        let v = integrate(0.0, 2.0, 4, |x| x.powi(7));
        assert!((v - 32.0).abs() < 1e-12);
    }

    #[test]
    fn graded_handles_endpoint_singularity() {
        let v = integrate_graded(1.0, 60, 8, |d| d.powf(-0.4));
        assert!((v - 1.0 / 0.6).abs() < 1e-10, "{v}");
    }

    #[test]
    fn graded_both_ends() {
        let v = integrate_graded_both(1.0, 60, 8, |a, b| a.powf(-0.3) + b.powf(-0.3));
        assert!((v - 2.0 / 0.7).abs() < 1e-10, "{v}");
    }
}
