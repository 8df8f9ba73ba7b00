//! Errors of a discrete solution against the exact local solution, and
//! log-log slope fitting.

use crate::assembly::toeplitz_symbol;
use crate::error::{Error, Result};
use crate::exact::LocalExactSolution;
use crate::mesh::InterfaceMesh;
use crate::quadrature::{integrate, integrate_graded_both};
use crate::solvers::ModelSolution;
use serde::Serialize;

const POINTS: usize = 7;
pub const GRADING_LEVELS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub l2: f64,
    /// Full norm: `sqrt(‖e‖² + ‖e'‖²)`.
    pub h1: f64,
    /// `sqrt(eᵀ A e)` for the nodal error `e` and the `σ ≡ 1` fractional matrix.
    pub energy: f64,
    pub interface_abs: f64,
}

pub fn compute_errors(sol: &ModelSolution, exact: &LocalExactSolution, mesh: &InterfaceMesh, s: f64) -> Result<ErrorReport> {
    compute_errors_graded(sol, exact, mesh, s, GRADING_LEVELS)
}

pub fn compute_errors_graded(
    sol: &ModelSolution,
    exact: &LocalExactSolution,
    mesh: &InterfaceMesh,
    s: f64,
    levels: usize,
) -> Result<ErrorReport> {
    if sol.n_cells() != mesh.n_cells() || sol.b() != mesh.b_value() {
        return Err(Error::config("solution and mesh differ"));
    }
    if (exact.b - mesh.b_value()).abs() > 0.0 {
        return Err(Error::config("exact solution and mesh have different interfaces"));
    }
    let singular = sol.lifting().is_some();
    if singular && s <= 0.5 {
        return Err(Error::domain(format!("H1 error of a solution with an x^s term needs s > 1/2, got {s}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s = {s} outside (0, 1)")));
    }
    let (n, m, h) = (mesh.n_cells(), mesh.m(), mesh.h());
    let mut l2 = 0.0;
    let mut semi = 0.0;
    let e = |x: f64| sol.value(x) - exact.value(x);
    let de = |x: f64| sol.deriv(x) - exact.deriv(x);
    for c in 0..n {
        let a = mesh.node(c);
        let graded = singular && (c == 0 || c + 1 == n || c + 1 == m || c == m);
        if !graded {
            l2 += integrate(a, a + h, POINTS, |x| e(x).powi(2));
            semi += integrate(a, a + h, POINTS, |x| de(x).powi(2));
        } else if c == 0 || c + 1 == n {
            let end = if c == 0 { 0.0 } else { 1.0 };
            l2 += integrate_graded_both(h, levels, POINTS, |d, _| e(a + d).powi(2));
            semi += boundary_cell_seminorm(sol, exact, end, h, levels);
        } else {
            l2 += integrate_graded_both(h, levels, POINTS, |d, _| e(a + d).powi(2));
            semi += integrate_graded_both(h, levels, POINTS, |d, _| de(a + d).powi(2));
        }
    }
    let nodal: Vec<f64> = sol
        .nodal_values()
        .iter()
        .enumerate()
        .map(|(j, v)| v - exact.value(mesh.node(j + 1)))
        .collect();
    let symbol = toeplitz_symbol(h, s, nodal.len())?;
    let energy2: f64 = (0..nodal.len())
        .map(|r| nodal[r] * nodal.iter().enumerate().map(|(c, v)| symbol[r.abs_diff(c)] * v).sum::<f64>())
        .sum();
    Ok(ErrorReport {
        l2: l2.sqrt(),
        h1: (l2 + semi).sqrt(),
        energy: energy2.max(0.0).sqrt(),
        interface_abs: (sol.interface_value() - exact.interface_value()).abs(),
    })
}

/// `∫ e'²` over the boundary cell of length `h` at `end` (0 or 1), in terms of
/// the distance `d` to `end`. Geometric panels cover `[ε, h]`,
/// `ε = h 2^{-levels}`; on `[0, ε]` the derivative is `g + β d^{s-1}` up to
/// `O(d)` and is integrated exactly.
fn boundary_cell_seminorm(sol: &ModelSolution, exact: &LocalExactSolution, end: f64, h: f64, levels: usize) -> f64 {
    let dir = if end == 0.0 { 1.0 } else { -1.0 };
    let x_of = |d: f64| end + dir * d;
    let g = |d: f64| sol.smooth_deriv(x_of(d)) - exact.deriv(x_of(d));
    let (s, beta) = match sol.lifting() {
        Some(l) => {
            let scale = if end == 0.0 { l.left_deriv(1.0) } else { -l.right_deriv(1.0) };
            (l.s(), sol.interface_value() * scale)
        }
        None => (1.0, 0.0),
    };
    let de = |d: f64| g(d) + beta * d.powf(s - 1.0);
    let mut acc = 0.0;
    let mut hi = h;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        acc += integrate(lo, hi, POINTS, |d| de(d).powi(2));
        hi = lo;
    }
    let eps = hi;
    if beta == 0.0 {
        return acc + integrate(0.0, eps, POINTS, |d| de(d).powi(2));
    }
    let g0 = g(0.5 * eps);
    acc + g0 * g0 * eps + 2.0 * g0 * beta * eps.powf(s) / s + beta * beta * eps.powf(2.0 * s - 1.0) / (2.0 * s - 1.0)
}

/// Least-squares slope of `log(error)` against `log(scale)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::domain(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::domain("slope fit needs positive finite data"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let (mx, my) = logs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / k, b + y / k));
    let (sxy, sxx) = logs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    if sxx == 0.0 {
        return Err(Error::domain("slope fit needs at least two distinct scales"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::build_exact;
    use crate::mesh::{build_mesh, RationalInterface};
    use crate::problem::{ModelKind, ProblemConfig};
    use crate::solvers::run_model;

    fn cfg(s1: f64, s2: f64, s: f64) -> ProblemConfig {
        ProblemConfig { b: RationalInterface::new(1, 2).unwrap(), sigma1: s1, sigma2: s2, sigma3: None, alpha: 0.0, s }
    }

    #[test]
    fn slopes() {
        let xs = [0.1f64, 0.05, 0.02, 0.01];
        let line = |p: f64| xs.iter().map(|&x| (x, 3.0 * x.powf(p))).collect::<Vec<_>>();
        assert!((fit_slope(&line(1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((fit_slope(&line(0.85)).unwrap() - 0.85).abs() < 1e-12);
        assert!(fit_slope(&line(0.0)).unwrap().abs() < 1e-12);
        assert!(fit_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_slope(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn self_comparison_is_zero() {
        let c = cfg(1.0, -0.5, 0.8);
        let mesh = build_mesh(c.b, 3).unwrap();
        let sol = run_model(ModelKind::LocalExact, &c, &mesh).unwrap();
        let ex = build_exact(0.5, 1.0, -0.5, 0.0).unwrap();
        let r = compute_errors(&sol, &ex, &mesh, 0.8).unwrap();
        assert_eq!((r.l2, r.h1, r.energy, r.interface_abs), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn classical_rates() {
        let c = cfg(1.0, 1.0, 0.8);
        let ex = build_exact(0.5, 1.0, 1.0, 0.0).unwrap();
        let mut l2 = Vec::new();
        let mut h1 = Vec::new();
        for k in 3..=7 {
            let mesh = build_mesh(c.b, k).unwrap();
            let sol = run_model(ModelKind::LocalFem, &c, &mesh).unwrap();
            let r = compute_errors(&sol, &ex, &mesh, 0.8).unwrap();
            l2.push((mesh.h(), r.l2));
            h1.push((mesh.h(), r.h1));
        }
        assert!((fit_slope(&l2).unwrap() - 2.0).abs() < 0.1);
        assert!((fit_slope(&h1).unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn grading_is_sufficient() {
        let c = cfg(1.0, -0.5, 0.6);
        let mesh = build_mesh(c.b, 4).unwrap();
        let ex = build_exact(0.5, 1.0, -0.5, 0.0).unwrap();
        let sol = run_model(ModelKind::Simplified, &c, &mesh).unwrap();
        let a = compute_errors_graded(&sol, &ex, &mesh, 0.6, GRADING_LEVELS).unwrap();
        let b = compute_errors_graded(&sol, &ex, &mesh, 0.6, 2 * GRADING_LEVELS).unwrap();
        assert!((a.h1 - b.h1).abs() < 1e-8 * b.h1, "{a:?} {b:?}");
        assert!((a.l2 - b.l2).abs() < 1e-8 * b.l2);
    }

    #[test]
    fn triangle_inequality() {
        let c = cfg(1.0, -0.5, 0.9);
        let mesh = build_mesh(c.b, 4).unwrap();
        let ex = build_exact(0.5, 1.0, -0.5, 0.0).unwrap();
        let fem = run_model(ModelKind::LocalFem, &c, &mesh).unwrap();
        let simp = run_model(ModelKind::Simplified, &c, &mesh).unwrap();
        let e_fem = compute_errors(&fem, &ex, &mesh, 0.9).unwrap();
        let e_simp = compute_errors(&simp, &ex, &mesh, 0.9).unwrap();
        // ‖simp − exact‖ ≤ ‖simp − fem‖ + ‖fem − exact‖, with ‖simp − fem‖ by direct quadrature.
        let gap: f64 = (0..mesh.n_cells())
            .map(|cell| {
                let a = mesh.node(cell);
                integrate_graded_both(mesh.h(), 30, 7, |d, _| (simp.value(a + d) - fem.value(a + d)).powi(2))
            })
            .sum::<f64>()
            .sqrt();
        assert!(e_simp.l2 <= gap + e_fem.l2 + 1e-12);
        assert!(e_fem.l2 <= gap + e_simp.l2 + 1e-12);
    }

    #[test]
    fn rejects_low_order_with_lifting() {
        let c = cfg(1.0, -0.5, 0.8);
        let mesh = build_mesh(c.b, 2).unwrap();
        let ex = build_exact(0.5, 1.0, -0.5, 0.0).unwrap();
        let sol = run_model(ModelKind::Simplified, &c, &mesh).unwrap();
        assert!(matches!(compute_errors(&sol, &ex, &mesh, 0.5), Err(Error::Domain(_))));
    }
}
