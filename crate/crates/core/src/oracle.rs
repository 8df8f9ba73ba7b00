//! Brute-force singular quadrature of the bilinear form, kept independent of
//! the closed-form kernels so that it can validate them.
//!
//! The double integral is split cell by cell. Pairs sharing a corner use a
//! Duffy-type split around the corner, distant pairs use tensor Gauss rules
//! and the exterior part uses the exact inner integral
//! `∫_{ℝ∖(lo,hi)} |x-y|^{-1-2s} dy = ((x-lo)^{-2s} + (hi-x)^{-2s}) / (2s)`.
//! Each quantity is recomputed with increasingly many Gauss points until two
//! successive values agree.

use crate::assembly::Subdomain;
use crate::error::{Error, Result};
use crate::kernel::fractional_constant;
use crate::lifting::Lifting;
use crate::mesh::InterfaceMesh;
use crate::problem::CoefficientField;
use crate::quadrature::gauss_legendre;

/// Geometric panels toward `t = 0` in the lifting self-energy.
const OUTER_CUTOFF_LEVELS: usize = 31;

const POINT_SEQUENCE: [usize; 6] = [6, 10, 14, 20, 28, 40];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Relative target, at least `1e-10`.
    pub tol: f64,
    /// Cap on integrand evaluations per quantity.
    pub max_evaluations: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_evaluations: 1_000_000 }
    }
}

impl OracleOptions {
    fn check(&self) -> Result<()> {
        if !(self.tol >= 1e-10) {
            return Err(Error::domain(format!("oracle tolerance {} below 1e-10", self.tol)));
        }
        Ok(())
    }

    /// Number of geometric panels so that the innermost panel of an integrand
    /// behaving like `d^(exponent-1)` is negligible.
    fn levels(&self, exponent: f64) -> usize {
        (((-self.tol.log2()) + 10.0) / exponent).ceil().clamp(20.0, 1000.0) as usize
    }
}

/// Sum with an absolute-mass companion and an evaluation counter.
#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    value: f64,
    mass: f64,
    evals: u64,
}

impl Tally {
    fn add(&mut self, v: f64, evals: u64) {
        self.value += v;
        self.mass += v.abs();
        self.evals += evals;
    }
}

/// Gauss rule mapped to `[a, b]`.
fn mapped(a: f64, b: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    gauss_legendre(n).iter().map(move |&(t, w)| (mid + half * t, half * w))
}

/// `∫_0^len g` with geometric panels toward 0.
fn graded<F: FnMut(f64) -> f64>(len: f64, levels: usize, n: usize, mut g: F) -> (f64, u64) {
    let mut acc = 0.0;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        acc += mapped(lo, hi, n).map(|(x, w)| w * g(x)).sum::<f64>();
        hi = lo;
    }
    acc += mapped(0.0, hi, n).map(|(x, w)| w * g(x)).sum::<f64>();
    (acc, ((levels + 1) * n) as u64)
}

/// Iterates the point sequence until two successive values agree.
fn converge<F: Fn(usize) -> Tally>(opts: &OracleOptions, f: F) -> Result<f64> {
    opts.check()?;
    let mut prev: Option<Tally> = None;
    let mut used = 0u64;
    let mut change = f64::INFINITY;
    for &n in &POINT_SEQUENCE {
        let t = f(n);
        used += t.evals;
        if let Some(p) = prev {
            change = (t.value - p.value).abs();
            if change <= opts.tol * t.mass.max(t.value.abs()) {
                return Ok(t.value);
            }
        }
        if used > opts.max_evaluations {
            return Err(Error::Convergence { estimate: t.value, change, evaluations: used });
        }
        prev = Some(t);
    }
    let estimate = prev.map_or(f64::NAN, |t| t.value);
    Err(Error::Convergence { estimate, change, evaluations: used })
}

/// Uniformly meshed interval with hat functions on its interior nodes and a
/// piecewise-constant coefficient on cell pairs.
struct HatProblem<'a> {
    lo: f64,
    h: f64,
    cells: usize,
    s: f64,
    pair_sigma: &'a (dyn Fn(usize, usize) -> f64 + Sync),
    exterior_sigma: &'a (dyn Fn(usize) -> f64 + Sync),
}

impl HatProblem<'_> {
    /// Hat of local node `i` at the point `x`.
    fn hat(&self, i: usize, x: f64) -> f64 {
        (1.0 - ((x - self.lo) / self.h - i as f64).abs()).max(0.0)
    }

    /// Slope of hat `i` on cell `c`.
    fn slope(&self, i: usize, c: usize) -> f64 {
        if c + 1 == i {
            1.0 / self.h
        } else if c == i {
            -1.0 / self.h
        } else {
            0.0
        }
    }

    fn touches(&self, i: usize, c: usize) -> bool {
        c + 1 == i || c == i
    }

    /// Unscaled form on hats `i`, `j` at Gauss order `n`.
    fn form(&self, i: usize, j: usize, n: usize, opts: &OracleOptions) -> Tally {
        let (h, s) = (self.h, self.s);
        let mut t = Tally::default();
        let relevant = |c: usize| self.touches(i, c) || self.touches(j, c);
        for ca in 0..self.cells {
            for cb in 0..self.cells {
                if !relevant(ca) && !relevant(cb) {
                    continue;
                }
                let sigma = (self.pair_sigma)(ca, cb);
                if sigma == 0.0 {
                    continue;
                }
                let (v, e) = if ca == cb {
                    let g = self.slope(i, ca) * self.slope(j, ca);
                    (g * 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s)), 1)
                } else if ca.abs_diff(cb) == 1 {
                    self.corner_pair(i, j, ca, cb, n, opts)
                } else {
                    self.distant_pair(i, j, ca, cb, n)
                };
                t.add(sigma * v, e);
            }
        }
        for c in (0..self.cells).filter(|&c| self.touches(i, c) && self.touches(j, c)) {
            let sigma = (self.exterior_sigma)(c);
            if sigma != 0.0 {
                let (v, e) = self.exterior_cell(i, j, c, n, opts);
                t.add(2.0 * sigma * v, e);
            }
        }
        t
    }

    /// `x` in cell `ca`, `y` in the adjacent cell `cb`; with `p = |x - c|`,
    /// `q = |y - c|` for the shared corner `c`, the two triangles `q = p w`
    /// and `p = q w` give integrands `O(p^{2-2s})`.
    fn corner_pair(&self, i: usize, j: usize, ca: usize, cb: usize, n: usize, opts: &OracleOptions) -> (f64, u64) {
        let s = self.s;
        // x = c + ex p with ex = -1 when cb lies to the right of ca.
        let ex = if cb > ca { -1.0 } else { 1.0 };
        let (sxi, syi) = (ex * self.slope(i, ca), -ex * self.slope(i, cb));
        let (sxj, syj) = (ex * self.slope(j, ca), -ex * self.slope(j, cb));
        let f = |p: f64, q: f64| (sxi * p - syi * q) * (sxj * p - syj * q) / (p + q).powf(1.0 + 2.0 * s);
        let w_rule: Vec<(f64, f64)> = mapped(0.0, 1.0, n).collect();
        let levels = opts.levels(3.0 - 2.0 * s);
        let (v, e) = graded(self.h, levels, n, |p| {
            w_rule.iter().map(|&(w, ww)| ww * p * (f(p, p * w) + f(p * w, p))).sum()
        });
        (v, e * 2 * n as u64)
    }

    fn distant_pair(&self, i: usize, j: usize, ca: usize, cb: usize, n: usize) -> (f64, u64) {
        let s = self.s;
        let (a0, b0) = (self.lo + ca as f64 * self.h, self.lo + cb as f64 * self.h);
        let xs: Vec<(f64, f64)> = mapped(a0, a0 + self.h, n).collect();
        let ys: Vec<(f64, f64)> = mapped(b0, b0 + self.h, n).collect();
        let mut acc = 0.0;
        for &(x, wx) in &xs {
            let (hix, hjx) = (self.hat(i, x), self.hat(j, x));
            for &(y, wy) in &ys {
                acc += wx * wy * (hix - self.hat(i, y)) * (hjx - self.hat(j, y)) / (x - y).abs().powf(1.0 + 2.0 * s);
            }
        }
        (acc, (n * n) as u64)
    }

    /// `∫_cell φ_i φ_j ω` with the exterior weight of the whole interval.
    fn exterior_cell(&self, i: usize, j: usize, c: usize, n: usize, opts: &OracleOptions) -> (f64, u64) {
        let s = self.s;
        let len = self.cells as f64 * self.h;
        let weight = |d_lo: f64, d_hi: f64| (d_lo.powf(-2.0 * s) + d_hi.powf(-2.0 * s)) / (2.0 * s);
        let levels = opts.levels(3.0 - 2.0 * s);
        if c == 0 {
            graded(self.h, levels, n, |d| {
                let x = self.lo + d;
                self.hat(i, x) * self.hat(j, x) * weight(d, len - d)
            })
        } else if c + 1 == self.cells {
            graded(self.h, levels, n, |d| {
                let x = self.lo + len - d;
                self.hat(i, x) * self.hat(j, x) * weight(len - d, d)
            })
        } else {
            let a = self.lo + c as f64 * self.h;
            let v = mapped(a, a + self.h, n)
                .map(|(x, w)| w * self.hat(i, x) * self.hat(j, x) * weight(x - self.lo, self.lo + len - x))
                .sum();
            (v, n as u64)
        }
    }
}

/// `(C(s)/2)∬σ̲(φ_i(x)-φ_i(y))(φ_j(x)-φ_j(y))|x-y|^{-1-2s}` for global nodes
/// `i`, `j` (1-based), with the exterior coefficient of each subinterval
/// equal to its own `σ`.
pub fn oracle_entry(mesh: &InterfaceMesh, i: usize, j: usize, coeff: &CoefficientField, s: f64) -> Result<f64> {
    oracle_entry_with(mesh, i, j, coeff, s, &OracleOptions::default())
}

pub fn oracle_entry_with(
    mesh: &InterfaceMesh,
    i: usize,
    j: usize,
    coeff: &CoefficientField,
    s: f64,
    opts: &OracleOptions,
) -> Result<f64> {
    let n = mesh.n_interior();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::domain(format!("node pair ({i}, {j}) outside 1..={n}")));
    }
    check_order(s)?;
    let m = mesh.m();
    let side = |c: usize| c < m;
    let pair = |a: usize, b: usize| match (side(a), side(b)) {
        (true, true) => coeff.sigma1,
        (false, false) => coeff.sigma2,
        _ => coeff.sigma3,
    };
    let ext = |c: usize| if side(c) { coeff.sigma1 } else { coeff.sigma2 };
    let problem = HatProblem { lo: 0.0, h: mesh.h(), cells: mesh.n_cells(), s, pair_sigma: &pair, exterior_sigma: &ext };
    let (i, j) = (i.min(j), i.max(j));
    Ok(0.5 * fractional_constant(s)? * converge(opts, |pts| problem.form(i, j, pts, opts))?)
}

/// Entry of the constant-coefficient matrix on one subinterval, local nodes
/// `1..=size`, zero exterior data outside the subinterval.
pub fn oracle_subdomain_entry(
    mesh: &InterfaceMesh,
    side: Subdomain,
    i: usize,
    j: usize,
    sigma: f64,
    s: f64,
) -> Result<f64> {
    let size = side.size(mesh);
    if i == 0 || j == 0 || i > size || j > size {
        return Err(Error::domain(format!("node pair ({i}, {j}) outside 1..={size}")));
    }
    check_order(s)?;
    let (lo, cells) = match side {
        Subdomain::Left => (0.0, mesh.m()),
        Subdomain::Right => (mesh.b_value(), mesh.n_cells() - mesh.m()),
    };
    let pair = |_: usize, _: usize| sigma;
    let ext = |_: usize| sigma;
    let problem = HatProblem { lo, h: mesh.h(), cells, s, pair_sigma: &pair, exterior_sigma: &ext };
    let opts = OracleOptions::default();
    let (i, j) = (i.min(j), i.max(j));
    Ok(0.5 * fractional_constant(s)? * converge(&opts, |pts| problem.form(i, j, pts, &opts))?)
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("s = {s} outside (0, 1)")))
    }
}

/// One-sided lifting energies and their weighted combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiQuantities {
    pub phi1: f64,
    pub phi2: f64,
    /// `(C(s)/2)(σ1 Φ1 + σ2 Φ2)`.
    pub c_star: f64,
}

/// `Φ_k = ∬_{I_k×I_k} |ψ(x)-ψ(y)|²/|x-y|^{1+2s} + 2∫_{I_k} ψ² ω` by direct
/// two-dimensional quadrature, for a lifting `ψ`.
pub fn oracle_phi_quantities(b: f64, sigma1: f64, sigma2: f64, s: f64, lifting: &dyn Lifting) -> Result<PhiQuantities> {
    oracle_phi_quantities_with(b, sigma1, sigma2, s, lifting, &OracleOptions { tol: 1e-8, max_evaluations: 50_000_000 })
}

pub fn oracle_phi_quantities_with(
    b: f64,
    sigma1: f64,
    sigma2: f64,
    s: f64,
    lifting: &dyn Lifting,
    opts: &OracleOptions,
) -> Result<PhiQuantities> {
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::domain(format!("lifting energies need 1/2 < s < 1, got {s}")));
    }
    if (lifting.b() - b).abs() > 0.0 {
        return Err(Error::config(format!("lifting interface {} differs from b = {b}", lifting.b())));
    }
    let phi1 = converge(opts, |n| one_side(b, s, n, opts, &|d| lifting.left(d)))?;
    let phi2 = converge(opts, |n| one_side(1.0 - b, s, n, opts, &|d| lifting.right(d)))?;
    let c = fractional_constant(s)?;
    Ok(PhiQuantities { phi1, phi2, c_star: 0.5 * c * (sigma1 * phi1 + sigma2 * phi2) })
}

/// `Φ` for a profile `g(d)` on `[0, len]`, `d` the distance to the outer boundary.
fn one_side(len: f64, s: f64, n: usize, opts: &OracleOptions, g: &dyn Fn(f64) -> f64) -> Tally {
    let mut t = Tally::default();
    // Gagliardo part: 2 ∫_0^len t^{-1-2s} ∫_0^{len-t} (g(y+t) - g(y))² dy dt.
    // Below `t_min` the inner integral is `A t² (1 + o(1))`; the outer
    // integral there is taken in closed form to avoid the roundoff of the
    // differences.
    let inner_levels = opts.levels(1.0 + s);
    let inner = |tt: f64| {
        let span = len - tt;
        let half = 0.5 * span;
        let f = |y: f64| {
            let d = g(y + tt) - g(y);
            d * d
        };
        let (a, e1) = graded(half, inner_levels, n, f);
        let (b, e2) = graded(half, inner_levels, n, |u| f(span - u));
        (a + b, e1 + e2)
    };
    let mut evals = 0u64;
    let half = 0.5 * len;
    let t_min = half * 0.5f64.powi(OUTER_CUTOFF_LEVELS as i32);
    let mut outer = |tt: f64| {
        let (v, e) = inner(tt);
        evals += e;
        v * tt.powf(-1.0 - 2.0 * s)
    };
    let mut near = 0.0;
    let mut hi = half;
    for _ in 0..OUTER_CUTOFF_LEVELS {
        let lo = 0.5 * hi;
        near += mapped(lo, hi, n).map(|(x, w)| w * outer(x)).sum::<f64>();
        hi = lo;
    }
    let (far, e2) = graded(half, inner_levels, n, |u| outer(len - u));
    let a = inner(t_min).0 / (t_min * t_min);
    let tail = a * t_min.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    t.add(2.0 * (near + far + tail), evals + e2 + (OUTER_CUTOFF_LEVELS * n) as u64);
    // Exterior part over ℝ∖(0,1), d ∈ [0, len] measured from the boundary.
    let w = |d: f64, d_other: f64| {
        let v = g(d);
        v * v * (d.powf(-2.0 * s) + (1.0 - len + d_other).powf(-2.0 * s)) / (2.0 * s)
    };
    let ext_levels = opts.levels(1.0);
    let (a, e1) = graded(half, ext_levels, n, |d| w(d, len - d));
    let (b, e2) = graded(half, ext_levels, n, |u| w(len - u, u));
    t.add(2.0 * (a + b), e1 + e2);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{bicher_entry, KernelParams};
    use crate::lifting::{phi_ratio_classical, FractionalLifting, LocalLifting};
    use crate::mesh::{build_mesh, RationalInterface};

    fn mesh(p: u64, q: u64, k: u32) -> InterfaceMesh {
        build_mesh(RationalInterface::new(p, q).unwrap(), k).unwrap()
    }

    #[test]
    fn disjoint_supports_without_cross_coefficient() {
        let me = mesh(1, 2, 2);
        let c = CoefficientField::new(1.0, 2.0, 0.0).unwrap();
        assert_eq!(oracle_entry(&me, 1, 7, &c, 0.75).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_matches_constant_coefficient_kernel() {
        let me = mesh(1, 2, 2);
        let s = 0.75;
        let c = CoefficientField::constant(1.0).unwrap();
        let o = oracle_entry(&me, 3, 3, &c, s).unwrap();
        let p = KernelParams::new(me.h(), s).unwrap();
        let k = 0.5 * fractional_constant(s).unwrap() * bicher_entry(&p, 0);
        assert!((o - k).abs() < 1e-6 * k.abs(), "{o} {k}");
    }

    #[test]
    fn symmetric_in_arguments() {
        let me = mesh(3, 4, 1);
        let c = CoefficientField::new(1.0, -0.5, 0.25).unwrap();
        let a = oracle_entry(&me, 2, 6, &c, 0.6).unwrap();
        let b = oracle_entry(&me, 6, 2, &c, 0.6).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn rejects_loose_budget_and_tolerance() {
        let me = mesh(1, 2, 2);
        let c = CoefficientField::constant(1.0).unwrap();
        let tight = OracleOptions { tol: 1e-12, max_evaluations: 1_000_000 };
        assert!(matches!(oracle_entry_with(&me, 1, 1, &c, 0.75, &tight), Err(Error::Domain(_))));
        let starved = OracleOptions { tol: 1e-10, max_evaluations: 10 };
        assert!(matches!(oracle_entry_with(&me, 1, 2, &c, 0.75, &starved), Err(Error::Convergence { .. })));
    }

    #[test]
    fn classical_ratio() {
        for (b, s) in [(0.5, 0.75), (0.3, 0.6), (0.75, 0.9)] {
            let l = LocalLifting::new(b).unwrap();
            let q = oracle_phi_quantities(b, 1.0, 1.0, s, &l).unwrap();
            let r = phi_ratio_classical(b, s).unwrap();
            assert!((q.phi1 / q.phi2 - r).abs() < 1e-5 * r, "b={b} s={s}: {} vs {r}", q.phi1 / q.phi2);
        }
    }

    #[test]
    fn interface_energy_two_routes() {
        let s = 0.75;
        let l = FractionalLifting::new(0.5, s).unwrap();
        let q = oracle_phi_quantities(0.5, 1.0, 1.0, s, &l).unwrap();
        let e = crate::assembly::interface_energy(0.5, 1.0, 1.0, s).unwrap();
        assert!((q.c_star - e.value).abs() < 1e-6 * e.value, "{} {}", q.c_star, e.value);
    }

    #[test]
    fn linear_in_sigma2() {
        let l = FractionalLifting::new(0.75, 0.7).unwrap();
        let a = oracle_phi_quantities(0.75, 1.0, 0.4, 0.7, &l).unwrap();
        let b = oracle_phi_quantities(0.75, 1.0, -0.4, 0.7, &l).unwrap();
        let c = oracle_phi_quantities(0.75, 1.0, 0.0, 0.7, &l).unwrap();
        assert!((a.c_star + b.c_star - 2.0 * c.c_star).abs() < 1e-12 * c.c_star.abs());
    }
}
