//! Interface liftings (the local piecewise-affine profile and its fractional
//! counterpart with `x^s`-type behaviour at the outer boundary) and the
//! scalar interface constants built from them.

use crate::error::{Error, Result};
use crate::kernel::{fractional_constant, BRANCH_TOL};
use crate::mesh::InterfaceMesh;
use crate::quadrature::integrate_graded_both;
use statrs::function::gamma::gamma;

const LEVELS: usize = 40;
const POINTS: usize = 7;

/// Common interface for profiles equal to 1 at `b` and 0 at the boundary.
pub trait Lifting: Sync {
    fn b(&self) -> f64;

    /// Value at `x = d` on the left subinterval, `d ∈ [0, b]`.
    fn left(&self, d: f64) -> f64;

    /// Value at `x = 1 - d` on the right subinterval, `d ∈ [0, 1-b]`.
    fn right(&self, d: f64) -> f64;

    fn value(&self, x: f64) -> f64 {
        let b = self.b();
        if !(0.0..=1.0).contains(&x) {
            0.0
        } else if x <= b {
            self.left(x)
        } else {
            self.right(1.0 - x)
        }
    }
}

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("interface b = {b} outside (0, 1)")))
    }
}

/// `x/b` on `[0, b]`, `(1-x)/(1-b)` on `[b, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLifting {
    b: f64,
}

impl LocalLifting {
    pub fn new(b: f64) -> Result<Self> {
        check_b(b)?;
        Ok(Self { b })
    }

    /// Slope on either side; undefined at `b`.
    pub fn deriv(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || x == self.b {
            return Err(Error::domain(format!("local lifting derivative undefined at x = {x}")));
        }
        Ok(if x < self.b { 1.0 / self.b } else { -1.0 / (1.0 - self.b) })
    }
}

impl Lifting for LocalLifting {
    fn b(&self) -> f64 {
        self.b
    }

    fn left(&self, d: f64) -> f64 {
        d / self.b
    }

    fn right(&self, d: f64) -> f64 {
        d / (1.0 - self.b)
    }
}

/// `(x/b)^s` on `[0, b]`, `((1-x)/(1-b))^s` on `[b, 1]`, for `1/2 < s < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalLifting {
    b: f64,
    s: f64,
}

impl FractionalLifting {
    pub fn new(b: f64, s: f64) -> Result<Self> {
        check_b(b)?;
        if !(s > 0.5 && s < 1.0) {
            return Err(Error::domain(format!("fractional lifting needs 1/2 < s < 1, got {s}")));
        }
        Ok(Self { b, s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Derivative at an interior point away from `0`, `b` and `1`.
    pub fn deriv(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) || x == self.b {
            return Err(Error::domain(format!("fractional lifting derivative undefined at x = {x}")));
        }
        Ok(if x < self.b { self.left_deriv(x) } else { -self.right_deriv(1.0 - x) })
    }

    /// `d/dx` of the left branch at `x = d`.
    pub fn left_deriv(&self, d: f64) -> f64 {
        self.s / self.b.powf(self.s) * d.powf(self.s - 1.0)
    }

    /// `-d/dx` of the right branch at `x = 1 - d`.
    pub fn right_deriv(&self, d: f64) -> f64 {
        self.s / (1.0 - self.b).powf(self.s) * d.powf(self.s - 1.0)
    }
}

impl Lifting for FractionalLifting {
    fn b(&self) -> f64 {
        self.b
    }

    fn left(&self, d: f64) -> f64 {
        (d / self.b).powf(self.s)
    }

    fn right(&self, d: f64) -> f64 {
        (d / (1.0 - self.b)).powf(self.s)
    }
}

/// Value of `(σ1(1-b) + σ2 b) / (b(1-b))` together with its criticality flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceConstant {
    pub value: f64,
    pub critical: bool,
}

pub fn c_tilde(b: f64, sigma1: f64, sigma2: f64) -> InterfaceConstant {
    let value = (sigma1 * (1.0 - b) + sigma2 * b) / (b * (1.0 - b));
    let scale = sigma1.abs() / b + sigma2.abs() / (1.0 - b);
    InterfaceConstant { value, critical: value.abs() <= 1e-12 * scale }
}

/// Ratio of the two one-sided interface energies of the local lifting.
pub fn phi_ratio_classical(b: f64, s: f64) -> Result<f64> {
    check_b(b)?;
    if !(s > 0.5 && s < 1.0) || (s - 0.5).abs() <= BRANCH_TOL {
        return Err(Error::domain(format!("classical interface ratio needs 1/2 < s < 1, got {s}")));
    }
    let c = 1.0 - b;
    let den = s * (1.0 - s) * (1.0 - 2.0 * s) * (3.0 - 2.0 * s);
    let q1 = b.powf(3.0 - 2.0 * s) / (b * b * (1.0 - s) * (3.0 - 2.0 * s));
    let q2 = c.powf(3.0 - 2.0 * s) / (c * c * (1.0 - s) * (3.0 - 2.0 * s));
    let r1 = b.powf(1.0 - 2.0 * s) / (s * (3.0 - 2.0 * s))
        + (c.powf(1.0 - 2.0 * s) * (-2.0 * b * b * s * s + 3.0 * b * b * s - b * b + 2.0 * b * s - b - 1.0) + 1.0)
            / (b * b * den);
    let r2 = c.powf(1.0 - 2.0 * s) / (s * (3.0 - 2.0 * s))
        + (b.powf(1.0 - 2.0 * s)
            * (-2.0 * b * b * s * s + 4.0 * b * s * s - 2.0 * s * s - 8.0 * b * s + 3.0 * b * b * s + 5.0 * s
                + 3.0 * b
                - b * b
                - 3.0)
            + 1.0)
            / (c * c * den);
    Ok((q1 + r1) / (q2 + r2))
}

/// Contribution of the two same-side Gagliardo integrals of the fractional
/// lifting to its energy, including the `C(s)/2` prefactor.
///
/// Each side reduces to `len^{1-2s} K(s)` with
/// `K(s) = ∬_{(0,1)²} |x^s - y^s|² |x-y|^{-1-2s} = 2∫_0^1 (1-u^s)²(1-u)^{-1-2s} du`,
/// evaluated through analytically continued Beta functions.
pub fn alpha2_closed_form(b: f64, sigma1: f64, sigma2: f64, s: f64) -> Result<f64> {
    check_b(b)?;
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::domain(format!("alpha2 needs 1/2 < s < 1, got {s}")));
    }
    let c = fractional_constant(s)?;
    Ok(0.5 * c * self_energy_unit(s) * (sigma1 * b.powf(1.0 - 2.0 * s) + sigma2 * (1.0 - b).powf(1.0 - 2.0 * s)))
}

/// `K(s)` above.
pub fn self_energy_unit(s: f64) -> f64 {
    2.0 * (-1.0 / (2.0 * s) + gamma(-2.0 * s) * (gamma(2.0 * s + 1.0) - 2.0 * gamma(s + 1.0) / gamma(1.0 - s)))
}

/// The product formula `(C(s)s²/(4(1-s)))[σ1 b^{1-2s} + σ2 (1-b)^{1-2s}](1+Γ(2s-1)Γ(3-2s))`
/// in product form. It shares the `s → 1` limit of
/// [`alpha2_closed_form`] but differs from it by `O(1-s)`.
pub fn alpha2_product_formula(b: f64, sigma1: f64, sigma2: f64, s: f64) -> Result<f64> {
    check_b(b)?;
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::domain(format!("alpha2 needs 1/2 < s < 1, got {s}")));
    }
    let c = fractional_constant(s)?;
    let g = 1.0 + gamma(2.0 * s - 1.0) * gamma(3.0 - 2.0 * s);
    Ok(c * s * s / (4.0 * (1.0 - s)) * (sigma1 * b.powf(1.0 - 2.0 * s) + sigma2 * (1.0 - b).powf(1.0 - 2.0 * s)) * g)
}

/// `(∫_{I1} φˢ² ω, ∫_{I2} φˢ² ω)` with `ω(x) = (x^{-2s} + (1-x)^{-2s})/(2s)`.
pub fn exterior_integrals(l: &FractionalLifting) -> (f64, f64) {
    let (b, s) = (l.b, l.s);
    let c = 1.0 - b;
    // Left: x = d0, 1 - x = (1-b) + d1 where d1 = b - x.
    let left = integrate_graded_both(b, LEVELS, POINTS, |d0, d1| (d0 / b).powf(2.0 * s) * (c + d1).powf(-2.0 * s));
    let right = integrate_graded_both(c, LEVELS, POINTS, |d0, d1| (d0 / c).powf(2.0 * s) * (b + d1).powf(-2.0 * s));
    ((b.powf(1.0 - 2.0 * s) + left) / (2.0 * s), (c.powf(1.0 - 2.0 * s) + right) / (2.0 * s))
}

/// Exterior part `C(s) ∫ σ φˢ² ω` of the lifting energy.
pub fn alpha1(l: &FractionalLifting, sigma1: f64, sigma2: f64) -> Result<f64> {
    let (e1, e2) = exterior_integrals(l);
    Ok(fractional_constant(l.s)? * (sigma1 * e1 + sigma2 * e2))
}

/// Nodal values `φˢ(x_j)`, `j = 1..=N_h` (entry `j-1`).
pub fn interpolant_coeffs(mesh: &InterfaceMesh, l: &FractionalLifting) -> Result<Vec<f64>> {
    if mesh.b_value() != l.b {
        return Err(Error::config(format!("mesh interface {} differs from lifting interface {}", mesh.b_value(), l.b)));
    }
    let n = mesh.n_cells();
    Ok((1..n)
        .map(|j| if j == mesh.m() { 1.0 } else if j < mesh.m() { l.left(mesh.node(j)) } else { l.right((n - j) as f64 * mesh.h()) })
        .collect())
}

/// Full `H¹(0,1)` distance between the fractional and local liftings.
pub fn h1_distance(b: f64, s: f64) -> Result<f64> {
    let fl = FractionalLifting::new(b, s)?;
    let c = 1.0 - b;
    let side = |len: f64, val: &dyn Fn(f64) -> f64, der: &dyn Fn(f64) -> f64| {
        integrate_graded_both(len, LEVELS, POINTS, |d, _| {
            let e = val(d) - d / len;
            let de = der(d) - 1.0 / len;
            e * e + de * de
        })
    };
    let left = side(b, &|d| fl.left(d), &|d| fl.left_deriv(d));
    let right = side(c, &|d| fl.right(d), &|d| fl.right_deriv(d));
    Ok((left + right).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, RationalInterface};

    #[test]
    fn local_lifting_values() {
        let l = LocalLifting::new(0.7).unwrap();
        assert!((l.value(0.35) - 0.5).abs() < 1e-15);
        assert_eq!(l.value(0.7), 1.0);
        assert_eq!(l.value(1.0), 0.0);
        assert!(l.deriv(0.7).is_err());
    }

    #[test]
    fn fractional_lifting_values() {
        let l = FractionalLifting::new(0.7, 0.8).unwrap();
        assert!((l.value(0.35) - 0.5f64.powf(0.8)).abs() < 1e-15);
        assert!((l.value(0.35) - 0.5743492).abs() < 1e-7);
        assert_eq!(l.value(0.7), 1.0);
        assert_eq!(l.value(0.0), 0.0);
        assert_eq!(l.value(1.0), 0.0);
        for x in [0.0, 0.7, 1.0] {
            assert!(l.deriv(x).is_err());
        }
        let d = l.deriv(0.35).unwrap();
        assert!((d - 0.8 / 0.7f64.powf(0.8) * 0.35f64.powf(-0.2)).abs() < 1e-14);
        assert!(l.deriv(0.9).unwrap() < 0.0);
    }

    #[test]
    fn fractional_lifting_near_local() {
        for s in [0.99, 0.999] {
            let l = FractionalLifting::new(0.5, s).unwrap();
            assert!((l.value(0.25) - 0.5).abs() <= 0.5 * (1.0 - s));
        }
    }

    #[test]
    fn c_tilde_examples() {
        assert_eq!(c_tilde(0.5, 1.0, 1.0).value, 4.0);
        assert_eq!(c_tilde(0.5, 1.0, -0.5).value, 1.0);
        let k = c_tilde(0.5, 1.0, -1.0);
        assert_eq!(k.value, 0.0);
        assert!(k.critical);
        assert!(!c_tilde(0.75, 1.0, -1.0).critical);
    }

    #[test]
    fn ratio_is_one_at_half() {
        for s in [0.55, 0.6, 0.75, 0.9, 0.99] {
            assert!((phi_ratio_classical(0.5, s).unwrap() - 1.0).abs() < 1e-12, "s={s}");
        }
        assert!(phi_ratio_classical(0.5, 0.5).is_err());
    }

    #[test]
    fn ratio_local_limit() {
        let r = phi_ratio_classical(0.7, 1.0 - 1e-6).unwrap();
        assert!((r - 3.0 / 7.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn self_energy_values() {
        // High-precision quadrature of 2∫(1-u^s)²(1-u)^{-1-2s}.
        for (s, k) in [(0.6, 1.206708608332894), (0.75, 2.5535715043750687), (0.9, 8.289286832474439)] {
            assert!((self_energy_unit(s) - k).abs() < 1e-7 * k, "{s}");
        }
        let a = alpha2_closed_form(0.5, 1.0, 1.0, 0.999).unwrap();
        let p = alpha2_product_formula(0.5, 1.0, 1.0, 0.999).unwrap();
        assert!((a - p).abs() < 1e-2);
    }

    #[test]
    fn alpha2_linear_and_limit() {
        let s = 0.8;
        let a = alpha2_closed_form(0.3, 1.0, 0.0, s).unwrap();
        let b = alpha2_closed_form(0.3, 0.0, 1.0, s).unwrap();
        let ab = alpha2_closed_form(0.3, 2.5, -1.5, s).unwrap();
        assert!((ab - (2.5 * a - 1.5 * b)).abs() < 1e-13 * ab.abs().max(1.0));
        let g1 = (alpha2_closed_form(0.5, 1.0, 1.0, 0.99).unwrap() - 4.0).abs();
        let g2 = (alpha2_closed_form(0.5, 1.0, 1.0, 0.999).unwrap() - 4.0).abs();
        assert!(g1 / g2 > 7.0 && g1 / g2 < 13.0, "{g1} {g2}");
    }

    #[test]
    fn interpolant_example() {
        let mesh = build_mesh(RationalInterface::new(1, 2).unwrap(), 1).unwrap();
        let l = FractionalLifting::new(0.5, 0.75).unwrap();
        let v = interpolant_coeffs(&mesh, &l).unwrap();
        let e = 0.5f64.powf(0.75);
        assert_eq!(v.len(), 3);
        assert!((v[0] - e).abs() < 1e-15 && v[1] == 1.0 && (v[2] - e).abs() < 1e-15);
        let other = FractionalLifting::new(0.25, 0.75).unwrap();
        assert!(interpolant_coeffs(&mesh, &other).is_err());
    }

    #[test]
    fn interpolant_range() {
        let mesh = build_mesh(RationalInterface::new(3, 4).unwrap(), 4).unwrap();
        let l = FractionalLifting::new(0.75, 0.6).unwrap();
        let v = interpolant_coeffs(&mesh, &l).unwrap();
        assert!(v.iter().all(|&x| x > 0.0 && x <= 1.0));
        assert_eq!(v[mesh.m() - 1], 1.0);
    }

    #[test]
    fn h1_distance_decays_linearly() {
        let ratios: Vec<f64> = [0.9, 0.95, 0.99, 0.995]
            .iter()
            .map(|&s| h1_distance(0.3, s).unwrap() / (1.0 - s))
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 3.0, "{ratios:?}");
    }

    #[test]
    fn exterior_integral_symmetry() {
        let (e1, e2) = exterior_integrals(&FractionalLifting::new(0.5, 0.7).unwrap());
        assert!((e1 - e2).abs() < 1e-12 * e1);
    }
}
