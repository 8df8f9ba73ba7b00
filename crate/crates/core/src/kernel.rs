//! Closed-form building blocks of the P1 fractional stiffness matrix on a
//! uniform mesh.
//!
//! Everything is evaluated at unit mesh size and rescaled by `h^(1-2s)`.
//! Near `s = 1/2` the generic expressions carry a removable `1/(1-2s)`
//! singularity, so within [`BRANCH_TOL`] the logarithmic limits are used.
//!
//! The generic expressions are high-order finite differences of
//! `k^(3-2s)`; for offsets beyond [`FAR_OFFSET`] cells they lose all
//! significant digits when `s` is close to 1, so there the same quantities
//! are obtained from their defining integrals with Gauss–Legendre rules
//! (the integrands are smooth because the supports are separated).
//!
//! ```
//! use fractrans_core::kernel::{bicher_entry, KernelParams};
//! let p = KernelParams::new(1.0, 0.5).unwrap();
//! let d = bicher_entry(&p, 0);
//! assert!((d - 8.0 * std::f64::consts::LN_2).abs() < 1e-14);
//! ```

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use statrs::function::gamma::gamma;
use std::f64::consts::{LN_2, PI};

/// `|s - 1/2|` at or below which the logarithmic formulas are used.
pub const BRANCH_TOL: f64 = 1e-7;

/// Offsets (in cells) above which far quantities are integrated numerically.
pub const FAR_OFFSET: f64 = 6.5;

const FAR_POINTS: usize = 16;

fn ln3() -> f64 {
    3f64.ln()
}

/// `x^e` for `x >= 0`, `e > 0`, with `0^e = 0`.
fn pw(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (e * x.ln()).exp()
    }
}

/// `x^2 log x` extended by 0 at the origin.
fn x2logx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x * x.ln()
    }
}

/// `2^{2s} s Γ(s+1/2) / (√π Γ(1-s))`, the normalising constant of the
/// integral fractional Laplacian.
pub fn fractional_constant(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("fractional order s = {s} outside (0, 1)")));
    }
    Ok(pw(2.0, 2.0 * s) * s * gamma(s + 0.5) / (PI.sqrt() * gamma(1.0 - s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Generic,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    h: f64,
    s: f64,
    branch: Branch,
}

impl KernelParams {
    /// Accepts `0 < h <= 1` (unit size is the reference scale) and `0 < s < 1`.
    pub fn new(h: f64, s: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::domain(format!("mesh size h = {h} outside (0, 1]")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!("fractional order s = {s} outside (0, 1)")));
        }
        let branch = if (s - 0.5).abs() <= BRANCH_TOL { Branch::Half } else { Branch::Generic };
        Ok(Self { h, s, branch })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn is_half(&self) -> bool {
        self.branch == Branch::Half
    }

    /// `h^(1-2s)`; exactly 1 on the half branch.
    pub fn scale(&self) -> f64 {
        match self.branch {
            Branch::Half => 1.0,
            Branch::Generic => pw(self.h, 1.0 - 2.0 * self.s),
        }
    }

    /// Order used inside the kernel formulas (1/2 on the half branch).
    fn s_eff(&self) -> f64 {
        match self.branch {
            Branch::Half => 0.5,
            Branch::Generic => self.s,
        }
    }

    /// `H(1, s)`, generic branch only.
    fn unit_big_h(&self) -> f64 {
        let s = self.s;
        1.0 / (2.0 * s * (1.0 - s) * (1.0 - 2.0 * s) * (3.0 - 2.0 * s))
    }
}

/// The eight auxiliary quantities entering the diagonal and first
/// off-diagonal entries. `big_h` is undefined (None) on the half branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValueSet {
    pub big_h: Option<f64>,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    pub h5: f64,
    pub h6: f64,
    pub h7: f64,
}

impl KernelValueSet {
    pub fn sum_h1_to_h4(&self) -> f64 {
        self.h1 + self.h2 + self.h3 + self.h4
    }
}

pub fn eval_h_family(p: &KernelParams) -> KernelValueSet {
    let c = p.scale();
    match p.branch {
        Branch::Half => {
            let (l2, l3) = (LN_2, ln3());
            KernelValueSet {
                big_h: None,
                h1: c,
                h2: c * (-5.0 + 8.0 * l2),
                h3: c,
                h4: c * (3.0 - 4.0 * l2),
                h5: c,
                h6: -c,
                h7: c * (1.0 - 16.0 * l2 + 9.0 * l3),
            }
        }
        Branch::Generic => {
            let s = p.s;
            let hh = p.unit_big_h();
            let two = |e: f64| pw(2.0, e);
            KernelValueSet {
                big_h: Some(c * hh),
                h1: c / (s * (3.0 - 2.0 * s)),
                h2: c * 2.0 * hh * (-2.0 * s * s + 7.0 * s - 7.0 + two(3.0 - 2.0 * s)),
                h3: c / ((1.0 - s) * (3.0 - 2.0 * s)),
                h4: c * 2.0 * hh * (2.0 * s * s - 5.0 * s + 4.0 - two(2.0 - 2.0 * s)),
                h5: c / (2.0 * s * (1.0 - s) * (3.0 - 2.0 * s)),
                h6: c * (s - 2.0 + two(1.0 - 2.0 * s)) / (s * (1.0 - s) * (3.0 - 2.0 * s)),
                h7: c * hh
                    * (4.0 * s * s - s * (14.0 - two(4.0 - 2.0 * s)) + 13.0 + pw(3.0, 3.0 - 2.0 * s)
                        - 5.0 * two(3.0 - 2.0 * s)),
            }
        }
    }
}

fn check_offset(r: f64, h: f64, what: &str) -> Result<f64> {
    let rho = r / h;
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(Error::domain(format!("{what} requires r > h (r = {r}, h = {h})")));
    }
    Ok(rho)
}

/// Exterior correction for a full hat centred at distance `r` from a half-line.
pub fn eval_s1(p: &KernelParams, r: f64) -> Result<f64> {
    let rho = check_offset(r, p.h, "S1")?;
    Ok(p.scale() * unit_s1(p, rho))
}

/// Exterior correction for two neighbouring hats; `r` is the distance from
/// the half-line to the farther node.
pub fn eval_s2(p: &KernelParams, r: f64) -> Result<f64> {
    let rho = check_offset(r, p.h, "S2")?;
    Ok(p.scale() * unit_s2(p, rho))
}

/// Interaction of the left half of a hat with a full hat `k >= 2` cells away.
pub fn eval_l1(p: &KernelParams, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain(format!("L1 requires k >= 2, got {k}")));
    }
    Ok(p.scale() * unit_l1(p, k))
}

/// Interaction of the right half of a hat with a full hat `k >= 2` cells away.
pub fn eval_l2(p: &KernelParams, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain(format!("L2 requires k >= 2, got {k}")));
    }
    Ok(p.scale() * unit_l2(p, k))
}

/// `(1/s)∫_0^h (1 - t/h)^2 (r + t)^{-2s} dt`: exterior weight of one half of a
/// hat whose peak sits at distance `r > 0` from a half-line.
pub fn eval_half_hat_tail(p: &KernelParams, r: f64) -> Result<f64> {
    let rho = r / p.h;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("half-hat tail requires r > 0 (r = {r})")));
    }
    Ok(p.scale() * unit_half_hat_tail(p, rho))
}

/// Constant-coefficient stiffness entry (without the `C(s)/2` factor) for
/// two hats `k` cells apart.
pub fn bicher_entry(p: &KernelParams, k: usize) -> f64 {
    p.scale() * unit_bicher(p, k)
}

pub(crate) fn unit_s1(p: &KernelParams, rho: f64) -> f64 {
    if rho > FAR_OFFSET {
        let s = p.s_eff();
        let f = |t: f64| (1.0 - t.abs()).powi(2) * pw(rho + t, -2.0 * s);
        return (integrate(-1.0, 0.0, FAR_POINTS, f) + integrate(0.0, 1.0, FAR_POINTS, f)) / s;
    }
    match p.branch {
        Branch::Half => {
            -2.0 * x2logx(rho - 1.0) + 2.0 * (1.0 + rho).powi(2) * (1.0 + rho).ln()
                - 8.0 * rho * (rho.ln() + 0.5)
        }
        Branch::Generic => {
            let s = p.s;
            let e = 3.0 - 2.0 * s;
            2.0 * p.unit_big_h()
                * (pw(1.0 + rho, e) + 2.0 * pw(rho, 2.0 - 2.0 * s) * (2.0 * s - 3.0) - pw(rho - 1.0, e))
        }
    }
}

pub(crate) fn unit_s2(p: &KernelParams, rho: f64) -> f64 {
    if rho > FAR_OFFSET {
        let s = p.s_eff();
        return -integrate(0.0, 1.0, FAR_POINTS, |t| t * (1.0 - t) * pw(rho - 1.0 + t, -2.0 * s)) / s;
    }
    match p.branch {
        Branch::Half => {
            let near = if rho == 1.0 { 0.0 } else { 2.0 * rho * (1.0 - rho) * (rho - 1.0).ln() };
            near + 2.0 * rho * rho.ln() * (rho - 1.0) + (1.0 - 2.0 * rho)
        }
        Branch::Generic => {
            let s = p.s;
            let f = 2.0 - 2.0 * s;
            p.unit_big_h()
                * (pw(rho, f) * (2.0 * s - 3.0 + 2.0 * rho) + pw(rho - 1.0, f) * (2.0 * s - 1.0 - 2.0 * rho))
        }
    }
}

pub(crate) fn unit_half_hat_tail(p: &KernelParams, rho: f64) -> f64 {
    if rho > FAR_OFFSET {
        let s = p.s_eff();
        return integrate(0.0, 1.0, FAR_POINTS, |t| (1.0 - t).powi(2) * pw(rho + t, -2.0 * s)) / s;
    }
    let a = rho + 1.0;
    match p.branch {
        Branch::Half => {
            let f = |u: f64| a * a * u.ln() - 2.0 * a * u + 0.5 * u * u;
            2.0 * (f(rho + 1.0) - f(rho))
        }
        Branch::Generic => {
            let s = p.s;
            let f = |u: f64| {
                a * a * pw(u, 1.0 - 2.0 * s) / (1.0 - 2.0 * s) - 2.0 * a * pw(u, 2.0 - 2.0 * s) / (2.0 - 2.0 * s)
                    + pw(u, 3.0 - 2.0 * s) / (3.0 - 2.0 * s)
            };
            (f(rho + 1.0) - f(rho)) / s
        }
    }
}

/// `-2 ∫_{y∈half} w(y) ∫_{-1}^{1} (1-|t|) (k+t-y)^{-1-2s} dt dy` where the
/// half is `[-1,0]` with `w = 1+y` (left) or `[0,1]` with `w = 1-y` (right).
fn far_half_interaction(p: &KernelParams, k: f64, left: bool) -> f64 {
    let e = -1.0 - 2.0 * p.s_eff();
    let (y0, y1) = if left { (-1.0, 0.0) } else { (0.0, 1.0) };
    let weight = |y: f64| if left { 1.0 + y } else { 1.0 - y };
    -2.0 * integrate(y0, y1, FAR_POINTS, |y| {
        let inner = |t: f64| (1.0 - t.abs()) * pw(k + t - y, e);
        weight(y) * (integrate(-1.0, 0.0, FAR_POINTS, inner) + integrate(0.0, 1.0, FAR_POINTS, inner))
    })
}

pub(crate) fn unit_l1(p: &KernelParams, k: usize) -> f64 {
    let kf = k as f64;
    if kf > FAR_OFFSET {
        return far_half_interaction(p, kf, true);
    }
    match p.branch {
        Branch::Half => {
            (1.0 - kf * kf) * (kf - 1.0).ln() + (-3.0 * kf * kf - 8.0 * kf - 5.0) * (kf + 1.0).ln()
                + (kf + 2.0).powi(2) * (kf + 2.0).ln()
                + 3.0 * kf * (kf + 4.0 / 3.0) * kf.ln()
        }
        Branch::Generic => {
            let s = p.s;
            let (e, f) = (3.0 - 2.0 * s, 2.0 - 2.0 * s);
            p.unit_big_h()
                * (3.0 * pw(kf, e) - 2.0 * pw(kf + 1.0, e) + pw(kf + 2.0, e)
                    - (kf - 2.0 * s + 2.0) * pw(kf - 1.0, f)
                    + (6.0 - 4.0 * s) * pw(kf, f)
                    - (kf - 2.0 * s + 4.0) * pw(kf + 1.0, f))
        }
    }
}

pub(crate) fn unit_l2(p: &KernelParams, k: usize) -> f64 {
    let kf = k as f64;
    if kf > FAR_OFFSET {
        return far_half_interaction(p, kf, false);
    }
    match p.branch {
        Branch::Half => {
            if k == 2 {
                return 4.0 * LN_2 - 3.0 * ln3();
            }
            x2logx(kf - 2.0) + (-3.0 * kf * kf + 8.0 * kf - 5.0) * (kf - 1.0).ln()
                + (1.0 - kf * kf) * (kf + 1.0).ln()
                + 3.0 * kf * (kf - 4.0 / 3.0) * kf.ln()
        }
        Branch::Generic => {
            let s = p.s;
            let (e, f) = (3.0 - 2.0 * s, 2.0 - 2.0 * s);
            p.unit_big_h()
                * (pw(kf - 2.0, e) - 2.0 * pw(kf - 1.0, e) + 3.0 * pw(kf, e)
                    - (kf + 2.0 * s - 4.0) * pw(kf - 1.0, f)
                    + (4.0 * s - 6.0) * pw(kf, f)
                    - (kf + 2.0 * s - 2.0) * pw(kf + 1.0, f))
        }
    }
}

pub(crate) fn unit_bicher(p: &KernelParams, k: usize) -> f64 {
    let kf = k as f64;
    if kf > FAR_OFFSET {
        return far_half_interaction(p, kf, true) + far_half_interaction(p, kf, false);
    }
    match p.branch {
        Branch::Half => {
            let (l2, l3) = (LN_2, ln3());
            match k {
                0 => 8.0 * l2,
                1 => 9.0 * l3 - 16.0 * l2,
                2 => 56.0 * l2 - 36.0 * l3,
                _ => {
                    x2logx(kf - 2.0) - 4.0 * x2logx(kf - 1.0) + 6.0 * x2logx(kf) - 4.0 * x2logx(kf + 1.0)
                        + x2logx(kf + 2.0)
                }
            }
        }
        Branch::Generic => {
            let s = p.s;
            let hh = p.unit_big_h();
            let e = 3.0 - 2.0 * s;
            match k {
                0 => hh * (pw(2.0, 4.0 - 2.0 * s) - 8.0),
                1 => hh * (pw(3.0, e) + 7.0 - pw(2.0, 5.0 - 2.0 * s)),
                _ => {
                    hh * (6.0 * pw(kf, e) + pw(kf + 2.0, e) + pw(kf - 2.0, e)
                        - 4.0 * pw(kf + 1.0, e)
                        - 4.0 * pw(kf - 1.0, e))
                }
            }
        }
    }
}
