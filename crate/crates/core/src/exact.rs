//! Closed-form solution of the local transmission problem
//! `-(σ u')' = x^α` on `(0, 1)`, `u(0) = u(1) = 0`, with `σ = σ1` left of `b`
//! and `σ2` right of it.

use crate::assembly::local_lifting_load;
use crate::error::{Error, Result};
use crate::lifting::c_tilde;
use crate::problem::SourceTerm;

const CRITICAL_TOL: f64 = 1e-12;
const NEAR_CRITICAL_TOL: f64 = 1e-6;

/// `u1(x) = -x^{α+2}/(σ1(α+1)(α+2)) + λx` on `[0, b]` and
/// `u2(x) = (1 - x^{α+2})/(σ2(α+1)(α+2)) + (σ1 λ/σ2)(x - 1)` on `[b, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExactSolution {
    pub b: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// Set when the contrast is within `1e-6` (relative) of the critical one.
    pub near_critical: bool,
}

/// Relative size of `σ1(1-b) + σ2 b`.
fn contrast_defect(b: f64, sigma1: f64, sigma2: f64) -> f64 {
    (sigma1 * (1.0 - b) + sigma2 * b).abs() / (sigma1.abs() * (1.0 - b) + sigma2.abs() * b)
}

/// Errors with [`Error::CriticalContrast`] when `|σ2|/σ1 = (1-b)/b`.
pub fn check_contrast(b: f64, sigma1: f64, sigma2: f64) -> Result<bool> {
    let d = contrast_defect(b, sigma1, sigma2);
    if d <= CRITICAL_TOL {
        return Err(Error::CriticalContrast { b, sigma1, sigma2 });
    }
    Ok(d <= NEAR_CRITICAL_TOL)
}

pub fn build_exact(b: f64, sigma1: f64, sigma2: f64, alpha: f64) -> Result<LocalExactSolution> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::domain(format!("interface b = {b} outside (0, 1)")));
    }
    if sigma1 == 0.0 || sigma2 == 0.0 {
        return Err(Error::domain("sigma1 and sigma2 must be nonzero"));
    }
    SourceTerm::monomial(alpha)?;
    let near_critical = check_contrast(b, sigma1, sigma2)?;
    let bp = b.powf(alpha + 2.0);
    let lambda = (sigma1 * (1.0 - bp) + sigma2 * bp)
        / (sigma1 * (alpha + 1.0) * (alpha + 2.0) * (sigma1 * (1.0 - b) + sigma2 * b));
    Ok(LocalExactSolution { b, sigma1, sigma2, alpha, lambda, near_critical })
}

impl LocalExactSolution {
    fn k(&self) -> f64 {
        (self.alpha + 1.0) * (self.alpha + 2.0)
    }

    pub fn u1(&self, x: f64) -> f64 {
        -x.powf(self.alpha + 2.0) / (self.sigma1 * self.k()) + self.lambda * x
    }

    pub fn u2(&self, x: f64) -> f64 {
        (1.0 - x.powf(self.alpha + 2.0)) / (self.sigma2 * self.k()) + self.sigma1 * self.lambda / self.sigma2 * (x - 1.0)
    }

    pub fn du1(&self, x: f64) -> f64 {
        -x.powf(self.alpha + 1.0) / (self.sigma1 * (self.alpha + 1.0)) + self.lambda
    }

    pub fn du2(&self, x: f64) -> f64 {
        -x.powf(self.alpha + 1.0) / (self.sigma2 * (self.alpha + 1.0)) + self.sigma1 * self.lambda / self.sigma2
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= self.b {
            self.u1(x)
        } else {
            self.u2(x)
        }
    }

    /// One-sided derivative; the left branch is used at `b`.
    pub fn deriv(&self, x: f64) -> f64 {
        if x <= self.b {
            self.du1(x)
        } else {
            self.du2(x)
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        let sigma = if x <= self.b { self.sigma1 } else { self.sigma2 };
        -x.powf(self.alpha) / sigma
    }

    pub fn interface_value(&self) -> f64 {
        self.u1(self.b)
    }
}

/// `(∫ f φ)/c̃` for the local lifting `φ`, checked against [`build_exact`].
pub fn interface_value_identity(b: f64, sigma1: f64, sigma2: f64, f: &SourceTerm) -> Result<f64> {
    let exact = build_exact(b, sigma1, sigma2, f.alpha())?;
    let ct = c_tilde(b, sigma1, sigma2);
    let v = local_lifting_load(f, b) / ct.value;
    let bound = 1e-10 * v.abs().max(1e-300);
    let gap = (v - exact.interface_value()).abs();
    if gap > bound {
        return Err(Error::Residual { residual: gap, bound });
    }
    Ok(v)
}
