//! Problem data: coefficients, source term, and model selection.

use crate::error::{Error, Result};
use crate::mesh::RationalInterface;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Piecewise-constant coefficients: `σ1` on the left, `σ2` on the right and
/// `σ3` for interactions across the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientField {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
}

impl CoefficientField {
    pub fn new(sigma1: f64, sigma2: f64, sigma3: f64) -> Result<Self> {
        if sigma1 == 0.0 || sigma2 == 0.0 || !sigma1.is_finite() || !sigma2.is_finite() || !sigma3.is_finite() {
            return Err(Error::domain(format!(
                "coefficients must be finite with sigma1, sigma2 nonzero (got {sigma1}, {sigma2}, {sigma3})"
            )));
        }
        Ok(Self { sigma1, sigma2, sigma3 })
    }

    pub fn constant(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma, sigma)
    }
}

/// `f(x) = x^α` with `α > -1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceTerm {
    alpha: f64,
}

impl SourceTerm {
    pub fn monomial(alpha: f64) -> Result<Self> {
        if !(alpha > -0.5) || !alpha.is_finite() {
            return Err(Error::domain(format!("source exponent alpha = {alpha} must exceed -1/2")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.alpha == 0.0 {
            1.0
        } else {
            x.powf(self.alpha)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ModelKind {
    LocalExact,
    LocalFem,
    Old,
    New,
    Simplified,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::LocalExact, ModelKind::LocalFem, ModelKind::Old, ModelKind::New, ModelKind::Simplified];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LocalExact => "local-exact",
            ModelKind::LocalFem => "local-fem",
            ModelKind::Old => "old",
            ModelKind::New => "new",
            ModelKind::Simplified => "simplified",
        }
    }

    /// Whether the solution carries a fractional-lifting term.
    pub fn is_reconstructed(&self) -> bool {
        matches!(self, ModelKind::New | ModelKind::Simplified)
    }

    pub fn is_fractional(&self) -> bool {
        matches!(self, ModelKind::Old | ModelKind::New | ModelKind::Simplified)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == t)
            .ok_or_else(|| Error::Parse(format!("unknown model '{s}'")))
    }
}

/// How the cross coefficient is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Sigma3Policy {
    Zero,
    Average,
    Value(f64),
}

impl Sigma3Policy {
    pub fn resolve(&self, sigma1: f64, sigma2: f64) -> f64 {
        match *self {
            Sigma3Policy::Zero => 0.0,
            Sigma3Policy::Average => 0.5 * (sigma1 + sigma2),
            Sigma3Policy::Value(v) => v,
        }
    }
}

impl FromStr for Sigma3Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(Sigma3Policy::Zero),
            "avg" | "average" => Ok(Sigma3Policy::Average),
            other => other
                .parse::<f64>()
                .map(Sigma3Policy::Value)
                .map_err(|_| Error::Parse(format!("sigma3 must be a number, 'avg' or 'zero', got '{s}'"))),
        }
    }
}

impl fmt::Display for Sigma3Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma3Policy::Zero => f.write_str("zero"),
            Sigma3Policy::Average => f.write_str("avg"),
            Sigma3Policy::Value(v) => write!(f, "{v}"),
        }
    }
}

/// One problem instance, independent of the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub b: RationalInterface,
    pub sigma1: f64,
    pub sigma2: f64,
    /// `None` selects the model default: average for the old model, zero otherwise.
    pub sigma3: Option<Sigma3Policy>,
    pub alpha: f64,
    pub s: f64,
}

impl ProblemConfig {
    pub fn source(&self) -> Result<SourceTerm> {
        SourceTerm::monomial(self.alpha)
    }

    /// Cross coefficient actually used by `kind`.
    pub fn sigma3_for(&self, kind: ModelKind) -> Result<f64> {
        match kind {
            ModelKind::Old => Ok(self.sigma3.unwrap_or(Sigma3Policy::Average).resolve(self.sigma1, self.sigma2)),
            ModelKind::New | ModelKind::Simplified => {
                let v = self.sigma3.unwrap_or(Sigma3Policy::Zero).resolve(self.sigma1, self.sigma2);
                if v != 0.0 {
                    return Err(Error::config(format!("the {kind} model requires sigma3 = 0, got {v}")));
                }
                Ok(0.0)
            }
            ModelKind::LocalExact | ModelKind::LocalFem => Ok(0.0),
        }
    }

    pub fn coefficients_for(&self, kind: ModelKind) -> Result<CoefficientField> {
        CoefficientField::new(self.sigma1, self.sigma2, self.sigma3_for(kind)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma3_defaults() {
        let cfg = ProblemConfig {
            b: RationalInterface::new(1, 2).unwrap(),
            sigma1: 1.0,
            sigma2: -0.5,
            sigma3: None,
            alpha: 0.0,
            s: 0.75,
        };
        assert_eq!(cfg.sigma3_for(ModelKind::Old).unwrap(), 0.25);
        assert_eq!(cfg.sigma3_for(ModelKind::New).unwrap(), 0.0);
        let explicit = ProblemConfig { sigma3: Some(Sigma3Policy::Value(0.3)), ..cfg };
        assert!(explicit.sigma3_for(ModelKind::Simplified).is_err());
        assert_eq!(explicit.sigma3_for(ModelKind::Old).unwrap(), 0.3);
    }

    #[test]
    fn parsing() {
        assert_eq!("local-fem".parse::<ModelKind>().unwrap(), ModelKind::LocalFem);
        assert_eq!("SIMPLIFIED".parse::<ModelKind>().unwrap(), ModelKind::Simplified);
        assert!("newest".parse::<ModelKind>().is_err());
        assert_eq!("avg".parse::<Sigma3Policy>().unwrap(), Sigma3Policy::Average);
        assert_eq!("0.25".parse::<Sigma3Policy>().unwrap(), Sigma3Policy::Value(0.25));
    }

    #[test]
    fn source_admissibility() {
        assert!(SourceTerm::monomial(-0.5).is_err());
        assert!(SourceTerm::monomial(-0.4).is_ok());
        assert_eq!(SourceTerm::monomial(0.0).unwrap().eval(0.0), 1.0);
    }

    #[test]
    fn coefficient_validation() {
        assert!(CoefficientField::new(0.0, 1.0, 0.0).is_err());
        assert!(CoefficientField::new(1.0, -1.0, 0.0).is_ok());
    }
}
