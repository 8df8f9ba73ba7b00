use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {cells} cells requested, maximum is {max}")]
    Capacity { cells: u128, max: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("critical contrast: sigma1*(1-b) + sigma2*b vanishes (b = {b}, sigma1 = {sigma1}, sigma2 = {sigma2})")]
    CriticalContrast { b: f64, sigma1: f64, sigma2: f64 },

    #[error("singular system: pivot {pivot:e} below threshold {threshold:e}")]
    Singular { pivot: f64, threshold: f64 },

    #[error("interface equation not solvable: |c*| = {value:e} below {threshold:e}")]
    Solvability { value: f64, threshold: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, change {change:e} after {evaluations} evaluations")]
    Convergence {
        estimate: f64,
        change: f64,
        evaluations: u64,
    },

    #[error("linear solve inaccurate: residual {residual:e} exceeds bound {bound:e}")]
    Residual { residual: f64, bound: f64 },

    #[error("{model} model: {source}")]
    Model {
        model: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name of the error class, used in run manifests.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Capacity { .. } => "capacity",
            Error::Config(_) => "configuration",
            Error::CriticalContrast { .. } => "critical_contrast",
            Error::Singular { .. } => "singular",
            Error::Solvability { .. } => "solvability",
            Error::Convergence { .. } => "convergence",
            Error::Residual { .. } => "residual",
            Error::Model { source, .. } => source.class(),
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Strips any model wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::Model { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
