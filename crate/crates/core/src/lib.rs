//! Finite element discretisations of a one-dimensional transmission problem
//! for the fractional Laplacian with piecewise-constant, possibly
//! sign-changing coefficients, together with the closed-form stiffness
//! kernels, an independent quadrature oracle, and convergence tooling.

pub mod assembly;
pub mod csvfmt;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod kernel;
pub mod lifting;
pub mod mesh;
pub mod norms;
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod solvers;

pub use error::{Error, Result};
pub use mesh::{build_mesh, InterfaceMesh, RationalInterface};
pub use problem::{CoefficientField, ModelKind, ProblemConfig, Sigma3Policy, SourceTerm};
