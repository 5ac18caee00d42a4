use thiserror::Error;

/// Errors raised by discretization, material evaluation and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate element {element}: non-positive Jacobian determinant {det:e}")]
    DegenerateElement { element: usize, det: f64 },

    #[error("inverted element {element} at quadrature point {point}: J = {det:e}")]
    InvertedElement { element: usize, point: usize, det: f64 },

    #[error("inverted deformation: J = {det:e}")]
    InvertedDeformation { det: f64 },

    #[error("incompressible material (nu = 0.5) is not supported")]
    IncompressibleUnsupported,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature state not initialized; evaluate the residual first")]
    StateNotInitialized,

    #[error("indefinite operator detected at CG iteration {iteration}: p^T A p = {curvature:e}")]
    IndefiniteOperator { iteration: usize, curvature: f64 },

    #[error("indefinite preconditioner detected at CG iteration {iteration}: r^T M r = {value:e}")]
    IndefinitePreconditioner { iteration: usize, value: f64 },

    #[error("coarse matrix on level {level} is not SPD (pivot {pivot} = {value:e})")]
    NotSpd { level: usize, pivot: usize, value: f64 },

    #[error("invalid smoother: {0}")]
    InvalidSmoother(String),

    #[error("nonlinear step rejected: {0}")]
    StepRejected(String),

    #[error("solver failed to converge: {0}")]
    NotConverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
