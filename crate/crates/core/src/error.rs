use thiserror::Error;

/// Errors raised by the modelling, optimization and kinematics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parametrization singularity: |cos(theta)| = {cos_theta:e}")]
    Singularity { cos_theta: f64 },

    #[error("parametrization singularity during interval {node}")]
    SingularityAtNode { node: usize },

    #[error("free-fall node {node}, alignment undefined")]
    FreeFall { node: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("bounds inconsistent at index {index}: lower {lower} > upper {upper}")]
    InconsistentBounds { index: usize, lower: f64, upper: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("kinematic singularity at node {node} (manipulability {manipulability:e})")]
    KinematicSingularity { node: usize, manipulability: f64 },

    #[error("inverse kinematics diverged at node {node} (position error {error:.3e} m)")]
    IkDivergence { node: usize, error: f64 },

    #[error("dynamics unavailable: robot model has no inertial parameters")]
    DynamicsUnavailable,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
